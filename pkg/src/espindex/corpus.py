"""Seeded synthetic corpora: English-like prose, DNA-like sequence and a
highly repetitive file (one seed repeated with point edits)."""
from __future__ import annotations

import numpy as np

_LETTERS = np.frombuffer(b"etaoinshrdlcumwfgypbvkjxqz", dtype=np.uint8)
# rough English letter frequencies, same order as _LETTERS
_FREQ = np.array([12.7, 9.1, 8.2, 7.5, 7.0, 6.7, 6.3, 6.1, 6.0, 4.3, 4.0, 2.8, 2.8,
                  2.4, 2.4, 2.2, 2.0, 2.0, 1.9, 1.5, 1.0, 0.8, 0.2, 0.2, 0.1, 0.1])


def english_like(size: int, seed: int = 0, vocab: int = 5000) -> bytes:
    """Zipf-distributed pseudo-words with punctuation and line breaks."""
    rng = np.random.default_rng(seed)
    p = _FREQ / _FREQ.sum()
    wlen = np.clip(rng.poisson(4.5, vocab), 1, 14)
    letters = _LETTERS[rng.choice(len(_LETTERS), int(wlen.sum()), p=p)]
    cuts = np.cumsum(wlen)[:-1]
    words = [w.tobytes() for w in np.split(letters, cuts)]
    ranks = np.arange(1, vocab + 1, dtype=np.float64)
    zipf = 1 / ranks
    zipf /= zipf.sum()
    est = size // 5 + 16
    out = bytearray()
    while len(out) < size:
        picks = rng.choice(vocab, est, p=zipf)
        seps = rng.choice(np.frombuffer(b" ,.\n", dtype=np.uint8), est, p=[0.86, 0.06, 0.05, 0.03])
        for w, s in zip(picks.tolist(), seps.tolist()):
            out += words[w]
            out.append(s)
    return bytes(out[:size])


def dna_like(size: int, seed: int = 0, motif_rate: float = 0.3) -> bytes:
    """acgt with a few hundred recurring motifs mixed into random sequence."""
    rng = np.random.default_rng(seed)
    alphabet = np.frombuffer(b"acgt", dtype=np.uint8)
    base = alphabet[rng.integers(0, 4, size)]
    motifs = [alphabet[rng.integers(0, 4, int(k))] for k in rng.integers(20, 400, 300)]
    pos = 0
    while pos < size:
        pos += int(rng.geometric(motif_rate / 200))
        if pos >= size:
            break
        m = motifs[int(rng.integers(len(motifs)))]
        k = min(len(m), size - pos)
        base[pos:pos + k] = m[:k]
        pos += k
    return base.tobytes()


def repetitive(size: int, seed: int = 0, seed_len: int = 20000, edit_rate: float = 1e-3) -> bytes:
    """A seed text repeated to ``size`` bytes, each copy with point edits."""
    rng = np.random.default_rng(seed)
    unit = np.frombuffer(english_like(seed_len, seed + 1), dtype=np.uint8)
    copies = -(-size // seed_len)
    arr = np.tile(unit, copies)[:size].copy()
    k = int(size * edit_rate)
    where = rng.integers(0, size, k)
    arr[where] = _LETTERS[rng.integers(0, len(_LETTERS), k)]
    return arr.tobytes()


KINDS = {"english": english_like, "dna": dna_like, "repetitive": repetitive}


def generate(kind: str, size: int, seed: int = 0) -> bytes:
    try:
        fn = KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown corpus kind {kind!r}") from None
    return fn(size, seed)


def mutate(p: bytes, rng: np.random.Generator, alphabet: bytes) -> bytes:
    """Point substitution at a random position with a different byte."""
    b = bytearray(p)
    i = int(rng.integers(len(b)))
    choices = [c for c in alphabet if c != b[i]]
    b[i] = choices[int(rng.integers(len(choices)))]
    return bytes(b)
