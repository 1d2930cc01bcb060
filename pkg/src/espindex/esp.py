"""Edit-sensitive parsing.

One ESP iteration cuts a symbol string into blocks of two or three symbols:
maximal runs and short repetition-free stretches are paired from the left,
long repetition-free stretches are cut around landmarks found after
alphabet reduction.  Iterating until one symbol is left yields a balanced
2-3 tree; three-symbol blocks are stored as two binary rules.

The block decisions are implemented twice: a literal per-metablock version
(``reference_blocks``) and a vectorised version (``parse_blocks``) that can
also report, for every block, the span of input positions its boundaries
were derived from.  Pattern search relies on that span to know which blocks
of a pattern are guaranteed to reappear in the text.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

TERMINALS = 256
ID_BITS = 64
MAX_LSTAR = 5


class EspError(ValueError):
    pass


def reduction_rounds(bits: int) -> int:
    """Rounds of alphabet reduction that bring ``bits``-bit symbols to {0..5}."""
    alphabet = 1 << bits
    rounds = 0
    while alphabet > 6:
        alphabet = 2 * (alphabet - 1).bit_length()
        rounds += 1
    return rounds


# symbol ids are int64, so this many rounds always ends in labels 0..5
ROUNDS = min(MAX_LSTAR, reduction_rounds(ID_BITS))
LSTAR = ROUNDS


class Kind(Enum):
    TYPE1 = 1
    TYPE2 = 2
    TYPE3 = 3


@dataclass(frozen=True)
class Metablock:
    kind: Kind
    start: int
    stop: int

    def __len__(self):
        return self.stop - self.start


# ---------------------------------------------------------------------------
# literal rule implementations


def partition_metablocks(s, lstar: int = LSTAR) -> list[Metablock]:
    """Split ``s`` into maximal runs (Type1), repetition-free stretches longer
    than ``lstar`` (Type2) and the remaining short stretches (Type3)."""
    s = list(s)
    n = len(s)
    if n == 0:
        raise EspError("empty string")
    inrun = [(i > 0 and s[i - 1] == s[i]) or (i + 1 < n and s[i] == s[i + 1]) for i in range(n)]
    out = []
    i = 0
    while i < n:
        j = i + 1
        if inrun[i]:
            while j < n and s[j] == s[i]:
                j += 1
            out.append(Metablock(Kind.TYPE1, i, j))
        else:
            while j < n and not inrun[j]:
                j += 1
            kind = Kind.TYPE2 if j - i > lstar else Kind.TYPE3
            out.append(Metablock(kind, i, j))
        i = j
    return out


def _lowbit(x: int) -> int:
    return (x & -x).bit_length() - 1


def alphabet_reduce_step(labels) -> list[int]:
    """One round of ``2*l + bit(l, s[i])`` where ``l`` is the lowest bit in
    which ``s[i]`` differs from its left neighbour.  The first position has
    no left neighbour and is compared with its right neighbour instead,
    which keeps it distinct from position 1."""
    s = [int(x) for x in labels]
    if len(s) < 2:
        raise EspError("alphabet reduction needs at least two symbols")
    out = []
    for i, cur in enumerate(s):
        other = s[i - 1] if i else s[1]
        if other == cur:
            raise EspError(f"repetition at position {i}")
        ell = _lowbit(cur ^ other)
        out.append(2 * ell + ((cur >> ell) & 1))
    return out


def alphabet_reduce_final(labels) -> list[int]:
    """Replace every label >= 3 by the least of 0, 1, 2 not used by a
    neighbour; all 3s first (left to right), then 4s, then 5s."""
    out = [int(x) for x in labels]
    top = max(out, default=0)
    for value in range(3, top + 1):
        for i, x in enumerate(out):
            if x != value:
                continue
            near = set()
            if i:
                near.add(out[i - 1])
            if i + 1 < len(out):
                near.add(out[i + 1])
            out[i] = min({0, 1, 2} - near)
    return out


def reduce_labels(s, rounds: int = ROUNDS) -> list[int]:
    labels = list(s)
    for _ in range(rounds):
        labels = alphabet_reduce_step(labels)
    return alphabet_reduce_final(labels)


def select_landmarks(labels) -> set[int]:
    """Local maxima, then local minima with no selected neighbour.
    The two end positions are never landmarks."""
    lab = list(labels)
    n = len(lab)
    maxima = {i for i in range(1, n - 1) if lab[i] > lab[i - 1] and lab[i] > lab[i + 1]}
    chosen = set(maxima)
    for i in range(1, n - 1):
        if lab[i] < lab[i - 1] and lab[i] < lab[i + 1] and i - 1 not in chosen and i + 1 not in chosen:
            chosen.add(i)
    return chosen


def _pairs(length: int, offset: int = 0) -> list[tuple[int, int]]:
    """Leftmost-two blocking; a remainder of three becomes one block."""
    out = []
    i = 0
    while length - i > 3 or length - i == 2:
        out.append((offset + i, 2))
        i += 2
    if length - i == 3:
        out.append((offset + i, 3))
    return out


def block_type2(n: int, landmarks) -> list[tuple[int, int]]:
    """Blocks of a Type2 metablock of length ``n`` as (start, length) pairs.

    Each position joins the block of its closest landmark with ties going
    right, i.e. a block starts just before every landmark.  Cuts that would
    isolate a first or last symbol are dropped and any block longer than
    three is re-cut from the left.
    """
    cuts = sorted({p - 1 for p in landmarks if 2 <= p - 1 <= n - 2})
    bounds = [0] + cuts + [n]
    out = []
    for a, b in zip(bounds, bounds[1:]):
        if b - a > 3:
            out.extend(_pairs(b - a, a))
        else:
            out.append((a, b - a))
    return out


def block_type13(length: int, left_run: int = 0, right_run: int = 0) -> list[tuple[int, int]]:
    """Blocks of a Type1 or Type3 metablock as (start, length) pairs relative
    to the metablock.

    A metablock of one symbol ``b`` sits in a context ``a* b c*`` and joins
    the run on its left (``aab`` if that run has length two, else ``ab``),
    or the run on its right when there is none on the left.
    """
    if length >= 2:
        return _pairs(length)
    if left_run == 2:
        return [(-2, 3)]
    if left_run > 2:
        return [(-1, 2)]
    if right_run == 2:
        return [(0, 3)]
    if right_run > 2:
        return [(0, 2)]
    raise EspError("lone symbol without a neighbouring run")


def reference_blocks(s, lstar: int = LSTAR, rounds: int = ROUNDS) -> list[tuple[int, int]]:
    """Blocks of one ESP iteration, derived metablock by metablock."""
    s = list(s)
    n = len(s)
    if n < 2:
        raise EspError("a parse step needs at least two symbols")
    metas = partition_metablocks(s, lstar)
    # run extents after lone symbols took their share: [start, stop)
    run_span = {i: [m.start, m.stop] for i, m in enumerate(metas) if m.kind is Kind.TYPE1}
    attached = {}
    for i, m in enumerate(metas):
        if len(m) != 1 or m.kind is Kind.TYPE1 or m.start == 0:
            continue
        span = run_span[i - 1]
        rel = block_type13(1, left_run=span[1] - span[0])
        a, k = rel[0]
        attached[i] = (m.start + a, k)
        span[1] = m.start + a
    blocks = []
    lead = None
    if len(metas[0]) == 1 and metas[0].kind is not Kind.TYPE1:
        # a lone first symbol joins whatever is left of the following run
        span = run_span[1]
        left = span[1] - span[0]
        if left == 0:
            lead = metas[0].start
        else:
            span[0] = 0
    for i, m in enumerate(metas):
        if m.kind is Kind.TYPE1:
            a, b = run_span[i]
            if b > a:
                blocks.extend(_pairs(b - a, a))
        elif i in attached:
            blocks.append(attached[i])
        elif len(m) == 1:
            continue
        elif m.kind is Kind.TYPE3:
            blocks.extend(_pairs(len(m), m.start))
        else:
            labels = reduce_labels(s[m.start:m.stop], rounds)
            marks = select_landmarks(labels)
            blocks.extend((m.start + a, k) for a, k in block_type2(len(m), marks))
    blocks.sort()
    if lead is not None:
        a, k = blocks[0]
        merged = _pairs(k + 1, 0)
        blocks = merged + blocks[1:]
    return blocks


# ---------------------------------------------------------------------------
# vectorised blocking


def as_symbols(s) -> np.ndarray:
    if isinstance(s, (bytes, bytearray, memoryview)):
        return np.frombuffer(bytes(s), dtype=np.uint8).astype(np.int64)
    return np.asarray(s, dtype=np.int64)


@dataclass
class Blocking:
    starts: np.ndarray
    lengths: np.ndarray
    dep_lo: np.ndarray | None = None
    dep_hi: np.ndarray | None = None

    def __len__(self):
        return len(self.starts)


def _final_labels(s, pos, is_first, is_last, rounds):
    """Alphabet reduction over the concatenated positions ``pos`` of all
    Type2 metablocks; ``is_first``/``is_last`` mark metablock ends."""
    lab = s[pos].astype(np.int64)
    nb = np.empty(len(pos), dtype=np.int64)
    for _ in range(rounds):
        nb[1:] = lab[:-1]
        # the first symbol of a metablock is compared with its right neighbour
        nb[is_first] = lab[np.flatnonzero(is_first) + 1]
        diff = lab ^ nb
        low = diff & -diff
        ell = np.frexp(low.astype(np.float64))[1].astype(np.int64) - 1
        lab = 2 * ell + ((lab >> ell) & 1)
    top = int(lab.max()) if len(lab) else 0
    big = np.int64(1 << 40)
    for value in range(3, top + 1):
        idx = np.flatnonzero(lab == value)
        if not len(idx):
            continue
        left = np.where(is_first[idx], big, lab[idx - 1])
        right = np.where(is_last[idx], big, lab[np.minimum(idx + 1, len(lab) - 1)])
        new = np.full(len(idx), 2, dtype=np.int64)
        new[(left != 1) & (right != 1)] = 1
        new[(left != 0) & (right != 0)] = 0
        lab[idx] = new
    return lab


def parse_blocks(s, lstar: int = LSTAR, rounds: int = ROUNDS, track: bool = False) -> Blocking:
    """One ESP iteration over ``s``.

    With ``track`` the result also carries, per block, the smallest and
    largest input index consulted to fix that block.  Indices ``< 0`` or
    ``>= len(s)`` stand for the ends of the string.
    """
    s = as_symbols(s)
    n = len(s)
    if n < 2:
        raise EspError("a parse step needs at least two symbols")
    g_all = np.arange(n + 1, dtype=np.int64)
    eq = s[1:] == s[:-1]
    inrun = np.zeros(n, dtype=bool)
    inrun[1:] |= eq
    inrun[:-1] |= eq
    same = (inrun[:-1] & inrun[1:] & eq) | (~inrun[:-1] & ~inrun[1:])
    seg_start = np.concatenate([[0], np.flatnonzero(~same) + 1])
    seg_stop = np.concatenate([seg_start[1:], [n]])
    seg_len = seg_stop - seg_start
    seg_run = inrun[seg_start]
    nseg = len(seg_start)
    seg_of = np.repeat(np.arange(nseg), seg_len)

    cut = np.zeros(n + 1, dtype=bool)
    cut[0] = cut[n] = True
    cut[seg_start] = True

    # lone symbols join the run on their left
    single = np.flatnonzero(~seg_run & (seg_len == 1))
    stolen = np.zeros(nseg, dtype=bool)
    consumed = np.zeros(nseg, dtype=bool)
    inner = single[seg_start[single] > 0]
    lrun = inner - 1
    consumed[lrun[seg_len[lrun] == 2]] = True
    stolen[lrun[seg_len[lrun] > 2]] = True
    cut[seg_start[inner]] = False
    ers = seg_start.copy()
    ere = seg_stop - 1 - stolen
    lead_merge = False
    if seg_len[0] == 1 and not seg_run[0]:
        cut[1] = False
        if consumed[1]:
            lead_merge = True
        else:
            ers[1] = 0

    rs_of = seg_start[seg_of]
    re_of = seg_stop[seg_of] - 1
    g = g_all[1:n]
    gseg = seg_of[g]
    interior = same
    run_g = interior & seg_run[gseg]
    if run_g.any():
        gi = g[run_g]
        sg = gseg[run_g]
        steal_cut = stolen[sg] & (gi == seg_stop[sg] - 1)
        regular = ((gi - ers[sg]) % 2 == 0) & (gi <= ere[sg] - 1)
        cut[gi] = (steal_cut | regular) & ~consumed[sg]
    t23 = interior & ~seg_run[gseg]
    t2seg = ~seg_run & (seg_len > lstar)
    t3_g = t23 & ~t2seg[gseg]
    if t3_g.any():
        gi = g[t3_g]
        sg = gseg[t3_g]
        cut[gi] = ((gi - seg_start[sg]) % 2 == 0) & (gi <= seg_stop[sg] - 2)

    t2_ids = np.flatnonzero(t2seg)
    if len(t2_ids):
        pos = np.concatenate([np.arange(a, b) for a, b in zip(seg_start[t2_ids], seg_stop[t2_ids])]) \
            if len(t2_ids) < 64 else _ranges(seg_start[t2_ids], seg_stop[t2_ids])
        first = np.zeros(len(pos), dtype=bool)
        last = np.zeros(len(pos), dtype=bool)
        offs = np.concatenate([[0], np.cumsum(seg_len[t2_ids])])
        first[offs[:-1]] = True
        last[offs[1:] - 1] = True
        lab = _final_labels(s, pos, first, last, rounds)
        m = len(lab)
        left = np.empty(m, dtype=np.int64)
        right = np.empty(m, dtype=np.int64)
        left[1:] = lab[:-1]
        right[:-1] = lab[1:]
        inner_pos = ~first & ~last
        maxi = inner_pos.copy()
        maxi[inner_pos] = (lab[inner_pos] > left[inner_pos]) & (lab[inner_pos] > right[inner_pos])
        mini = inner_pos.copy()
        mini[inner_pos] = (lab[inner_pos] < left[inner_pos]) & (lab[inner_pos] < right[inner_pos])
        nbmax = np.zeros(m, dtype=bool)
        nbmax[1:] |= maxi[:-1]
        nbmax[:-1] |= maxi[1:]
        mark = maxi | (mini & ~nbmax)
        p = pos[mark]
        ts = seg_start[seg_of[p]]
        te = seg_stop[seg_of[p]] - 1
        ok = (p - 1 >= ts + 2) & (p - 1 <= te - 2)
        cut[p[ok] - 1] = True

    starts = np.flatnonzero(cut[:n])
    lengths = np.diff(np.append(starts, n))

    if track:
        glo, ghi = _gap_dependencies(n, g_all, same, seg_of, seg_start, seg_stop, seg_run,
                                     t2seg, lstar, rounds)
        dep_lo = np.minimum(np.minimum.reduceat(glo[:n], starts), glo[starts + lengths])
        dep_hi = np.maximum(np.maximum.reduceat(ghi[:n], starts), ghi[starts + lengths])
    else:
        dep_lo = dep_hi = None

    if np.any(lengths > 3):
        starts, lengths, dep_lo, dep_hi = _split_long(starts, lengths, dep_lo, dep_hi)
    return Blocking(starts, lengths, dep_lo, dep_hi)


def _ranges(a, b):
    """Concatenation of ``arange(a[i], b[i])``."""
    lens = b - a
    total = int(lens.sum())
    offs = np.repeat(a - np.concatenate([[0], np.cumsum(lens)[:-1]]), lens)
    return np.arange(total, dtype=np.int64) + offs


def _split_long(starts, lengths, dep_lo, dep_hi):
    long_ = lengths > 3
    pieces = np.where(long_, lengths // 2, 1)
    rep = np.repeat(np.arange(len(starts)), pieces)
    first = np.concatenate([[0], np.cumsum(pieces)[:-1]])
    k = np.arange(len(rep)) - first[rep]
    new_starts = starts[rep] + 2 * k
    last_piece = k == pieces[rep] - 1
    new_len = np.where(long_[rep], np.where(last_piece, lengths[rep] - 2 * k, 2), lengths[rep])
    if dep_lo is not None:
        dep_lo, dep_hi = dep_lo[rep], dep_hi[rep]
    return new_starts, new_len, dep_lo, dep_hi


def _gap_dependencies(n, g_all, same, seg_of, seg_start, seg_stop, seg_run, t2seg, lstar, rounds):
    """Per gap (between positions g-1 and g) the index span its cut decision
    reads.  Gap 0 and gap n are the string ends."""
    glo = g_all - 3
    ghi = g_all + 3
    glo[:6] = -1
    glo[0] = ghi[0] = -1
    glo[n] = ghi[n] = n
    g = g_all[1:n]
    gseg = seg_of[g]
    ts = seg_start[gseg]
    te = seg_stop[gseg] - 1
    run_g = same & seg_run[gseg]
    lo = glo[1:n]
    hi = ghi[1:n]
    lo[run_g] = ts[run_g] - 2
    hi[run_g] = np.where(te[run_g] >= g[run_g] + 2, g[run_g] + 2, te[run_g] + 4)
    t2_g = same & ~seg_run[gseg] & t2seg[gseg]
    t3_g = same & ~seg_run[gseg] & ~t2seg[gseg]
    lo[t3_g] = ts[t3_g] - 3
    hi[t3_g] = te[t3_g] + 3
    if t2_g.any():
        gi, a, b = g[t2_g], ts[t2_g], te[t2_g]
        l2 = gi - 6 - rounds
        h2 = gi + 8
        l2 = np.where(l2 <= a + 1, a - 3, l2)
        h2 = np.where(h2 >= b - 1, b + 3, h2)
        c = np.clip(gi - lstar // 2, a, b - lstar)
        lo[t2_g] = np.minimum(l2, c - 2)
        hi[t2_g] = np.maximum(h2, c + lstar + 2)
    return glo, ghi


# ---------------------------------------------------------------------------
# naming


def block_digrams(s, blocking: Blocking):
    """Symbols of every block: (first, second, third or -1)."""
    s = as_symbols(s)
    st, ln = blocking.starts, blocking.lengths
    a = s[st]
    b = s[st + 1]
    c = np.where(ln == 3, s[np.minimum(st + 2, len(s) - 1)], -1)
    return a, b, c


def name_level(a, b, c, base: int):
    """Name the blocks of one level for a text.

    Rules of the level are ordered by (left, right) and numbered from
    ``base`` in that order.  A block ``abc`` becomes ``X -> a B'`` and
    ``B' -> bc``; ``B'`` belongs to the same level, so its number is fixed
    first from the rules whose right side is older.

    Returns (block ids, rule lefts, rule rights) with rules in id order.
    """
    three = c >= 0
    keys_l = np.concatenate([a[~three], b[three]])
    keys_r = np.concatenate([b[~three], c[three]])
    if len(keys_l) and (keys_l.max() >= 1 << 31 or keys_r.max() >= 1 << 31):
        raise EspError("symbol id space exhausted")
    old_keys = (keys_l << 32) | keys_r
    uold, old_inv = np.unique(old_keys, return_inverse=True)
    oL = uold >> 32
    oR = uold & 0xFFFFFFFF
    # digram index of B' for every 3-block, then unique top rules (a, B')
    bp = old_inv[np.count_nonzero(~three):]
    top_keys = (a[three] << 32) | bp
    utop, top_inv = np.unique(top_keys, return_inverse=True)
    nL = utop >> 32
    nB = utop & 0xFFFFFFFF
    n_before = np.searchsorted(np.sort(nL), oL, side="left")
    old_id = base + np.arange(len(uold)) + n_before
    nR = old_id[nB]
    lefts = np.concatenate([oL, nL])
    rights = np.concatenate([oR, nR])
    order = np.lexsort((rights, lefts))
    rank = np.empty(len(order), dtype=np.int64)
    rank[order] = np.arange(len(order))
    ids = base + rank
    if not np.array_equal(ids[:len(uold)], old_id):
        raise EspError("inconsistent level renaming")
    out = np.empty(len(a), dtype=np.int64)
    out[~three] = ids[old_inv[:np.count_nonzero(~three)]]
    out[three] = ids[len(uold) + top_inv]
    return out, lefts[order], rights[order]


def esp_level(s, base: int):
    """One ESP iteration over a text level: returns the next level string and
    the new rules (lefts, rights), numbered from ``base``."""
    s = as_symbols(s)
    blocking = parse_blocks(s)
    a, b, c = block_digrams(s, blocking)
    return name_level(a, b, c, base)


def esp_comp(text: bytes):
    """Build the ESP grammar of ``text``."""
    from .grammar import Dictionary

    if len(text) == 0:
        raise EspError("cannot compress an empty text")
    cur = np.frombuffer(bytes(text), dtype=np.uint8).astype(np.int64)
    lefts, rights, levels = [], [], []
    base = TERMINALS
    level = 0
    while len(cur) > 1:
        level += 1
        cur, l, r = esp_level(cur, base)
        lefts.append(l)
        rights.append(r)
        levels.append(np.full(len(l), level, dtype=np.int32))
        base += len(l)
    cat = (lambda xs, dt: np.concatenate(xs).astype(dt) if xs else np.zeros(0, dtype=dt))
    return Dictionary(
        left=cat(lefts, np.int64),
        right=cat(rights, np.int64),
        level=cat(levels, np.int32),
        start=int(cur[0]),
        u=len(text),
        lstar=LSTAR,
        rounds=ROUNDS,
    )
