"""Bit vectors with rank/select, LOUDS ordered trees and a permutation
with shortcut pointers for fast inverses.

All structures are immutable once built.  Bits are stored little-endian in
64-bit words: bit ``i`` lives in word ``i >> 6`` at position ``i & 63``.
"""
from __future__ import annotations

import contextlib
from functools import cached_property
from fractions import Fraction
from math import ceil

import numpy as np

WORD = 64
_MASK64 = (1 << 64) - 1

# directory parameters: 512-bit superblocks, one select sample per 256 hits
SUPERBLOCK = 512
_WORDS_PER_SB = SUPERBLOCK // WORD
SELECT_SAMPLE = 256


def bits_to_words(bits) -> np.ndarray:
    """Pack a boolean array into little-endian uint64 words."""
    bits = np.asarray(bits, dtype=bool)
    raw = np.packbits(bits, bitorder="little")
    pad = (-len(raw)) % 8
    if pad:
        raw = np.concatenate([raw, np.zeros(pad, dtype=np.uint8)])
    return raw.view("<u8").astype(np.uint64)


def words_to_bits(words: np.ndarray, length: int) -> np.ndarray:
    raw = np.asarray(words, dtype="<u8").view(np.uint8)
    return np.unpackbits(raw, bitorder="little")[:length].astype(bool)


def width_for(max_value: int) -> int:
    """Bits needed to store integers in ``[0, max_value]`` (at least 1)."""
    return max(1, int(max_value).bit_length())


def pack_ints(values, width: int) -> np.ndarray:
    """Pack non-negative integers into ``width``-bit fields."""
    values = np.asarray(values, dtype=np.uint64)
    if len(values) == 0:
        return np.zeros(0, dtype=np.uint64)
    shifts = np.arange(width, dtype=np.uint64)
    bits = ((values[:, None] >> shifts) & np.uint64(1)).astype(bool)
    return bits_to_words(bits.ravel())


def unpack_ints(words: np.ndarray, width: int, count: int) -> np.ndarray:
    if count == 0:
        return np.zeros(0, dtype=np.int64)
    bits = words_to_bits(words, count * width).reshape(count, width)
    shifts = np.arange(width, dtype=np.uint64)
    out = (bits.astype(np.uint64) << shifts).sum(axis=1, dtype=np.uint64)
    return out.astype(np.int64)


def packed_words(count: int, width: int) -> int:
    return (count * width + WORD - 1) // WORD


def _select_in_word(word: int, k: int) -> int:
    """Position of the k-th (1-based) set bit of ``word``."""
    for _ in range(k - 1):
        word &= word - 1
    return (word & -word).bit_length() - 1


class BitVector:
    """Static bit vector with constant-time rank and sampled select.

    ``rank1(i)`` counts ones in ``[0, i)``; ``select1(k)`` returns the position
    of the k-th one, 1-based, and likewise for zeros.
    """

    def __init__(self, bits=None, *, words=None, length=None):
        if words is None:
            bits = np.asarray(bits, dtype=bool)
            length = len(bits)
            words = bits_to_words(bits)
        self.length = int(length)
        self.words = np.asarray(words, dtype=np.uint64)
        nwords = packed_words(self.length, 1)
        if len(self.words) < nwords:
            raise ValueError("word array shorter than bit length")
        self.words = self.words[:nwords]
        self._w = [int(w) for w in self.words]
        self._build_directories()

    def _build_directories(self):
        counts = np.array([w.bit_count() for w in self._w], dtype=np.int64)
        self.ones = int(counts.sum())
        self.zeros = self.length - self.ones
        nsb = len(self._w) // _WORDS_PER_SB + 1
        per_sb = np.zeros(nsb, dtype=np.int64)
        if len(counts):
            np.add.at(per_sb, np.arange(len(counts)) // _WORDS_PER_SB, counts)
        sb_rank = np.concatenate([[0], np.cumsum(per_sb)])[:nsb]
        self._sb_rank = [int(x) for x in sb_rank]
        # zeros before each superblock, measured against the real length
        self._sb_rank0 = [min(i * SUPERBLOCK, self.length) - r for i, r in enumerate(self._sb_rank)]
        self._sel1 = self._samples(sb_rank, self.ones)
        self._sel0 = self._samples(np.array(self._sb_rank0, dtype=np.int64), self.zeros)

    @staticmethod
    def _samples(sb_rank: np.ndarray, total: int) -> list:
        # superblock holding the (j*SELECT_SAMPLE + 1)-th hit, for every j
        targets = np.arange(0, total, SELECT_SAMPLE, dtype=np.int64) + 1
        idx = np.searchsorted(sb_rank, targets, side="left") - 1
        return [int(x) for x in idx]

    def __len__(self):
        return self.length

    def __getitem__(self, i: int) -> int:
        if not 0 <= i < self.length:
            raise IndexError(i)
        return (self._w[i >> 6] >> (i & 63)) & 1

    def directory_bits(self) -> int:
        """Space of the rank/select directories, 32 bits per entry."""
        return 32 * (len(self._sb_rank) + len(self._sel1) + len(self._sel0))

    def rank1(self, i: int) -> int:
        if i <= 0:
            return 0
        if i >= self.length:
            return self.ones
        sb = i >> 9
        r = self._sb_rank[sb]
        w = self._w
        wi = i >> 6
        for j in range(sb * _WORDS_PER_SB, wi):
            r += w[j].bit_count()
        rem = i & 63
        if rem:
            r += (w[wi] & ((1 << rem) - 1)).bit_count()
        return r

    def rank0(self, i: int) -> int:
        if i <= 0:
            return 0
        i = min(i, self.length)
        return i - self.rank1(i)

    def select1(self, k: int) -> int:
        if not 1 <= k <= self.ones:
            raise IndexError(k)
        return self._select(k, self._sel1, self._sb_rank, False)

    def select0(self, k: int) -> int:
        if not 1 <= k <= self.zeros:
            raise IndexError(k)
        return self._select(k, self._sel0, self._sb_rank0, True)

    def _select(self, k, samples, sb_rank, invert):
        s = (k - 1) // SELECT_SAMPLE
        lo = samples[s]
        hi = samples[s + 1] if s + 1 < len(samples) else len(sb_rank) - 1
        # last superblock in [lo, hi] whose prefix count is < k
        while lo < hi:
            mid = (lo + hi + 1) >> 1
            if sb_rank[mid] < k:
                lo = mid
            else:
                hi = mid - 1
        r = sb_rank[lo]
        w = self._w
        j = lo * _WORDS_PER_SB
        while True:
            word = w[j]
            if invert:
                word = ~word & _MASK64
            c = word.bit_count()
            if r + c >= k:
                return j * WORD + _select_in_word(word, k - r)
            r += c
            j += 1

    # bulk helpers; they decode the raw bits and do not use the directories
    def to_bools(self) -> np.ndarray:
        return words_to_bits(self.words, self.length)

    # the batch methods materialise position tables on first use
    @cached_property
    def _pos1(self) -> np.ndarray:
        return np.flatnonzero(self.to_bools())

    @cached_property
    def _pos0(self) -> np.ndarray:
        return np.flatnonzero(~self.to_bools())

    @cached_property
    def _rank_table(self) -> np.ndarray:
        bits = self.to_bools()
        return np.concatenate([[0], np.cumsum(bits)])

    def select1_many(self, ks) -> np.ndarray:
        return self._pos1[np.asarray(ks, dtype=np.int64) - 1]

    def select0_many(self, ks) -> np.ndarray:
        return self._pos0[np.asarray(ks, dtype=np.int64) - 1]

    def rank1_many(self, idx) -> np.ndarray:
        return self._rank_table[np.clip(np.asarray(idx, dtype=np.int64), 0, self.length)]


class LoudsTree:
    """Level-order unary degree sequence of an ordered tree.

    Nodes are identified by their level-order rank, the root being 0.  The
    encoding is ``10`` for the imaginary super-root followed by ``1^d 0`` for
    every node in level order, so a tree with ``n`` nodes takes ``2n + 1`` bits.
    """

    def __init__(self, bitvector: BitVector):
        self.bits = bitvector
        self.size = bitvector.ones
        if bitvector.length != 2 * self.size + 1:
            raise ValueError("malformed LOUDS bit string")

    @classmethod
    def from_degrees(cls, degrees) -> "LoudsTree":
        """Build from the child counts of the nodes listed in level order."""
        degrees = np.asarray(degrees, dtype=np.int64)
        n = len(degrees)
        if n and degrees.sum() != n - 1:
            raise ValueError("degree sequence does not describe a tree")
        bits = np.zeros(2 * n + 1, dtype=bool)
        bits[0] = True
        # the 0 closing the record of node v sits after v+1 zeros before it
        ends = 1 + np.cumsum(degrees + 1)
        starts = ends - degrees - 1
        if n:
            ones = np.repeat(starts + 1, degrees) + (np.arange(degrees.sum()) - np.repeat(np.cumsum(degrees) - degrees, degrees))
            bits[ones] = True
        return cls(BitVector(bits))

    @classmethod
    def from_parents(cls, parents) -> "LoudsTree":
        """Build from a parent array already in level order (root has -1)."""
        parents = np.asarray(parents, dtype=np.int64)
        n = len(parents)
        if n == 0:
            raise ValueError("empty tree")
        if parents[0] != -1 or np.any(np.diff(parents[1:]) < 0) or np.any(parents[1:] >= np.arange(1, n)):
            raise ValueError("parent array is not in level order")
        degrees = np.bincount(parents[1:], minlength=n)
        return cls.from_degrees(degrees)

    def __len__(self):
        return self.size

    def bit_length(self) -> int:
        return self.bits.length

    def parent(self, v: int):
        if not 0 <= v < self.size:
            raise IndexError(v)
        if v == 0:
            return None
        return self.bits.select1(v + 1) - v - 1

    def first_child(self, v: int) -> int:
        return self.bits.select0(v + 1) - v

    def degree(self, v: int) -> int:
        if not 0 <= v < self.size:
            raise IndexError(v)
        b = self.bits
        return b.select0(v + 2) - b.select0(v + 1) - 1

    def children_range(self, v: int) -> range:
        """Node ids of the children of ``v``; they are consecutive."""
        if not 0 <= v < self.size:
            raise IndexError(v)
        b = self.bits
        s = b.select0(v + 1)
        d = b.select0(v + 2) - s - 1
        first = s - v
        return range(first, first + d)

    def child(self, v: int, i: int):
        """The i-th child (0-based) of ``v``, or None when ``i >= degree``."""
        kids = self.children_range(v)
        if not 0 <= i < len(kids):
            return None
        return kids[i]

    # bulk navigation over every node at once
    def parents(self) -> np.ndarray:
        v = np.arange(self.size, dtype=np.int64)
        p = self.bits.select1_many(v + 1) - v - 1
        p[0] = -1
        return p

    def degrees(self) -> np.ndarray:
        zeros = np.flatnonzero(~self.bits.to_bools())
        return np.diff(zeros) - 1

    def parent_many(self, vs) -> np.ndarray:
        """Parents of ``vs``; -1 for the root."""
        vs = np.asarray(vs, dtype=np.int64)
        p = self.bits.select1_many(vs + 1) - vs - 1
        return np.where(vs == 0, -1, p)

    def children_bounds(self, vs) -> tuple[np.ndarray, np.ndarray]:
        """First child and one-past-last child of every node in ``vs``."""
        vs = np.asarray(vs, dtype=np.int64)
        z1 = self.bits.select0_many(vs + 1)
        z2 = self.bits.select0_many(vs + 2)
        first = z1 - vs
        return first, first + (z2 - z1 - 1)


class PermutationIndex:
    """A permutation of ``0..n-1`` with forward access and cycle-walk inverse.

    Every cycle longer than ``t = ceil(1/eps)`` gets a shortcut every ``t``
    positions pointing ``t`` steps backwards; the inverse of ``j`` is then
    found after at most ``t + 1`` reads of the forward array.
    """

    def __init__(self, forward, eps, *, cycles=None, _shortcuts=None):
        self.eps = Fraction(eps)
        if not 0 < self.eps <= 1:
            raise ValueError("eps must lie in (0, 1]")
        self.t = ceil(1 / self.eps)
        fwd = np.asarray(forward, dtype=np.int64)
        self.n = len(fwd)
        self.width = width_for(max(self.n - 1, 0))
        self.forward = fwd
        if _shortcuts is None:
            flags, back = _build_shortcuts(fwd, self.t, cycles)
        else:
            flags, back = _shortcuts
        self.flags = flags
        self.back = np.asarray(back, dtype=np.int64)
        self._fwd = fwd.tolist()
        self._back = self.back.tolist()
        self._tally = None

    def __len__(self):
        return self.n

    def apply(self, i: int) -> int:
        if not 0 <= i < self.n:
            raise IndexError(i)
        return self._fwd[i]

    __getitem__ = apply

    def inverse(self, j: int) -> int:
        if not 0 <= j < self.n:
            raise IndexError(j)
        fwd = self._fwd
        flags = self.flags
        x = j
        steps = 0
        jumped = False
        while True:
            y = fwd[x]
            steps += 1
            if y == j:
                break
            if not jumped and flags[x]:
                x = self._back[flags.rank1(x)]
                jumped = True
            else:
                x = y
        if self._tally is not None:
            self._tally[0] += steps
            self._tally[1] += 1
        return x

    def walk_length(self, j: int) -> int:
        """Number of forward reads ``inverse(j)`` performs."""
        saved = self._tally
        self._tally = [0, 0]
        try:
            self.inverse(j)
            return self._tally[0]
        finally:
            self._tally = saved

    @contextlib.contextmanager
    def tally(self):
        """Accumulate ``[reads, calls]`` of every inverse inside the block."""
        counter = [0, 0]
        saved = self._tally
        self._tally = counter
        try:
            yield counter
        finally:
            self._tally = saved

    def inverse_many(self, js) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised shortcut walk; returns (inverses, forward reads)."""
        js = np.asarray(js, dtype=np.int64)
        fwd = self.forward
        flag_bits = self._flag_bits
        rank = self.flags._rank_table
        x = js.copy()
        out = np.full(len(js), -1, dtype=np.int64)
        steps = np.zeros(len(js), dtype=np.int64)
        jumped = np.zeros(len(js), dtype=bool)
        active = np.ones(len(js), dtype=bool)
        while active.any():
            idx = np.flatnonzero(active)
            xi = x[idx]
            y = fwd[xi]
            steps[idx] += 1
            hit = y == js[idx]
            out[idx[hit]] = xi[hit]
            active[idx[hit]] = False
            rest = idx[~hit]
            xr = xi[~hit]
            jump = ~jumped[rest] & flag_bits[xr]
            nx = fwd[xr]
            nx[jump] = self.back[rank[xr[jump]]]
            x[rest] = nx
            jumped[rest] |= jump
        if self._tally is not None:
            self._tally[0] += int(steps.sum())
            self._tally[1] += len(js)
        return out, steps

    @cached_property
    def _flag_bits(self) -> np.ndarray:
        return self.flags.to_bools()

    def space_bits(self) -> dict:
        return {
            "forward": self.n * self.width,
            "shortcut_flags": self.flags.length,
            "shortcut_targets": len(self.back) * self.width,
            "directories": self.flags.directory_bits(),
        }


def cycle_positions(fwd: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """For each element its cycle length and its distance from the cycle's
    smallest element along the forward direction, by pointer doubling."""
    n = len(fwd)
    idx = np.arange(n, dtype=np.int64)
    # smallest element of every cycle
    rep = idx.copy()
    jump = fwd.copy()
    span = 1
    while span < n:
        rep = np.minimum(rep, rep[jump])
        jump = jump[jump]
        span *= 2
    # cut each cycle just before its representative, then rank the lists
    nxt = np.where(fwd == rep, -1, fwd)
    dist = (nxt >= 0).astype(np.int64)
    ptr = nxt.copy()
    li = np.flatnonzero(ptr >= 0)
    while len(li):
        nxt_li = ptr[li]
        dist[li] += dist[nxt_li]
        ptr[li] = ptr[nxt_li]
        li = li[ptr[li] >= 0]
    length = dist[rep] + 1
    pos = length - 1 - dist
    return length, pos


def _build_shortcuts(fwd: np.ndarray, t: int, cycles=None):
    n = len(fwd)
    if n == 0:
        return BitVector(np.zeros(0, dtype=bool)), np.zeros(0, dtype=np.int64)
    length, pos = cycle_positions(fwd) if cycles is None else cycles
    marked = (length > t) & (pos % t == 0)
    inv = np.empty(n, dtype=np.int64)
    inv[fwd] = np.arange(n, dtype=np.int64)
    target = np.flatnonzero(marked)
    for _ in range(t):
        target = inv[target]
    return BitVector(marked), target
