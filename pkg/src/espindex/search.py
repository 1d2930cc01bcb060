"""Pattern queries on the index.

A pattern is parsed with the text's rules.  While parsing, every block
whose boundaries were decided from symbols inside the current stable
window is named with the text grammar; such a block is present, with the
same name, in the parse tree of every occurrence of the pattern.  The
stable window then shrinks to the run of stable blocks and the next level
is parsed.  Blocks outside it get throw-away names from an overlay.

``fact`` cuts the pattern into stable variables whose yields concatenate
to it.  Counting anchors on one of them, climbs the grammar DAG until an
ancestor covers the whole pattern window, checks the match there, and adds
the ancestor's number of parse-tree occurrences.
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass, field
from math import ceil

import numpy as np

from .esp import TERMINALS, block_digrams, parse_blocks
from .index import EspIndex, UnsupportedOperation

LEFT = 0
RIGHT = 1
OVERLAY_BASE = 1 << 40


class OverlayDictionary:
    """Names for pattern digrams that are not (or need not be) text rules.
    Ids start far above every text id."""

    def __init__(self, base: int = OVERLAY_BASE):
        self.base = base
        self.names: dict[tuple[int, int], int] = {}

    def __len__(self):
        return len(self.names)

    def name(self, a: int, b: int) -> int:
        key = (a, b)
        got = self.names.get(key)
        if got is None:
            got = self.base + len(self.names)
            self.names[key] = got
        return got

    def name_many(self, a, b) -> np.ndarray:
        return np.array([self.name(x, y) for x, y in zip(a.tolist(), b.tolist())], dtype=np.int64)


@dataclass
class Level:
    symbols: np.ndarray
    offsets: np.ndarray  # start of each symbol's yield in the pattern
    lengths: np.ndarray
    certified: np.ndarray  # named from pattern-internal context only


@dataclass
class ParsedPattern:
    levels: list[Level]
    overlay: OverlayDictionary
    absent: bool = False  # a certified block has no text rule: no occurrence

    def stable_symbols(self, min_level: int = 0):
        """(level, symbol, offset, length) of every certified symbol."""
        for k, lv in enumerate(self.levels[min_level:], start=min_level):
            for i in np.flatnonzero(lv.certified).tolist():
                yield k, int(lv.symbols[i]), int(lv.offsets[i]), int(lv.lengths[i])


@dataclass(frozen=True)
class Piece:
    symbol: int
    start: int  # offset in the pattern
    length: int

    @property
    def stop(self):
        return self.start + self.length


class CoreSequence(list):
    """Pieces of a factorisation, left to right."""

    def symbols(self):
        return [p.symbol for p in self]


class VirtualNode:
    """A parse-tree position: the path ``[(symbol, direction), ...]`` from
    an ancestor down to the current node, with every node's start offset."""

    __slots__ = ("path", "starts", "searcher")

    def __init__(self, searcher, path, starts):
        self.searcher = searcher
        self.path = path
        self.starts = starts

    @classmethod
    def root(cls, searcher, symbol: int, start: int = 0):
        return cls(searcher, [(symbol, None)], [start])

    @property
    def symbol(self) -> int:
        return self.path[-1][0]

    @property
    def start(self) -> int:
        return self.starts[-1]

    @property
    def length(self) -> int:
        return self.searcher.length(self.symbol)

    def __repr__(self):
        return f"VirtualNode({self.symbol}@{self.start})"

    def _truncate(self, k):
        return VirtualNode(self.searcher, self.path[:k], self.starts[:k])

    def lra(self):
        """Lowest ancestor that has this node in its left subtree."""
        for i in range(len(self.path) - 1, 0, -1):
            if self.path[i][1] == LEFT:
                return self._truncate(i)
        return None

    def lla(self):
        """Lowest ancestor that has this node in its right subtree."""
        for i in range(len(self.path) - 1, 0, -1):
            if self.path[i][1] == RIGHT:
                return self._truncate(i)
        return None

    def descend(self, direction: int) -> "VirtualNode":
        s = self.searcher
        left, right = s.children(self.symbol)
        if direction == LEFT:
            return VirtualNode(s, self.path + [(left, LEFT)], self.starts + [self.start])
        return VirtualNode(s, self.path + [(right, RIGHT)], self.starts + [self.start + s.length(left)])

    def right_neighbor_candidates(self):
        """Leftmost path below ``right(lra(v))``, top-down: the nodes whose
        yield starts right after this node's yield."""
        a = self.lra()
        if a is None:
            return
        v = a.descend(RIGHT)
        yield v
        while v.symbol >= TERMINALS:
            v = v.descend(LEFT)
            yield v

    def left_neighbor_candidates(self):
        """Rightmost path below ``left(lla(v))``, top-down."""
        a = self.lla()
        if a is None:
            return
        v = a.descend(LEFT)
        yield v
        while v.symbol >= TERMINALS:
            v = v.descend(RIGHT)
            yield v


class Searcher:
    """Query engine bound to one index.  Holds memo tables for navigation
    results; the index itself is never modified."""

    def __init__(self, idx: EspIndex):
        self.idx = idx
        self.lengths = idx.yield_lengths
        self.occ = idx.occ
        self._children: dict[int, tuple[int, int]] = {}
        self._parents: dict[int, tuple[list, list]] = {}
        self._lookup: dict[int, int] = {}
        self._expansion: dict[int, bytes] = {}
        self._positions: dict[int, np.ndarray] = {}
        self.decoded = 0  # symbols produced by partial decoding
        self._len = self.lengths.tolist()
        self.lstar = idx.lstar
        present = np.zeros(TERMINALS, dtype=bool)
        present[idx.terminals] = True
        self._present = present

    # -- cached navigation ------------------------------------------------------
    def length(self, x: int) -> int:
        return self._len[x] if x < len(self._len) else -1

    def children(self, x: int) -> tuple[int, int]:
        got = self._children.get(x)
        if got is None:
            got = self.idx.children(x)
            self._children[x] = got
        return got

    def parents(self, x: int):
        got = self._parents.get(x)
        if got is None:
            got = (self.idx.occurrences_as_left(x), self.idx.occurrences_as_right(x))
            self._parents[x] = got
        return got

    def lookup_many(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Memoised batch reverse lookup; -1 where no rule exists."""
        keys = (a << 32) | b
        uk, inv = np.unique(keys, return_inverse=True)
        vals = np.empty(len(uk), dtype=np.int64)
        cache = self._lookup
        miss = []
        for i, k in enumerate(uk.tolist()):
            got = cache.get(k)
            if got is None:
                miss.append(i)
            else:
                vals[i] = got
        if miss:
            miss = np.array(miss, dtype=np.int64)
            res = self.idx.reverse_lookup_many(uk[miss] >> 32, uk[miss] & 0xFFFFFFFF)
            vals[miss] = res
            cache.update(zip(uk[miss].tolist(), res.tolist()))
        return vals[inv.ravel()]

    # -- parsing -----------------------------------------------------------------
    def parse(self, p: bytes) -> ParsedPattern:
        """ESP of ``p`` with the text's names.

        A block is certified when every index consulted for its boundaries
        lies inside the string and holds a certified symbol; such a block is
        parsed the same way wherever ``p`` occurs, so it takes the text's
        name.  Other blocks are named through the overlay.
        """
        cur = np.frombuffer(bytes(p), dtype=np.uint8).astype(np.int64)
        m = len(cur)
        overlay = OverlayDictionary()
        lv = Level(cur, np.arange(m, dtype=np.int64), np.ones(m, dtype=np.int64),
                   np.ones(m, dtype=bool))
        out = ParsedPattern([lv], overlay)
        if m == 0:
            return out
        if not self._present[cur].all():
            out.absent = True
            return out
        lstar = self.lstar
        while len(cur) > 1 and lv.certified.any():
            n = len(cur)
            bl = parse_blocks(cur, lstar, lstar, track=True)
            bad = np.concatenate([[0], np.cumsum(~lv.certified)])
            inside = (bl.dep_lo >= 0) & (bl.dep_hi < n)
            lo = np.clip(bl.dep_lo, 0, n)
            hi = np.clip(bl.dep_hi + 1, 0, n)
            cert = inside & (bad[hi] == bad[lo])
            a, b, c = block_digrams(cur, bl)
            three = c >= 0
            names = np.empty(len(a), dtype=np.int64)
            s2 = np.flatnonzero(cert & ~three)
            s3 = np.flatnonzero(cert & three)
            if len(s2):
                names[s2] = self.lookup_many(a[s2], b[s2])
            if len(s3):
                bp = self.lookup_many(b[s3], c[s3])
                top = np.full(len(s3), -1, dtype=np.int64)
                ok = bp >= 0
                if ok.any():
                    top[ok] = self.lookup_many(a[s3][ok], bp[ok])
                names[s3] = top
            if (names[s2] < 0).any() or (names[s3] < 0).any():
                out.absent = True
                return out
            for i in np.flatnonzero(~cert).tolist():
                if three[i]:
                    names[i] = overlay.name(int(a[i]), overlay.name(int(b[i]), int(c[i])))
                else:
                    names[i] = overlay.name(int(a[i]), int(b[i]))
            last = bl.starts + bl.lengths - 1
            offs = lv.offsets[bl.starts]
            lens = lv.offsets[last] + lv.lengths[last] - offs
            cur = names
            lv = Level(cur, offs, lens, cert)
            out.levels.append(lv)
        return out

    def core(self, p: bytes):
        """Maximal-yield certified symbol of ``p`` (leftmost on ties) as a
        Piece, or None when the pattern cannot occur."""
        if len(p) == 0:
            return None
        parsed = self.parse(p)
        if parsed.absent:
            return None
        best = None
        for lv in parsed.levels:
            idx = np.flatnonzero(lv.certified)
            if not len(idx):
                continue
            i = int(idx[np.argmax(lv.lengths[idx])])
            if best is None or lv.lengths[i] > best.length:
                best = Piece(int(lv.symbols[i]), int(lv.offsets[i]), int(lv.lengths[i]))
        return best

    def fact(self, p: bytes):
        """Maximal certified nodes of the parse of ``p``, left to right;
        their yields concatenate to ``p``.  None when ``p`` cannot occur."""
        p = bytes(p)
        m = len(p)
        if m == 0:
            return CoreSequence()
        parsed = self.parse(p)
        if parsed.absent:
            return None
        covered = np.zeros(m + 1, dtype=bool)
        pieces = []
        for lv in reversed(parsed.levels):
            # nodes nest, so a node is covered iff its first position is
            take = np.flatnonzero(lv.certified & ~covered[lv.offsets])
            if not len(take):
                continue
            offs, lens = lv.offsets[take], lv.lengths[take]
            pieces.extend(Piece(int(x), int(o), int(n))
                          for x, o, n in zip(lv.symbols[take], offs, lens))
            mark = np.zeros(m + 1, dtype=np.int64)
            np.add.at(mark, offs, 1)
            np.add.at(mark, offs + lens, -1)
            covered |= np.cumsum(mark) > 0
        pieces.sort(key=lambda q: q.start)
        return CoreSequence(pieces)

    # -- occurrence enumeration ------------------------------------------------------
    def contexts(self, anchor: int, offset: int, m: int, keep=None):
        """Climb from ``anchor`` (which sits at ``offset`` inside the
        pattern window of length ``m``) until an ancestor covers the window.

        ``keep(sibling, side, lo, hi)`` may reject a step: ``sibling`` is the
        other child of the new parent, ``side`` says whether it lies LEFT or
        RIGHT of the current node, and ``[lo, hi)`` is the part of the
        window the sibling overlaps.

        Yields (ancestor, window start inside it, chain); ``chain`` links
        back to the anchor as nested tuples (symbol, direction, below).
        """
        todo = [(anchor, 0, None)]
        length = self._len
        while todo:
            c, q, chain = todo.pop()
            s = q - offset
            lc = length[c]
            if s >= 0 and s + m <= lc:
                yield c, s, (c, None, chain)
                continue
            lefts, rights = self.parents(c)
            link = (c, RIGHT, chain)
            for z in reversed(rights):
                sib = self.children(z)[0]
                ls = length[sib]
                # window start relative to the sibling's start
                w = s + ls
                if keep is not None and w < ls and not keep(sib, LEFT, max(-w, 0), ls - w):
                    continue
                todo.append((z, q + ls, link))
            link = (c, LEFT, chain)
            for z in reversed(lefts):
                sib = self.children(z)[1]
                # pattern offset where the sibling starts
                w = lc - s
                if keep is not None and w < m and not keep(sib, RIGHT, w, min(m, w + length[sib])):
                    continue
                todo.append((z, q, link))

    def _virtual_from_chain(self, top: int, chain) -> VirtualNode:
        path = [(top, None)]
        starts = [0]
        node = chain[2]
        while node is not None:
            sym, direction, below = node
            pos = starts[-1]
            if direction == RIGHT:
                pos += self.length(self.children(path[-1][0])[0])
            path.append((sym, direction))
            starts.append(pos)
            node = below
        return VirtualNode(self, path, starts)

    # -- verification ----------------------------------------------------------------
    def _embeds(self, v: VirtualNode, pieces, k: int) -> bool:
        """Fact 1 walk: from the anchor piece ``k`` at ``v``, find every
        following piece on the leftmost path right of the current node and
        every preceding piece on the rightmost path left of it."""
        cur = v
        for piece in pieces[k + 1:]:
            nxt = None
            for cand in cur.right_neighbor_candidates():
                if cand.symbol == piece.symbol:
                    nxt = cand
                    break
                if self.length(cand.symbol) < piece.length:
                    break
            if nxt is None:
                return False
            cur = nxt
        cur = v
        for piece in reversed(pieces[:k]):
            nxt = None
            for cand in cur.left_neighbor_candidates():
                if cand.symbol == piece.symbol:
                    nxt = cand
                    break
                if self.length(cand.symbol) < piece.length:
                    break
            if nxt is None:
                return False
            cur = nxt
        return True

    def _on_path(self, node: int, target: int, target_len: int, direction: int) -> bool:
        """Whether ``target`` lies on the leftmost (LEFT) or rightmost
        (RIGHT) path descending from ``node``."""
        length = self._len
        while True:
            if node == target:
                return True
            if node < TERMINALS or length[node] <= target_len:
                return False
            node = self.children(node)[direction]

    def count_adjacency(self, p: bytes) -> int:
        return self._run_adjacency(bytes(p), collect=False)

    def _run_adjacency(self, p: bytes, collect: bool):
        m = len(p)
        out = [] if collect else 0
        if m == 0 or m > self.idx.u:
            return out
        pieces = self.fact(p)
        if not pieces:
            return out
        k = min(range(len(pieces)), key=lambda i: (self.occ[pieces[i].symbol], i))
        anchor = pieces[k]
        by_start = {q.start: q for q in pieces}
        by_stop = {q.stop: q for q in pieces}
        length = self._len

        def keep(sib, side, lo, hi):
            # parse-tree nodes nest, so a piece must start (end) exactly where
            # the sibling does and then sit on the sibling's facing path
            piece = by_start.get(lo) if side == RIGHT else by_stop.get(hi)
            if piece is None:
                return False
            return self._on_path(sib, piece.symbol, length[piece.symbol], 1 - side)

        for top, s, chain in self.contexts(anchor.symbol, anchor.start, m, keep):
            v = self._virtual_from_chain(top, chain)
            if self._embeds(v, pieces, k):
                if collect:
                    out.append((top, s))
                else:
                    out += int(self.occ[top])
        return out

    def count_core_verify(self, p: bytes, prefix_rate: float = 0.01) -> int:
        return self._run_core_verify(bytes(p), prefix_rate, collect=False)

    def prefix_length(self, m: int, prefix_rate: float) -> int:
        return min(m, max(ceil(prefix_rate * m), 4 * (self.lstar + 5)))

    def _run_core_verify(self, p: bytes, prefix_rate: float, collect: bool):
        self.idx.require_lengths("core-verify search")
        m = len(p)
        out = [] if collect else 0
        if m == 0 or m > self.idx.u:
            return out
        if not self._present[np.frombuffer(p, dtype=np.uint8)].all():
            return out
        c = self.core(p[:self.prefix_length(m, prefix_rate)])
        if c is None:
            return out
        def keep(sib, side, lo, hi):
            # partial decoding of the part of the sibling under the window
            if side == RIGHT:
                return self.decode(sib, 0, hi - lo) == p[lo:hi]
            ls = self._len[sib]
            return self.decode(sib, ls - (hi - lo), ls) == p[lo:hi]

        for top, s, _ in self.contexts(c.symbol, c.start, m, keep):
            if self.decode(top, s, s + m) == p:
                if collect:
                    out.append((top, s))
                else:
                    out += int(self.occ[top])
        return out

    def count(self, p: bytes, strategy: str = "adjacency", prefix_rate: float = 0.01) -> int:
        if strategy == "adjacency":
            return self.count_adjacency(p)
        if strategy == "core-verify":
            return self.count_core_verify(p, prefix_rate)
        raise ValueError(f"unknown strategy {strategy!r}")

    # -- decoding and positions ----------------------------------------------------------
    EXPAND_CAP = 1 << 12

    def expand(self, x: int) -> bytes:
        """Full yield of ``x``; memoised for short yields."""
        got = self._expansion.get(x)
        if got is not None:
            return got
        if x < TERMINALS:
            got = bytes([x])
        else:
            left, right = self.children(x)
            got = self.expand(left) + self.expand(right)
        if len(got) <= self.EXPAND_CAP:
            self._expansion[x] = got
        return got

    def decode(self, x: int, lo: int, hi: int) -> bytes:
        """``expand(x)[lo:hi]`` touching only the covering subtrees."""
        parts = []
        stack = [(x, lo, hi)]
        length = self.length
        while stack:
            sym, a, b = stack.pop()
            if a >= b:
                continue
            n = length(sym)
            if a == 0 and b == n and n <= self.EXPAND_CAP:
                parts.append(self.expand(sym))
                continue
            left, right = self.children(sym)
            ll = length(left)
            # right part is pushed first so the left part is emitted first
            if b > ll:
                stack.append((right, max(a - ll, 0), b - ll))
            if a < ll:
                stack.append((left, a, min(b, ll)))
        out = b"".join(parts)
        self.decoded += len(out)
        return out

    def positions_of(self, x: int) -> np.ndarray:
        """Sorted start positions (0-based) of every parse-tree node ``x``."""
        got = self._positions.get(x)
        if got is not None:
            return got
        if x == self.idx.start:
            got = np.zeros(1, dtype=np.int64)
        else:
            lefts, rights = self.parents(x)
            chunks = [self.positions_of(z) for z in lefts]
            chunks += [self.positions_of(z) + self.length(self.children(z)[0]) for z in rights]
            got = np.sort(np.concatenate(chunks)) if chunks else np.zeros(0, dtype=np.int64)
        self._positions[x] = got
        return got

    def locate(self, p: bytes, strategy: str = "adjacency", prefix_rate: float = 0.01) -> np.ndarray:
        self.idx.require_lengths("locate")
        p = bytes(p)
        if strategy == "adjacency":
            hits = self._run_adjacency(p, collect=True)
        else:
            hits = self._run_core_verify(p, prefix_rate, collect=True)
        chunks = [self.positions_of(top) + s for top, s in hits]
        if not chunks:
            return np.zeros(0, dtype=np.int64)
        return np.sort(np.concatenate(chunks))

    def extract(self, i: int, j: int) -> bytes:
        """Text positions ``i..j``, 1-based and inclusive."""
        self.idx.require_lengths("extract")
        if not 1 <= i <= j <= self.idx.u:
            raise IndexError(f"range {i}..{j} outside 1..{self.idx.u}")
        return self.decode(self.idx.start, i - 1, j)


_SEARCHERS: "weakref.WeakKeyDictionary[EspIndex, Searcher]" = weakref.WeakKeyDictionary()


def searcher_for(idx: EspIndex) -> Searcher:
    s = _SEARCHERS.get(idx)
    if s is None:
        s = Searcher(idx)
        _SEARCHERS[idx] = s
    return s


def pattern_parse(p: bytes, idx: EspIndex) -> ParsedPattern:
    return searcher_for(idx).parse(p)


def core(p: bytes, idx: EspIndex):
    return searcher_for(idx).core(p)


def fact(p: bytes, idx: EspIndex):
    return searcher_for(idx).fact(p)


def count_adjacency(p: bytes, idx: EspIndex) -> int:
    return searcher_for(idx).count_adjacency(p)


def count_core_verify(p: bytes, idx: EspIndex, prefix_rate: float = 0.01) -> int:
    return searcher_for(idx).count_core_verify(p, prefix_rate)


def extract(idx: EspIndex, i: int, j: int) -> bytes:
    return searcher_for(idx).extract(i, j)


def locate(p: bytes, idx: EspIndex, strategy: str = "adjacency") -> np.ndarray:
    return searcher_for(idx).locate(p, strategy)


def naive_count(text: bytes, p: bytes) -> int:
    """Overlapping occurrence count by scanning."""
    if not p:
        return 0
    n = 0
    i = text.find(p)
    while i >= 0:
        n += 1
        i = text.find(p, i + 1)
    return n


def naive_positions(text: bytes, p: bytes) -> list[int]:
    out = []
    i = text.find(p) if p else -1
    while i >= 0:
        out.append(i)
        i = text.find(p, i + 1)
    return out
