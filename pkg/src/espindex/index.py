"""Succinct self-index over an ESP grammar.

The grammar DAG plus a super-sink (reached from every terminal by both a
left and a right edge) splits into two spanning trees: T_L keeps the left
edge of every node and T_R the right edge.  Both are stored as LOUDS, and a
permutation maps the T_L number of a node to its T_R number.

Node numbers in T_L: 0 is the super-sink, ``1..sigma_used`` the terminals in
byte order, then the variables in id order.  Because the grammar numbers
rules level by level in (left, right) order, this is exactly the level order
of T_L with siblings sorted by their right child.
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .esp import TERMINALS
from .grammar import Dictionary, _level_slices, normalize_dag, yield_lengths
from .succinct import (
    BitVector,
    LoudsTree,
    PermutationIndex,
    pack_ints,
    packed_words,
    unpack_ints,
    width_for,
)

MAGIC = b"ESPI"
VERSION = 1
FLAG_LENGTHS = 1


class IndexFormatError(ValueError):
    pass


class UnsupportedOperation(RuntimeError):
    pass


# CRC-64/XZ (ECMA-182 polynomial, reflected)
_CRC_POLY = 0xC96C5795D7870F42


def _crc_table():
    table = []
    for i in range(256):
        c = i
        for _ in range(8):
            c = (c >> 1) ^ _CRC_POLY if c & 1 else c >> 1
        table.append(c)
    return table


_CRC_TABLE = _crc_table()


def crc64(data: bytes, crc: int = 0) -> int:
    table = _CRC_TABLE
    crc ^= 0xFFFFFFFFFFFFFFFF
    for b in data:
        crc = table[(crc ^ b) & 0xFF] ^ (crc >> 8)
    return crc ^ 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class Header:
    sigma_used: int
    n: int  # variables
    u: int
    start: int
    eps: Fraction
    lstar: int
    flags: int

    @property
    def nodes(self) -> int:
        return self.n + self.sigma_used + 1


class EspIndex:
    """Immutable index; public methods take and return grammar symbol ids
    (bytes 0..255, variables 256+)."""

    def __init__(self, header: Header, terminals: np.ndarray, tl: LoudsTree, tr: LoudsTree,
                 perm: PermutationIndex, lengths: np.ndarray | None = None):
        self.header = header
        self.terminals = np.asarray(terminals, dtype=np.int64)
        self.tl = tl
        self.tr = tr
        self.perm = perm
        self.stored_lengths = lengths
        if len(tl) != len(tr) or len(tl) != header.nodes or len(perm) != header.nodes:
            raise IndexFormatError("tree and permutation sizes disagree")
        self._term_node = np.full(TERMINALS, -1, dtype=np.int64)
        self._term_node[self.terminals] = np.arange(1, len(self.terminals) + 1)
        self._var_base = 1 + header.sigma_used
        self._tl_list = None

    # -- id mapping -------------------------------------------------------
    @property
    def u(self) -> int:
        return self.header.u

    @property
    def lstar(self) -> int:
        return self.header.lstar

    @property
    def start(self) -> int:
        return self.header.start

    @property
    def has_lengths(self) -> bool:
        return bool(self.header.flags & FLAG_LENGTHS)

    def node(self, x: int) -> int | None:
        """T_L node of symbol ``x``; None for bytes missing from the text."""
        if x < TERMINALS:
            v = int(self._term_node[x]) if x >= 0 else -1
            return v if v > 0 else None
        k = x - TERMINALS
        if k >= self.header.n:
            return None
        return self._var_base + k

    def symbol(self, v: int) -> int:
        if v >= self._var_base:
            return TERMINALS + v - self._var_base
        if v <= 0:
            raise ValueError("the super-sink has no symbol")
        return int(self.terminals[v - 1])

    def nodes_of(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.int64)
        term = xs < TERMINALS
        out = np.where(term, -1, self._var_base + xs - TERMINALS)
        out[term] = self._term_node[xs[term]]
        out[~term & (xs - TERMINALS >= self.header.n)] = -1
        return out

    def symbols_of(self, vs) -> np.ndarray:
        vs = np.asarray(vs, dtype=np.int64)
        term = vs < self._var_base
        out = TERMINALS + vs - self._var_base
        out[term] = self.terminals[np.maximum(vs[term] - 1, 0)]
        return out

    def is_variable(self, x: int) -> bool:
        return TERMINALS <= x < TERMINALS + self.header.n

    # -- navigation ---------------------------------------------------------
    def _right_node(self, v: int) -> int:
        return self.perm.inverse(self.tr.parent(self.perm.apply(v)))

    def left_child(self, x: int):
        if not self.is_variable(x):
            return None
        return self.symbol(self.tl.parent(self.node(x)))

    def right_child(self, x: int):
        if not self.is_variable(x):
            return None
        return self.symbol(self._right_node(self.node(x)))

    def children(self, x: int):
        return self.left_child(x), self.right_child(x)

    def occurrences_as_left(self, x: int) -> list[int]:
        v = self.node(x)
        if v is None:
            return []
        kids = self.tl.children_range(v)
        return [TERMINALS + c - self._var_base for c in kids]

    def occurrences_as_right(self, x: int) -> list[int]:
        v = self.node(x)
        if v is None:
            return []
        kids = self.tr.children_range(self.perm.apply(v))
        inv = self.perm.inverse
        return [TERMINALS + inv(c) - self._var_base for c in kids]

    def reverse_lookup(self, x: int, y: int):
        """The variable ``Z`` with ``Z -> x y``, or None."""
        vx = self.node(x)
        vy = self.node(y)
        if vx is None or vy is None:
            return None
        kids = self.tl.children_range(vx)
        lo, hi = kids.start, kids.stop
        while lo < hi:
            mid = (lo + hi) // 2
            key = self._right_node(mid)
            if key == vy:
                return TERMINALS + mid - self._var_base
            if key < vy:
                lo = mid + 1
            else:
                hi = mid
        return None

    def right_nodes_many(self, vs) -> np.ndarray:
        vs = np.asarray(vs, dtype=np.int64)
        inv, _ = self.perm.inverse_many(self.tr.parent_many(self.perm.forward[vs]))
        return inv

    def reverse_lookup_many(self, xs, ys) -> np.ndarray:
        """Vectorised ``reverse_lookup``; -1 where no rule exists."""
        vx = self.nodes_of(xs)
        vy = self.nodes_of(ys)
        out = np.full(len(vx), -1, dtype=np.int64)
        ok = (vx >= 0) & (vy >= 0)
        idx = np.flatnonzero(ok)
        if not len(idx):
            return out
        lo, hi = self.tl.children_bounds(vx[idx])
        target = vy[idx]
        while True:
            live = lo < hi
            if not live.any():
                break
            li = np.flatnonzero(live)
            mid = (lo[li] + hi[li]) // 2
            key = self.right_nodes_many(mid)
            found = key == target[li]
            out[idx[li[found]]] = TERMINALS + mid[found] - self._var_base
            lo[li[found]] = hi[li[found]]
            less = ~found & (key < target[li])
            lo[li[less]] = mid[less] + 1
            more = ~found & ~less
            hi[li[more]] = mid[more]
        return out

    def children_many(self, xs) -> tuple[np.ndarray, np.ndarray]:
        """Left and right children (symbol ids) of variables ``xs``."""
        vs = self.nodes_of(xs)
        left = self.symbols_of(self.tl.parent_many(vs))
        right = self.symbols_of(self.right_nodes_many(vs))
        return left, right

    # -- derived tables -------------------------------------------------------
    @cached_property
    def levels(self) -> np.ndarray:
        """ESP level of every variable (its depth in T_L minus one)."""
        depth = np.zeros(self.header.nodes, dtype=np.int64)
        a, b, d = 0, 1, 0
        while a < b:
            depth[a:b] = d
            first, _ = self.tl.children_bounds([a])
            _, last = self.tl.children_bounds([b - 1])
            a, b = int(first[0]), int(last[0])
            d += 1
        return (depth[self._var_base:] - 1).astype(np.int32)

    def to_dictionary(self) -> Dictionary:
        """Decode every rule in bulk."""
        ids = TERMINALS + np.arange(self.header.n, dtype=np.int64)
        left, right = self.children_many(ids)
        return Dictionary(left=left, right=right, level=self.levels, start=self.start,
                          u=self.u, lstar=self.lstar, rounds=self.lstar)

    @cached_property
    def _rules(self):
        d = self.to_dictionary()
        return d.left, d.right

    @cached_property
    def yield_lengths(self) -> np.ndarray:
        """Yield length per symbol id (terminals included)."""
        if self.stored_lengths is not None:
            out = np.ones(TERMINALS + self.header.n, dtype=np.int64)
            out[TERMINALS:] = self.stored_lengths
            return out
        left, right = self._rules
        return yield_lengths(left, right, self.levels)

    @cached_property
    def occ(self) -> np.ndarray:
        """Number of parse-tree nodes carrying each symbol id."""
        left, right = self._rules
        level = self.levels
        out = np.zeros(TERMINALS + self.header.n, dtype=np.int64)
        out[self.start] = 1
        base = TERMINALS
        for lv in reversed(_level_slices(level)):
            k = np.arange(lv.start, lv.stop)
            same = right[k] >= base + lv.start
            # rules pointing at a same-level helper pass their count on first
            for part in (k[same], k[~same]):
                w = out[base + part]
                np.add.at(out, left[part], w)
                np.add.at(out, right[part], w)
        return out

    def yield_length(self, x: int) -> int:
        return int(self.yield_lengths[x])

    def require_lengths(self, what: str):
        if not self.has_lengths:
            raise UnsupportedOperation(f"{what} needs an index built with yield lengths")

    # -- space ------------------------------------------------------------------
    def space(self) -> dict:
        """Bit accounting of the stored structures."""
        p = self.perm.space_bits()
        rows = {
            "louds_L": self.tl.bit_length(),
            "louds_R": self.tr.bit_length(),
            "louds_L_directories": self.tl.bits.directory_bits(),
            "louds_R_directories": self.tr.bits.directory_bits(),
            "perm_entries": p["forward"],
            "perm_shortcut_flags": p["shortcut_flags"],
            "perm_shortcut_targets": p["shortcut_targets"],
            "perm_directories": p["directories"],
        }
        rows["core_bits"] = sum(rows.values())
        rows["lengths_bits"] = 0 if self.stored_lengths is None else \
            len(self.stored_lengths) * width_for(int(self.stored_lengths.max(initial=0)))
        return rows

    def bound_terms(self) -> dict:
        """Terms of the space bound ``(1+eps) N log N + 4N + o(N)``, for the
        full node count and for the variables alone."""
        out = {}
        eps = self.header.eps
        for tag, count in (("nodes", self.header.nodes), ("vars", self.header.n)):
            lg = width_for(max(count - 1, 1))
            out[f"{tag}.count"] = count
            out[f"{tag}.log2"] = lg
            out[f"{tag}.perm_term"] = float((1 + eps) * count * lg)
            out[f"{tag}.louds_term"] = 4 * count
            out[f"{tag}.bound"] = float((1 + eps) * count * lg + 4 * count)
        space = self.space()
        out["o_n_term"] = (space["louds_L_directories"] + space["louds_R_directories"]
                           + space["perm_directories"])
        out["core_bits"] = space["core_bits"]
        out["ratio_nodes"] = space["core_bits"] / out["nodes.bound"]
        return out

    # -- serialization ------------------------------------------------------------
    def _sections(self) -> list[tuple[str, bytes]]:
        h = self.header
        head = MAGIC + struct.pack("<HHIQQQIIB", VERSION, h.flags, h.sigma_used, h.n, h.u, h.start,
                                   h.eps.numerator, h.eps.denominator, h.lstar)
        out = [("header", head), ("terminals", self.terminals.astype(np.uint8).tobytes())]
        for name, tree in (("louds_L", self.tl), ("louds_R", self.tr)):
            buf = io.BytesIO()
            _write_bits(buf, tree.bits)
            out.append((name, buf.getvalue()))
        p = self.perm
        buf = io.BytesIO()
        buf.write(struct.pack("<B", p.width))
        buf.write(pack_ints(p.forward, p.width).astype("<u8").tobytes())
        _write_bits(buf, p.flags)
        buf.write(struct.pack("<Q", len(p.back)))
        buf.write(pack_ints(p.back, p.width).astype("<u8").tobytes())
        out.append(("perm", buf.getvalue()))
        if h.flags & FLAG_LENGTHS:
            lens = self.stored_lengths
            w = width_for(int(lens.max(initial=0)))
            out.append(("lengths", struct.pack("<B", w) + pack_ints(lens, w).astype("<u8").tobytes()))
        return out

    def section_sizes(self) -> dict:
        """Bytes per file section; they add up to the file size."""
        sizes = {name: len(data) for name, data in self._sections()}
        sizes["trailer"] = 8
        return sizes

    def to_bytes(self) -> bytes:
        body = b"".join(data for _, data in self._sections())
        return body + struct.pack("<Q", crc64(body))

    @classmethod
    def from_bytes(cls, data: bytes) -> "EspIndex":
        if len(data) < 12 or data[:4] != MAGIC:
            raise IndexFormatError("bad magic")
        body, trailer = data[:-8], data[-8:]
        version = struct.unpack_from("<H", data, 4)[0]
        if version != VERSION:
            raise IndexFormatError(f"unsupported version {version}")
        if crc64(body) != struct.unpack("<Q", trailer)[0]:
            raise IndexFormatError("checksum mismatch")
        r = _Reader(body, 4)
        (version, flags, sigma, n, u, start, num, den, lstar) = r.unpack("<HHIQQQIIB")
        if den == 0:
            raise IndexFormatError("bad epsilon")
        terminals = np.frombuffer(r.take(sigma), dtype=np.uint8).astype(np.int64)
        tl = LoudsTree(_read_bits(r))
        tr = LoudsTree(_read_bits(r))
        nodes = n + sigma + 1
        (width,) = r.unpack("<B")
        fwd = unpack_ints(r.words(packed_words(nodes, width)), width, nodes)
        flag_bits = _read_bits(r)
        (nback,) = r.unpack("<Q")
        back = unpack_ints(r.words(packed_words(nback, width)), width, nback)
        perm = PermutationIndex(fwd, Fraction(num, den), _shortcuts=(flag_bits, back))
        lengths = None
        if flags & FLAG_LENGTHS:
            (w,) = r.unpack("<B")
            lengths = unpack_ints(r.words(packed_words(n, w)), w, n)
        if r.pos != len(body):
            raise IndexFormatError("trailing bytes")
        header = Header(sigma, n, u, start, Fraction(num, den), lstar, flags)
        return cls(header, terminals, tl, tr, perm, lengths)

    def save(self, path) -> int:
        data = self.to_bytes()
        with open(path, "wb") as f:
            f.write(data)
        return len(data)

    @classmethod
    def load(cls, path) -> "EspIndex":
        with open(path, "rb") as f:
            return cls.from_bytes(f.read())


class _Reader:
    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def take(self, k: int) -> bytes:
        if self.pos + k > len(self.data):
            raise IndexFormatError("truncated index")
        out = self.data[self.pos:self.pos + k]
        self.pos += k
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def words(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<u8").astype(np.uint64)


def _write_bits(buf, bv: BitVector):
    buf.write(struct.pack("<Q", bv.length))
    buf.write(bv.words.astype("<u8").tobytes())


def _read_bits(r: _Reader) -> BitVector:
    (length,) = r.unpack("<Q")
    return BitVector(words=r.words(packed_words(length, 1)), length=length)


def build_index(d: Dictionary, eps=Fraction(1, 4), lengths: bool = True) -> EspIndex:
    """Split the grammar DAG into T_L and T_R and bind them."""
    eps = Fraction(eps)
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    n = d.n_vars
    dag = normalize_dag(d)
    terms = dag.terminals
    sigma = len(terms)
    base = 1 + sigma
    nodes = dag.size

    # T_L: parent of a variable is its left child
    pl = np.empty(nodes, dtype=np.int64)
    pl[0] = -1
    pl[1:base] = 0
    pl[base:] = dag.left[base:]
    if np.any(np.diff(pl[1:]) < 0):
        raise ValueError("variable numbering is not the level order of T_L")
    right_nodes = dag.right[base:]
    same_left = np.diff(pl[base:]) == 0
    if np.any(np.diff(right_nodes)[same_left] <= 0):
        raise ValueError("siblings in T_L are not sorted by right child")
    tl = LoudsTree.from_parents(pl)

    # T_R: parent of a variable is its right child
    pr = np.zeros(nodes, dtype=np.int64)
    pr[0] = -1
    pr[base:] = right_nodes
    depth = np.zeros(nodes, dtype=np.int64)
    depth[1:base] = 1
    for lv in _level_slices(d.level):
        k = np.arange(lv.start, lv.stop)
        late = d.right[k] >= TERMINALS + lv.start
        for part in (k[~late], k[late]):
            depth[base + part] = depth[right_nodes[part]] + 1
    rank = np.full(nodes, -1, dtype=np.int64)
    rank[0] = 0
    next_rank = 1
    order_by_depth = np.argsort(depth, kind="stable")
    bounds = np.searchsorted(depth[order_by_depth], np.arange(depth.max() + 2))
    for dd in range(1, int(depth.max()) + 1):
        group = order_by_depth[bounds[dd]:bounds[dd + 1]]
        group = group[np.lexsort((group, rank[pr[group]]))]
        rank[group] = next_rank + np.arange(len(group))
        next_rank += len(group)
    tr_parents = np.empty(nodes, dtype=np.int64)
    tr_parents[rank] = np.where(pr >= 0, rank[np.maximum(pr, 0)], -1)
    tr = LoudsTree.from_parents(tr_parents)
    perm = PermutationIndex(rank, eps)

    flags = 0
    stored = None
    if lengths:
        flags |= FLAG_LENGTHS
        stored = d.yield_lengths()[TERMINALS:].copy()
    start = int(d.start)
    header = Header(sigma, n, d.u, start, eps, d.lstar, flags)
    return EspIndex(header, terms, tl, tr, perm, stored)
