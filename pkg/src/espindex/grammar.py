"""Straight-line program produced by ESP.

Variables are numbered ``256 + k``; ids below 256 are byte terminals.
Rules are emitted level by level and, within a level, in (left, right)
order.  Left sides always point to a lower level.  A right side may name
a rule of the same level (the helper ``B' -> bc`` of a three-symbol block),
whose own right side is again from a lower level.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .esp import TERMINALS


class GrammarError(ValueError):
    pass


@dataclass
class Dictionary:
    left: np.ndarray
    right: np.ndarray
    level: np.ndarray
    start: int
    u: int
    lstar: int
    rounds: int
    _lengths: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_vars(self) -> int:
        return len(self.left)

    @property
    def height(self) -> int:
        return int(self.level.max()) if len(self.level) else 0

    def is_terminal(self, x: int) -> bool:
        return x < TERMINALS

    def rule(self, x: int) -> tuple[int, int]:
        k = x - TERMINALS
        if not 0 <= k < self.n_vars:
            raise GrammarError(f"{x} is not a variable")
        return int(self.left[k]), int(self.right[k])

    def yield_lengths(self) -> np.ndarray:
        """Yield length for every id, terminals included."""
        if self._lengths is None:
            self._lengths = yield_lengths(self.left, self.right, self.level)
        return self._lengths

    def yield_length(self, x: int) -> int:
        return int(self.yield_lengths()[x])

    def cnf_height(self) -> int:
        """Height of the binary derivation tree of the start symbol."""
        h = _level_dp(self.left, self.right, self.level, np.zeros,
                      lambda a, b: 1 + np.maximum(a, b))
        return int(h[self.start]) if self.u > 1 else 0

    def expand(self, x: int | None = None) -> bytes:
        """Text derived by ``x`` (the start symbol by default)."""
        x = self.start if x is None else int(x)
        if x < TERMINALS:
            return bytes([x])
        cur = np.array([x], dtype=np.int64)
        while True:
            var = cur >= TERMINALS
            if not var.any():
                return cur.astype(np.uint8).tobytes()
            k = cur[var] - TERMINALS
            reps = np.where(var, 2, 1)
            out = np.empty(int(reps.sum()), dtype=np.int64)
            pos = np.cumsum(reps) - reps
            out[pos[~var]] = cur[~var]
            out[pos[var]] = self.left[k]
            out[pos[var] + 1] = self.right[k]
            cur = out

    def check(self) -> None:
        """Raise GrammarError unless the rules respect the level layout."""
        base = level_bases(self.level)
        if np.any(self.left >= base) or np.any(self.right >= TERMINALS + self.n_vars):
            raise GrammarError("rule refers to a later level")
        inner = self.right >= base
        k = self.right[inner] - TERMINALS
        if np.any(self.level[k] != self.level[inner]) or np.any(self.right[k] >= base[k]):
            raise GrammarError("bad same-level reference")
        if np.any(self.left < 0) or np.any(self.right < 0):
            raise GrammarError("negative id")
        pairs = set(zip(self.left.tolist(), self.right.tolist()))
        if len(pairs) != self.n_vars:
            raise GrammarError("duplicate right-hand side")


def _level_slices(level: np.ndarray):
    if not len(level):
        return []
    bounds = np.flatnonzero(np.diff(level)) + 1
    edges = np.concatenate([[0], bounds, [len(level)]])
    return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def level_bases(level: np.ndarray) -> np.ndarray:
    """Smallest id of each rule's level."""
    out = np.empty(len(level), dtype=np.int64)
    for lv in _level_slices(level):
        out[lv] = TERMINALS + lv.start
    return out


def _level_dp(left, right, level, init, combine):
    out = init(TERMINALS + len(left), dtype=np.int64)
    for lv in _level_slices(level):
        # rules whose right side sits on the same level go second
        k = np.arange(lv.start, lv.stop)
        late = right[k] >= TERMINALS + lv.start
        for part in (k[~late], k[late]):
            out[TERMINALS + part] = combine(out[left[part]], out[right[part]])
    return out


def yield_lengths(left, right, level) -> np.ndarray:
    return _level_dp(left, right, level, np.ones, np.add)


@dataclass
class NormalizedDag:
    """Grammar DAG with one super-sink.

    Node 0 is the sink, nodes ``1..len(terminals)`` the bytes that occur,
    then one node per variable.  ``left[v]`` and ``right[v]`` are the two
    out-edges of node ``v``; terminals point at the sink with both, the sink
    has none (-1).
    """
    terminals: np.ndarray
    node_of: np.ndarray  # symbol id -> node, -1 for unused bytes
    left: np.ndarray
    right: np.ndarray
    source: int

    @property
    def size(self) -> int:
        return len(self.left)


def normalize_dag(d: Dictionary) -> NormalizedDag:
    used = np.zeros(TERMINALS, dtype=bool)
    if d.n_vars:
        used[d.left[d.left < TERMINALS]] = True
        used[d.right[d.right < TERMINALS]] = True
    if d.start < TERMINALS:
        used[d.start] = True
    terms = np.flatnonzero(used)
    base = 1 + len(terms)
    node_of = np.full(TERMINALS + d.n_vars, -1, dtype=np.int64)
    node_of[terms] = np.arange(1, base)
    node_of[TERMINALS:] = base + np.arange(d.n_vars)
    size = base + d.n_vars
    left = np.zeros(size, dtype=np.int64)
    right = np.zeros(size, dtype=np.int64)
    left[0] = right[0] = -1
    left[base:] = node_of[d.left]
    right[base:] = node_of[d.right]
    return NormalizedDag(terms, node_of, left, right, int(node_of[d.start]))
