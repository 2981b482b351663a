"""Vectorized predicates over every labeled oriented graph on up to six vertices.

Graphs are rows of pair states (0 none, 1 i->j, 2 j->i) over ``graph.pairs(n)``.
The n=6 census has 3**15 rows, so predicates work chunk by chunk.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .graph import MAX_ENUM_N, GraphError, pairs

CHUNK = 3**11


def oriented_state_chunks(n: int, chunk: int = CHUNK) -> Iterator[np.ndarray]:
    if not 1 <= n <= MAX_ENUM_N:
        raise GraphError(f"census supports 1 <= n <= {MAX_ENUM_N}")
    m = len(pairs(n))
    total = 3**m
    for lo in range(0, total, chunk):
        idx = np.arange(lo, min(total, lo + chunk), dtype=np.int64)
        out = np.empty((idx.size, m), dtype=np.int8)
        # most significant digit first, matching itertools.product order
        for col in range(m - 1, -1, -1):
            out[:, col] = idx % 3
            idx //= 3
        yield out


def adjacency(states: np.ndarray, n: int) -> np.ndarray:
    adj = np.zeros((states.shape[0], n, n), dtype=np.int8)
    for col, (i, j) in enumerate(pairs(n)):
        adj[:, i, j] = states[:, col] == 1
        adj[:, j, i] = states[:, col] == 2
    return adj


def triple_flags(adj: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per graph: (every triple has an in-degree-2 vertex, every triple has one or is a 3-cycle)."""
    n = adj.shape[1]
    two_in = np.ones(adj.shape[0], dtype=bool)
    two_in_or_cycle = np.ones(adj.shape[0], dtype=bool)
    for a, b, c in itertools.combinations(range(n), 3):
        ia = adj[:, b, a] + adj[:, c, a]
        ib = adj[:, a, b] + adj[:, c, b]
        ic = adj[:, a, c] + adj[:, b, c]
        has = (ia == 2) | (ib == 2) | (ic == 2)
        cyc = (ia == 1) & (ib == 1) & (ic == 1) & ((ia + ib + ic) == 3)
        two_in &= has
        two_in_or_cycle &= has | cyc
    return two_in, two_in_or_cycle


def structural_form(states: np.ndarray, adj: np.ndarray) -> np.ndarray:
    """Transitive tournament, or one with the edge between its first two vertices removed.

    Uses score sequences: a tournament is transitive iff its out-degrees are
    pairwise distinct.
    """
    n = adj.shape[1]
    outdeg = adj.sum(axis=2)
    missing = (states == 0).sum(axis=1)
    distinct = np.ones(states.shape[0], dtype=bool)
    for a, b in itertools.combinations(range(n), 2):
        distinct &= outdeg[:, a] != outdeg[:, b]
    result = (missing == 0) & distinct
    for col, (u, v) in enumerate(pairs(n)):
        sel = (missing == 1) & (states[:, col] == 0)
        if not sel.any():
            continue
        ok = sel & (outdeg[:, u] == n - 2) & (outdeg[:, v] == n - 2)
        rest = [w for w in range(n) if w not in (u, v)]
        for a, b in itertools.combinations(rest, 2):
            ok &= outdeg[:, a] != outdeg[:, b]
        result |= ok
    return result


def non_adjacent_counts(states: np.ndarray) -> np.ndarray:
    return (states == 0).sum(axis=1)


def triple_rule_census(n: int) -> dict[str, int]:
    """Counts for the triple-rule characterizations over all oriented graphs on ``n`` vertices."""
    report = {"graphs": 0, "two_in": 0, "structural": 0, "equivalence_violations": 0,
              "label_condition": 0, "label_violations": 0, "unassisted_not_label": 0}
    for states in oriented_state_chunks(n):
        adj = adjacency(states, n)
        two_in, label_ok = triple_flags(adj)
        form = structural_form(states, adj)
        report["graphs"] += states.shape[0]
        report["two_in"] += int(two_in.sum())
        report["structural"] += int(form.sum())
        report["equivalence_violations"] += int((two_in != form).sum())
        report["label_condition"] += int(label_ok.sum())
        report["label_violations"] += int((label_ok & (non_adjacent_counts(states) > 1)).sum())
        report["unassisted_not_label"] += int((two_in & ~label_ok).sum())
    return report


def state_chunks(n: int, bidirected: bool = False, chunk: int = CHUNK) -> Iterator[np.ndarray]:
    """Pair-state rows in :func:`graph.enumerate_graphs` order (base 4 when bidirected)."""
    if not bidirected:
        yield from oriented_state_chunks(n, chunk)
        return
    if not 1 <= n <= MAX_ENUM_N:
        raise GraphError(f"census supports 1 <= n <= {MAX_ENUM_N}")
    m = len(pairs(n))
    total = 4**m
    for lo in range(0, total, chunk):
        idx = np.arange(lo, min(total, lo + chunk), dtype=np.int64)
        out = np.empty((idx.size, m), dtype=np.int8)
        for col in range(m - 1, -1, -1):
            out[:, col] = idx % 4
            idx //= 4
        yield out


@dataclass
class OrbitTable:
    """Isomorphism classes of every labeled graph, indexed by enumeration position.

    Labeled graph ``i`` equals ``reps[class_of[i]].relabel(perms[perm_of[i]])``.
    Each representative is the class member with the smallest index, which is
    also the graph :func:`graph.canonical` returns.
    """

    n: int
    bidirected: bool
    class_of: np.ndarray
    perm_of: np.ndarray
    reps: list[tuple[int, ...]]
    perms: np.ndarray


def orbit_table(n: int, bidirected: bool = False) -> OrbitTable:
    if not 1 <= n <= MAX_ENUM_N or (bidirected and n > 5):
        raise GraphError(f"orbit tables support n <= {MAX_ENUM_N} (5 with bidirected pairs)")
    base = 4 if bidirected else 3
    ps = pairs(n)
    col = {p: c for c, p in enumerate(ps)}
    m = len(ps)
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64).reshape(-1, n)
    src = np.zeros((len(perms), m), dtype=np.int64)
    flip = np.zeros((len(perms), m), dtype=bool)
    for r, perm in enumerate(perms):
        inv = np.argsort(perm)
        for c, (a, b) in enumerate(ps):
            x, y = int(inv[a]), int(inv[b])
            src[r, c] = col[(min(x, y), max(x, y))]
            flip[r, c] = x > y
    swap = np.array([0, 2, 1, 3], dtype=np.int64)
    weights = base ** np.arange(m - 1, -1, -1, dtype=np.int64)
    total = base**m
    class_of = np.full(total, -1, dtype=np.int32)
    perm_of = np.zeros(total, dtype=np.int16)
    reps: list[tuple[int, ...]] = []
    ptr, block = 0, 1 << 16
    while ptr < total:
        free = np.flatnonzero(class_of[ptr:ptr + block] < 0)
        if free.size == 0:
            ptr += block
            continue
        rep = ptr + int(free[0])
        digits = (rep // weights) % base
        moved = digits[src]
        moved = np.where(flip, swap[moved], moved)
        idx = moved @ weights
        class_of[idx] = len(reps)
        perm_of[idx] = np.arange(len(perms), dtype=np.int16)
        reps.append(tuple(int(d) for d in digits))
        ptr = rep
    return OrbitTable(n, bidirected, class_of, perm_of, reps, perms)
