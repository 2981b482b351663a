"""Causal graphs on diamonds.

Vertices are 0-based indices internally. Task files, reports and DOT output use
1-based labels.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

MAX_ENUM_N = 6


class GraphError(ValueError):
    pass


class TripleClass(str, enum.Enum):
    TWO_IN = "TwoIn"
    TWO_OUT = "TwoOut"
    THREE_CYCLE = "ThreeCycle"
    IN_AND_OUT = "InAndOut"
    HAS_TWO_IN_VERTEX = "HasTwoInVertex"
    SUBCRITICAL = "Subcritical"
    HAS_BIDIRECTED = "HasBidirected"


# pair state codes for the pair (i, j) with i < j
NONE, FWD, BWD, BOTH = 0, 1, 2, 3


@dataclass(frozen=True)
class CausalGraph:
    n: int
    adj: tuple[tuple[bool, ...], ...]
    start_in_past: bool = True
    start_precedes_all_returns: bool = True

    def __post_init__(self) -> None:
        if self.n < 1:
            raise GraphError("a causal graph needs at least one diamond")
        if len(self.adj) != self.n or any(len(row) != self.n for row in self.adj):
            raise GraphError("adjacency matrix must be n x n")
        if any(self.adj[j][j] for j in range(self.n)):
            raise GraphError("self loops are not allowed")
        if self.start_in_past and not self.start_precedes_all_returns:
            raise GraphError("a start point in the past of every call also precedes every return")

    @classmethod
    def from_matrix(cls, adj: Sequence[Sequence[bool]], **flags: bool) -> "CausalGraph":
        return cls(len(adj), tuple(tuple(bool(v) for v in row) for row in adj), **flags)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], **flags: bool) -> "CausalGraph":
        """Build from 0-based directed edges ``(j, k)`` meaning j -> k."""
        m = [[False] * n for _ in range(n)]
        for j, k in edges:
            if not (0 <= j < n and 0 <= k < n):
                raise GraphError(f"edge {(j, k)} out of range for n={n}")
            if j == k:
                raise GraphError(f"self loop on vertex {j}")
            m[j][k] = True
        return cls.from_matrix(m, **flags)

    @classmethod
    def from_pair_states(cls, n: int, states: Sequence[int], **flags: bool) -> "CausalGraph":
        m = [[False] * n for _ in range(n)]
        for (i, j), s in zip(pairs(n), states):
            m[i][j] = bool(s & FWD)
            m[j][i] = bool(s & BWD)
        return cls.from_matrix(m, **flags)

    def edges(self) -> list[tuple[int, int]]:
        return [(j, k) for j in range(self.n) for k in range(self.n) if self.adj[j][k]]

    def pair_states(self) -> tuple[int, ...]:
        return tuple(FWD * self.adj[i][j] + BWD * self.adj[j][i] for i, j in pairs(self.n))

    def with_flags(self, **flags: bool) -> "CausalGraph":
        return CausalGraph(
            self.n,
            self.adj,
            flags.get("start_in_past", self.start_in_past),
            flags.get("start_precedes_all_returns", self.start_precedes_all_returns),
        )

    def relabel(self, perm: Sequence[int]) -> "CausalGraph":
        """Graph whose vertex ``perm[v]`` plays the role of vertex ``v`` here."""
        m = [[False] * self.n for _ in range(self.n)]
        for j, k in self.edges():
            m[perm[j]][perm[k]] = True
        return CausalGraph.from_matrix(
            m, start_in_past=self.start_in_past, start_precedes_all_returns=self.start_precedes_all_returns
        )

    def __str__(self) -> str:
        parts = []
        for i, j in pairs(self.n):
            a, b = self.adj[i][j], self.adj[j][i]
            if a and b:
                parts.append(f"{i + 1}<->{j + 1}")
            elif a:
                parts.append(f"{i + 1}->{j + 1}")
            elif b:
                parts.append(f"{j + 1}->{i + 1}")
        return f"n={self.n} [" + ", ".join(parts) + "]"


def pairs(n: int) -> list[tuple[int, int]]:
    return list(itertools.combinations(range(n), 2))


def _check_pair(g: CausalGraph, j: int, k: int) -> None:
    if not (0 <= j < g.n and 0 <= k < g.n):
        raise GraphError(f"vertex out of range: {(j, k)} with n={g.n}")
    if j == k:
        raise GraphError("relations are defined for distinct diamonds only")


def arrow(g: CausalGraph, j: int, k: int) -> bool:
    _check_pair(g, j, k)
    return g.adj[j][k]


def connected(g: CausalGraph, j: int, k: int) -> bool:
    _check_pair(g, j, k)
    return g.adj[j][k] or g.adj[k][j]


def bidirected(g: CausalGraph, j: int, k: int) -> bool:
    _check_pair(g, j, k)
    return g.adj[j][k] and g.adj[k][j]


def _vertices(g: CausalGraph, subset: Iterable[int] | None) -> list[int]:
    vs = list(range(g.n)) if subset is None else sorted(set(subset))
    for v in vs:
        if not 0 <= v < g.n:
            raise GraphError(f"vertex {v} out of range")
    return vs


def is_oriented(g: CausalGraph, subset: Iterable[int] | None = None) -> bool:
    vs = _vertices(g, subset)
    return not any(g.adj[a][b] and g.adj[b][a] for a, b in itertools.combinations(vs, 2))


def all_connected(g: CausalGraph, subset: Iterable[int] | None = None) -> bool:
    vs = _vertices(g, subset)
    return all(g.adj[a][b] or g.adj[b][a] for a, b in itertools.combinations(vs, 2))


def is_tournament(g: CausalGraph, subset: Iterable[int] | None = None) -> bool:
    return is_oriented(g, subset) and all_connected(g, subset)


def non_adjacent_pairs(g: CausalGraph, subset: Iterable[int] | None = None) -> list[tuple[int, int]]:
    vs = _vertices(g, subset)
    return [(a, b) for a, b in itertools.combinations(vs, 2) if not (g.adj[a][b] or g.adj[b][a])]


def bidirected_pairs(g: CausalGraph) -> list[tuple[int, int]]:
    return [(a, b) for a, b in pairs(g.n) if g.adj[a][b] and g.adj[b][a]]


def topological_order(g: CausalGraph, subset: Iterable[int] | None = None) -> list[int] | None:
    """Kahn's algorithm on the induced subgraph, smallest index first.

    :returns: an ordering consistent with every edge, or ``None`` if the
        induced subgraph has a directed cycle (a bidirected pair counts as one).
    """
    vs = _vertices(g, subset)
    indeg = {v: sum(g.adj[u][v] for u in vs if u != v) for v in vs}
    ready = sorted(v for v in vs if indeg[v] == 0)
    order: list[int] = []
    while ready:
        v = ready.pop(0)
        order.append(v)
        for w in vs:
            if w != v and g.adj[v][w]:
                indeg[w] -= 1
                if indeg[w] == 0:
                    ready.append(w)
                    ready.sort()
    return order if len(order) == len(vs) else None


def chain_order(g: CausalGraph, subset: Iterable[int] | None = None) -> list[int] | None:
    """An order with an arrow from every vertex to every later one, if one exists.

    This is the order of a spanning transitive tournament. Bidirected pairs may
    be used in either direction. Greedy choice of a vertex that points to all
    remaining ones is exact: such a vertex can always start the order.
    """
    rest = _vertices(g, subset)
    order: list[int] = []
    while rest:
        head = next((v for v in rest if all(g.adj[v][w] for w in rest if w != v)), None)
        if head is None:
            return None
        order.append(head)
        rest.remove(head)
    return order


def in_degree_within(g: CausalGraph, v: int, among: Iterable[int]) -> int:
    return sum(g.adj[u][v] for u in among if u != v)


def classify_triple(g: CausalGraph, triple: Iterable[int]) -> TripleClass:
    vs = _vertices(g, triple)
    if len(vs) != 3:
        raise GraphError("classify_triple needs three distinct vertices")
    if not is_oriented(g, vs):
        return TripleClass.HAS_BIDIRECTED
    arcs = [(u, w) for u in vs for w in vs if u != w and g.adj[u][w]]
    if len(arcs) == 3:
        indeg = [in_degree_within(g, v, vs) for v in vs]
        return TripleClass.THREE_CYCLE if indeg == [1, 1, 1] else TripleClass.HAS_TWO_IN_VERTEX
    if len(arcs) == 2:
        (u1, w1), (u2, w2) = arcs
        if w1 == w2:
            return TripleClass.TWO_IN
        if u1 == u2:
            return TripleClass.TWO_OUT
        return TripleClass.IN_AND_OUT
    return TripleClass.SUBCRITICAL


UNASSISTED_OK = frozenset({TripleClass.TWO_IN, TripleClass.HAS_TWO_IN_VERTEX})
LABEL_OK = UNASSISTED_OK | {TripleClass.THREE_CYCLE}


def first_bad_triple(g: CausalGraph, allowed: frozenset[TripleClass]) -> tuple[tuple[int, int, int], TripleClass] | None:
    for t in itertools.combinations(range(g.n), 3):
        cls = classify_triple(g, t)
        if cls not in allowed:
            return t, cls
    return None


def s_set(g: CausalGraph, j: int) -> list[int]:
    """Diamonds other than ``j`` with no edge into ``j``."""
    if not 0 <= j < g.n:
        raise GraphError(f"vertex {j} out of range")
    return [i for i in range(g.n) if i != j and not g.adj[i][j]]


def x_partition(g: CausalGraph) -> list[tuple[int, int]] | None:
    """Pair up the diamonds that have a non-adjacent partner.

    Returns ``None`` when some diamond is non-adjacent to two or more others.
    """
    partner: dict[int, list[int]] = {}
    for a, b in non_adjacent_pairs(g):
        partner.setdefault(a, []).append(b)
        partner.setdefault(b, []).append(a)
    if any(len(p) != 1 for p in partner.values()):
        return None
    return sorted({tuple(sorted((v, p[0]))) for v, p in partner.items()})


def near_transitive_split(g: CausalGraph) -> tuple[tuple[int, int], list[int]] | None:
    """Detect a transitive tournament with the edge between its first two vertices removed.

    :returns: ``((d0, d0p), rest_order)`` with ``d0 < d0p`` the non-adjacent
        pair and ``rest_order`` the chain order of the remaining vertices.
    """
    if not is_oriented(g):
        return None
    missing = non_adjacent_pairs(g)
    if len(missing) != 1:
        return None
    u, v = missing[0]
    rest = [w for w in range(g.n) if w not in (u, v)]
    if not all(g.adj[u][w] and g.adj[v][w] for w in rest):
        return None
    order = chain_order(g, rest)
    if order is None:
        return None
    return (u, v), order


def rival_split(g: CausalGraph) -> tuple[int, int, list[int]] | None:
    """(D_0, D_0', rest) for a graph whose only non-adjacent pair points into a tournament (possibly empty)."""
    if not is_oriented(g):
        return None
    missing = non_adjacent_pairs(g)
    if len(missing) != 1:
        return None
    d0, d0p = missing[0]
    rest = [w for w in range(g.n) if w not in (d0, d0p)]
    if not all(g.adj[d0][w] and g.adj[d0p][w] for w in rest) or not is_tournament(g, rest):
        return None
    return d0, d0p, rest


def unassisted_structure(g: CausalGraph) -> tuple[str, object] | None:
    """Structural form of oriented graphs satisfying the in-degree-2 triple rule.

    ``("transitive", order)`` or ``("near", ((d0, d0p), rest_order))``.
    """
    if not is_oriented(g):
        return None
    if is_tournament(g):
        order = chain_order(g)
        return ("transitive", order) if order is not None else None
    split = near_transitive_split(g)
    return ("near", split) if split is not None else None


def induced(g: CausalGraph, subset: Sequence[int]) -> CausalGraph:
    vs = list(subset)
    return CausalGraph.from_matrix([[g.adj[a][b] for b in vs] for a in vs])


def encode(g: CausalGraph) -> int:
    code = 0
    for s in g.pair_states():
        code = code * 4 + s
    return code


def canonical(g: CausalGraph) -> CausalGraph:
    """Representative with the minimum pair-state encoding over all relabelings."""
    best = None
    for perm in itertools.permutations(range(g.n)):
        h = g.relabel(perm)
        code = encode(h)
        if best is None or code < best[0]:
            best = (code, h)
    assert best is not None
    return best[1]


def enumerate_graphs(n: int, allow_bidirected: bool = False, canonical_only: bool = False) -> Iterator[CausalGraph]:
    """All labeled graphs on ``n`` vertices (3 or 4 states per pair)."""
    if not 1 <= n <= MAX_ENUM_N:
        raise GraphError(f"enumeration supports 1 <= n <= {MAX_ENUM_N}, got {n}")
    states = (NONE, FWD, BWD, BOTH) if allow_bidirected else (NONE, FWD, BWD)
    seen: set[int] = set()
    for combo in itertools.product(states, repeat=len(pairs(n))):
        g = CausalGraph.from_pair_states(n, combo)
        if canonical_only:
            code = encode(canonical(g))
            if code in seen:
                continue
            seen.add(code)
        yield g


def embeddings(g: CausalGraph, pattern: CausalGraph) -> Iterator[tuple[int, ...]]:
    """Vertex maps placing ``pattern`` as a spanning subgraph of ``g``.

    Yields tuples ``m`` with ``m[v]`` the vertex of ``g`` playing pattern vertex ``v``.
    """
    if g.n != pattern.n:
        return
    pe = pattern.edges()
    for perm in itertools.permutations(range(g.n)):
        if all(g.adj[perm[a]][perm[b]] for a, b in pe):
            yield perm


def to_dot(g: CausalGraph, name: str = "causal") -> str:
    lines = [f"digraph {name} {{"]
    lines += [f'  D{v + 1} [label="D{v + 1}"];' for v in range(g.n)]
    for i, j in pairs(g.n):
        a, b = g.adj[i][j], g.adj[j][i]
        if a and b:
            lines.append(f"  D{i + 1} -> D{j + 1} [dir=both];")
        elif a:
            lines.append(f"  D{i + 1} -> D{j + 1};")
        elif b:
            lines.append(f"  D{j + 1} -> D{i + 1};")
    lines.append("}")
    return "\n".join(lines) + "\n"
