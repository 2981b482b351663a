"""Named causal graphs used throughout the tests and the CLI (0-based edges)."""

from __future__ import annotations

import math

from .graph import CausalGraph
from .spacetime import Diamond, Geometry, Point


def _g(n: int, edges, both=()) -> CausalGraph:
    es = list(edges) + [e for a, b in both for e in ((a, b), (b, a))]
    return CausalGraph.from_edges(n, es)


TWO_IN = _g(3, [(0, 1), (2, 1)])
TWO_OUT = _g(3, [(1, 0), (1, 2)])
IN_AND_OUT = _g(3, [(0, 1), (1, 2)])
THREE_CYCLE = _g(3, [(0, 1), (1, 2), (2, 0)])
# sources 2 and 4 each point at both sinks 1 and 3
TWO_SOURCES = _g(4, [(1, 0), (1, 2), (3, 2), (3, 0)])
# one bidirected pair and a third diamond out of contact with both
BIDIRECTED_TRIANGLE = _g(3, [], both=[(0, 1)])
PENTAGON = _g(5, [], both=[(i, (i + 1) % 5) for i in range(5)])
SQUARE = _g(4, [], both=[(0, 1), (1, 2), (2, 3), (3, 0)])
EDGELESS2 = _g(2, [])


def transitive(n: int) -> CausalGraph:
    """Transitive tournament with j -> k for every j < k."""
    return _g(n, [(j, k) for j in range(n) for k in range(j + 1, n)])


def near_transitive(n: int) -> CausalGraph:
    """Transitive tournament without the edge between its first two vertices."""
    return _g(n, [(j, k) for j in range(n) for k in range(j + 1, n) if (j, k) != (0, 1)])


def triangle_geometry(side: float = 2.0) -> Geometry:
    """Equilateral triangle of call points at t=0; each return point sits at an edge midpoint at
    t=side/2, so each call point reaches exactly the two returns on its own edges (lightlike)."""
    c = [(0.0, 0.0), (side, 0.0), (side / 2, side * math.sqrt(3) / 2)]

    def mid(a, b):
        return ((c[a][0] + c[b][0]) / 2, (c[a][1] + c[b][1]) / 2)

    rets = [mid(0, 2), mid(1, 0), mid(2, 1)]
    ds = tuple(Diamond(Point(0.0, c[j]), Point(side / 2, rets[j]), f"D{j + 1}") for j in range(3))
    return Geometry(2, ds)


NAMED: dict[str, CausalGraph] = {
    "two-in": TWO_IN,
    "two-out": TWO_OUT,
    "in-and-out": IN_AND_OUT,
    "three-cycle": THREE_CYCLE,
    "two-sources": TWO_SOURCES,
    "bidirected-triangle": BIDIRECTED_TRIANGLE,
    "pentagon": PENTAGON,
    "square": SQUARE,
}
