"""Flat Minkowski points and the causal order between them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

SLACK = 1e-9


class GeometryError(ValueError):
    """Raised for malformed coordinates or diamonds whose call does not precede the return."""


@dataclass(frozen=True)
class Point:
    t: float
    x: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "t", float(self.t))
        if len(self.x) < 1:
            raise GeometryError("a point needs at least one spatial coordinate")
        if not all(math.isfinite(v) for v in (self.t, *self.x)):
            raise GeometryError(f"non-finite coordinate in {self!r}")

    @classmethod
    def of(cls, coords: Sequence[float]) -> "Point":
        """Build from a flat ``[t, x1, x2, ...]`` list."""
        if len(coords) < 2:
            raise GeometryError(f"expected [t, x...], got {list(coords)!r}")
        return cls(coords[0], tuple(coords[1:]))

    def as_list(self) -> list[float]:
        return [self.t, *self.x]


@dataclass(frozen=True)
class Diamond:
    call: Point
    ret: Point
    id: str = ""


@dataclass(frozen=True)
class Geometry:
    spatial_dims: int
    diamonds: tuple[Diamond, ...]
    speed: float = 1.0
    start: Point | None = None

    def __post_init__(self) -> None:
        if self.spatial_dims < 1:
            raise GeometryError("spatial_dims must be positive")
        if not (self.speed > 0 and math.isfinite(self.speed)):
            raise GeometryError("speed must be a positive finite number")
        pts = [p for d in self.diamonds for p in (d.call, d.ret)]
        if self.start is not None:
            pts.append(self.start)
        for p in pts:
            if len(p.x) != self.spatial_dims:
                raise GeometryError(
                    f"point {p.as_list()} has {len(p.x)} spatial coordinates, expected {self.spatial_dims}"
                )


def precedes(p: Point, q: Point, speed: float = 1.0) -> bool:
    """True iff a signal at ``speed`` can travel from ``p`` to ``q``.

    Reflexive, and lightlike separations count as causal. Comparisons allow an
    absolute slack of ``SLACK``.
    """
    if len(p.x) != len(q.x):
        raise GeometryError(f"dimension mismatch: {len(p.x)} vs {len(q.x)} spatial coordinates")
    dt = q.t - p.t
    if dt < -SLACK:
        return False
    dist = math.sqrt(sum((b - a) ** 2 for a, b in zip(p.x, q.x)))
    return dist <= speed * dt + SLACK


def graph_from_geometry(g: Geometry):
    """Causal graph with an edge j->k iff the call point of j precedes the return point of k."""
    from .graph import CausalGraph

    for idx, d in enumerate(g.diamonds):
        if not precedes(d.call, d.ret, g.speed):
            name = d.id or str(idx + 1)
            raise GeometryError(f"diamond {name!r}: call point does not precede its return point")
    n = len(g.diamonds)
    adj = [[j != k and precedes(g.diamonds[j].call, g.diamonds[k].ret, g.speed) for k in range(n)] for j in range(n)]
    if g.start is None:
        # no start point given: the input is available arbitrarily early
        in_past = before_returns = True
    else:
        in_past = all(precedes(g.start, d.call, g.speed) for d in g.diamonds)
        before_returns = all(precedes(g.start, d.ret, g.speed) for d in g.diamonds)
    return CausalGraph.from_matrix(adj, start_in_past=in_past, start_precedes_all_returns=before_returns)
