"""Achievability deciders with protocol plans and checkable witnesses.

Each decider answers Achievable (with a :class:`Plan` naming a builder and the
spanning subgraph it runs on), Unachievable (with a :class:`Witness`) or
Unknown. Two facts carry most of the reasoning:

* Removing edges never helps. A protocol for a spanning subgraph runs
  unchanged on the full graph, so an Achievable verdict may come from any
  orientation of the bidirected pairs.
* A protocol for a graph restricts to any induced subgraph (never call the
  other diamonds), so an induced no-go structure makes the whole graph
  Unachievable.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Any, Iterator

from . import graph as G
from .catalog import TWO_SOURCES, SQUARE, BIDIRECTED_TRIANGLE
from .graph import LABEL_OK, UNASSISTED_OK, CausalGraph, TripleClass
from .task import Assistance, Kind, TaskError, TaskSpec


class Status(str, enum.Enum):
    ACHIEVABLE = "achievable"
    UNACHIEVABLE = "unachievable"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Plan:
    builder: str
    graph: CausalGraph  # spanning subgraph the builder runs on
    late_start: bool = False
    params: dict[str, Any] = field(default_factory=dict, compare=False)

    def to_json(self) -> dict[str, Any]:
        return {"builder": self.builder, "edges": [[j + 1, k + 1] for j, k in self.graph.edges()],
                "late_start": self.late_start, **self.params}


@dataclass(frozen=True)
class Witness:
    """Evidence for a no-go.

    ``kind`` is one of ``start`` (input not available before every return),
    ``pair`` (two non-adjacent diamonds), ``triple`` (an induced forbidden
    triple), ``isolated`` (a diamond out of contact with two others) or
    ``s_set`` (diamond ``vertices[0]`` whose S-set holds the non-adjacent pair
    ``vertices[1:]``).
    """

    kind: str
    vertices: tuple[int, ...] = ()
    triple_class: TripleClass | None = None

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "vertices": [v + 1 for v in self.vertices]}
        if self.triple_class is not None:
            out["class"] = self.triple_class.value
        return out


@dataclass(frozen=True)
class Verdict:
    status: Status
    reason: str
    plan: Plan | None = None
    witness: Witness | None = None

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"status": self.status.value, "reason": self.reason}
        if self.plan is not None:
            out["plan"] = self.plan.to_json()
        if self.witness is not None:
            out["witness"] = self.witness.to_json()
        return out


def _yes(builder: str, g: CausalGraph, task: TaskSpec, reason: str, **params) -> Verdict:
    late = task.kind is not Kind.ENTANGLEMENT and not task.graph.start_in_past
    return Verdict(Status.ACHIEVABLE, reason, Plan(builder, g, late, params))


def _no(reason: str, witness: Witness) -> Verdict:
    return Verdict(Status.UNACHIEVABLE, reason, witness=witness)


def _unknown(reason: str) -> Verdict:
    return Verdict(Status.UNKNOWN, reason)


# -- helpers -------------------------------------------------------------------

def orientations(g: CausalGraph) -> Iterator[CausalGraph]:
    """Every spanning subgraph keeping exactly one arrow of each bidirected pair."""
    both = G.bidirected_pairs(g)
    for choice in itertools.product((0, 1), repeat=len(both)):
        m = [list(row) for row in g.adj]
        for (a, b), c in zip(both, choice):
            if c:
                m[a][b] = False
            else:
                m[b][a] = False
        yield CausalGraph.from_matrix(m, start_in_past=g.start_in_past,
                                      start_precedes_all_returns=g.start_precedes_all_returns)


def _start_problem(task: TaskSpec) -> Verdict | None:
    if task.kind is Kind.ENTANGLEMENT or task.graph.start_precedes_all_returns:
        return None
    return _no("the input is not available in the past of every return point", Witness("start"))


def isolated_vertex(g: CausalGraph) -> tuple[int, int, int] | None:
    """(v, u, w) with v out of contact with both u and w."""
    for v in range(g.n):
        far = [u for u in range(g.n) if u != v and not G.connected(g, u, v)]
        if len(far) >= 2:
            return v, far[0], far[1]
    return None


def oriented_bad_triple(g: CausalGraph, allowed: frozenset[TripleClass]) -> tuple[tuple[int, int, int], TripleClass] | None:
    """An induced triple free of bidirected pairs whose class is not ``allowed``."""
    for t in itertools.combinations(range(g.n), 3):
        cls = G.classify_triple(g, t)
        if cls is not TripleClass.HAS_BIDIRECTED and cls not in allowed:
            return t, cls
    return None


def s_set_gap(g: CausalGraph) -> tuple[int, int, int] | None:
    """(j, a, b) with a, b in S_j and not connected."""
    for j in range(g.n):
        pairs = G.non_adjacent_pairs(g, G.s_set(g, j))
        if pairs:
            return (j, *pairs[0])
    return None


def embeds(g: CausalGraph, pattern: CausalGraph) -> tuple[int, ...] | None:
    """Vertex map placing ``pattern`` as a spanning subgraph; extra edges never hurt."""
    return next(G.embeddings(g, pattern), None)


# -- deciders ------------------------------------------------------------------------

def decide_single(task: TaskSpec) -> Verdict:
    if task.kind is not Kind.SINGLE:
        raise TaskError("decide_single needs a single-system task")
    bad = _start_problem(task)
    if bad:
        return bad
    missing = G.non_adjacent_pairs(task.graph)
    if missing:
        return _no("two diamonds are not causally connected", Witness("pair", missing[0]))
    return _yes("single-system", task.graph, task, "every pair of diamonds is causally connected")


def _unassisted_oriented(task: TaskSpec, g: CausalGraph) -> Verdict:
    bad = G.first_bad_triple(g, UNASSISTED_OK)
    if bad:
        t, cls = bad
        return _no("an induced triple has no vertex with two incoming edges", Witness("triple", t, cls))
    shape = G.unassisted_structure(g)
    assert shape is not None, "triple rule holds but no structural form was found"
    if shape[0] == "transitive":
        return _yes("rails", g, task, "transitive tournament", order=[v + 1 for v in shape[1]])
    (d0, d0p), rest = shape[1]
    return _yes("rails-open-pair", g, task, "transitive tournament minus the edge between its first two vertices",
                pair=[d0 + 1, d0p + 1])


def _by_orientation(task: TaskSpec, oriented_decider) -> Verdict | None:
    for h in orientations(task.graph):
        v = oriented_decider(task, h)
        if v.status is Status.ACHIEVABLE:
            return Verdict(v.status, v.reason + " (after dropping one arrow of each bidirected pair)", v.plan)
    return None


def decide_two_system_unassisted(task: TaskSpec) -> Verdict:
    _two_call(task, Kind.TWO_SYSTEM)
    bad = _start_problem(task)
    if bad:
        return bad
    if G.is_oriented(task.graph):
        return _unassisted_oriented(task, task.graph)
    return decide_two_system_bidirected(task)


def decide_two_system_bidirected(task: TaskSpec) -> Verdict:
    g = task.graph
    iso = isolated_vertex(g)
    if iso:
        return _no("a diamond is out of contact with two others", Witness("isolated", iso))
    bad = oriented_bad_triple(g, UNASSISTED_OK)
    if bad:
        return _no("an induced oriented triple has no vertex with two incoming edges",
                   Witness("triple", bad[0], bad[1]))
    found = _by_orientation(task, _unassisted_oriented)
    if found:
        return found
    m = embeds(g, SQUARE) if g.n == 4 else None
    if m is not None:
        return _yes("square", g, task, "square of bidirected edges", roles=[v + 1 for v in m])
    return _unknown("no orientation satisfies the triple rule and no known construction applies")


def _label_oriented(task: TaskSpec, g: CausalGraph) -> Verdict:
    bad = G.first_bad_triple(g, LABEL_OK)
    if bad:
        t, cls = bad
        return _no("an induced triple is neither a 3-cycle nor has a vertex with two incoming edges",
                   Witness("triple", t, cls))
    if G.is_tournament(g):
        return _yes("label-parallel", g, task, "tournament: one single-system summoning per label")
    split = G.rival_split(g)
    if split is None:
        return _unknown("label triple rule holds but the graph has no supported shape")
    return _yes("label-open-pair", g, task, "one non-adjacent pair pointing into a tournament",
                pair=[split[0] + 1, split[1] + 1])


def decide_two_system_label(task: TaskSpec) -> Verdict:
    _two_call(task, Kind.TWO_SYSTEM)
    bad = _start_problem(task)
    if bad:
        return bad
    g = task.graph
    if G.is_oriented(g):
        return _label_oriented(task, g)
    found = _by_orientation(task, _label_oriented)
    if found:
        return found
    m = embeds(g, SQUARE) if g.n == 4 else None
    if m is not None:
        return _yes("square", g, task, "square of bidirected edges (labels unused)", roles=[v + 1 for v in m])
    bad3 = oriented_bad_triple(g, LABEL_OK)
    if bad3:
        return _no("an induced oriented triple is a label no-go shape", Witness("triple", bad3[0], bad3[1]))
    return _unknown("no orientation satisfies the label triple rule and no known construction applies")


def decide_two_system_global(task: TaskSpec) -> Verdict:
    """Partial: the full call tuple lets both callers derive labels (smaller index gets label 1),
    so every label protocol applies; beyond that only the four-diamond construction is known."""
    _two_call(task, Kind.TWO_SYSTEM)
    bad = _start_problem(task)
    if bad:
        return bad
    for decide in (decide_two_system_label, decide_two_system_unassisted):
        v = decide(task)
        if v.status is Status.ACHIEVABLE:
            return v
    g = task.graph
    m = embeds(g, TWO_SOURCES) if g.n == 4 else None
    if m is not None:
        return _yes("global-two-sources", g, task, "two sources each pointing at two mutually disconnected sinks",
                    roles=[v + 1 for v in m])
    return _unknown("no known construction or no-go for global assistance on this graph")


def _ent_oriented(task: TaskSpec, g: CausalGraph) -> Verdict:
    gap = s_set_gap(g)
    if gap:
        return _no("some S_j contains two diamonds that are not connected", Witness("s_set", gap))
    return _yes("entanglement-s-set", g, task, "every S_j induces a tournament")


def decide_entanglement(task: TaskSpec) -> Verdict:
    _two_call(task, Kind.ENTANGLEMENT)
    g = task.graph
    if task.assistance is Assistance.GLOBAL:
        return _yes("entanglement-global", g, task, "one shared pair per pair of diamonds, picked by the call tuple")
    if G.is_oriented(g):
        return _ent_oriented(task, g)
    return decide_entanglement_bidirected(task)


def decide_entanglement_bidirected(task: TaskSpec) -> Verdict:
    g = task.graph
    gap = s_set_gap(g)
    if gap:
        return _no("some S_j contains two diamonds that are not connected", Witness("s_set", gap))
    found = _by_orientation(task, _ent_oriented)
    if found:
        return found
    m = embeds(g, BIDIRECTED_TRIANGLE) if g.n == 3 else None
    if m is not None:
        return _yes("entanglement-bidirected-pair", g, task, "bidirected pair plus a diamond out of contact with both",
                    roles=[v + 1 for v in m])
    return _unknown("the S_j condition holds but no orientation or known construction applies")


def _two_call(task: TaskSpec, kind: Kind) -> None:
    if task.kind is not kind:
        raise TaskError(f"expected a {kind.value} task, got {task.kind.value}")
    if task.n < 2:
        raise TaskError("two-call tasks need at least two diamonds")


def decide(task: TaskSpec) -> Verdict:
    if task.kind is Kind.SINGLE:
        return decide_single(task)
    if task.kind is Kind.ENTANGLEMENT:
        return decide_entanglement(task)
    return {
        Assistance.NONE: decide_two_system_unassisted,
        Assistance.LABEL: decide_two_system_label,
        Assistance.GLOBAL: decide_two_system_global,
    }[task.assistance](task)


def check_localizability(g: CausalGraph) -> bool:
    """At most one pair of diamonds out of causal contact."""
    return len(G.non_adjacent_pairs(g)) <= 1


# -- independent witness check ----------------------------------------------------------

FORBIDDEN = {
    (Kind.TWO_SYSTEM, Assistance.NONE): frozenset(TripleClass) - UNASSISTED_OK - {TripleClass.HAS_BIDIRECTED},
    (Kind.TWO_SYSTEM, Assistance.LABEL): frozenset(TripleClass) - LABEL_OK - {TripleClass.HAS_BIDIRECTED},
}


def check_witness(task: TaskSpec, witness: Witness) -> bool:
    """Re-derive a no-go from the raw adjacency, without the deciders."""
    g = task.graph
    adj = g.adj

    def linked(a, b):
        return adj[a][b] or adj[b][a]

    vs = witness.vertices
    if any(not 0 <= v < g.n for v in vs) or len(set(vs)) != len(vs):
        return False
    if witness.kind == "start":
        return task.kind is not Kind.ENTANGLEMENT and not g.start_precedes_all_returns
    if witness.kind == "pair":
        return task.kind is Kind.SINGLE and len(vs) == 2 and not linked(*vs)
    if witness.kind == "isolated":
        v, a, b = vs
        return (task.kind, task.assistance) == (Kind.TWO_SYSTEM, Assistance.NONE) and not linked(v, a) \
            and not linked(v, b)
    if witness.kind == "s_set":
        j, a, b = vs
        in_s = not adj[a][j] and not adj[b][j]
        return task.kind is Kind.ENTANGLEMENT and task.assistance is not Assistance.GLOBAL and in_s \
            and not linked(a, b)
    if witness.kind == "triple":
        forbidden = FORBIDDEN.get((task.kind, task.assistance))
        if forbidden is None or len(vs) != 3:
            return False
        if any(adj[a][b] and adj[b][a] for a, b in itertools.combinations(vs, 2)):
            return False
        # count in-degrees directly rather than trusting the classifier
        indeg = [sum(adj[u][v] for u in vs if u != v) for v in vs]
        arcs = sum(indeg)
        two_in = max(indeg) == 2
        cycle = arcs == 3 and indeg == [1, 1, 1]
        if task.assistance is Assistance.LABEL:
            return not two_in and not cycle and witness.triple_class in forbidden
        return not two_in and witness.triple_class in forbidden
    return False


# -- enumeration cross-check ---------------------------------------------------------

def crosscheck(n: int, kind: Kind, assistance: Assistance, bidirected: bool = False,
               canonical_only: bool = False) -> dict[str, Any]:
    """Decide every graph on ``n`` diamonds and re-check each no-go witness."""
    counts = {s.value: 0 for s in Status}
    bad_witness = []
    rows = []
    for g in G.enumerate_graphs(n, allow_bidirected=bidirected, canonical_only=canonical_only):
        task = TaskSpec(kind, assistance, g)
        v = decide(task)
        counts[v.status.value] += 1
        if v.status is Status.UNACHIEVABLE and not check_witness(task, v.witness):
            bad_witness.append(str(g))
        rows.append((g, v))
    return {"n": n, "kind": kind.value, "assistance": assistance.value, "bidirected": bidirected,
            "graphs": len(rows), "counts": counts, "bad_witnesses": bad_witness, "rows": rows}
