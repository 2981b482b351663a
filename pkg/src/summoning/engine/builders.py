"""Protocol constructions as program builders.

Each builder returns a :class:`Program`; none of them touches the simulator.
Frames are tracked symbolically: a delivered qudit carries a tuple of
:class:`Term` s that the receiving return point corrects before use.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

from .. import graph as G
from ..catalog import TWO_SOURCES, SQUARE, BIDIRECTED_TRIANGLE
from ..graph import CausalGraph
from .ir import (
    ALWAYS,
    PAST,
    All,
    START,
    Any_,
    BellPair,
    Called,
    Correct,
    CountCalled,
    Cond,
    Decode,
    Encode,
    Label,
    MeasureBell,
    Not,
    Output,
    Partner,
    Program,
    ProgramBuilder,
    Send,
    Swap,
    Term,
    Unsupported,
    Call,
    Return,
    Location,
    none_called,
    teleport_terms,
)

Responds = Callable[[int], Cond]


@dataclass(frozen=True)
class Delivery:
    """Qudit ``name`` present at the return point whenever the diamond responds, with its frame."""

    name: str
    terms: tuple[Term, ...] = ()


def _called(j: int) -> Cond:
    return Called(j)


# -- single-system summoning --------------------------------------------------

def pivot(graph: CausalGraph, subset: Sequence[int]) -> int:
    """Vertex with both in- and out-neighbours in ``subset``, most balanced first."""
    best = None
    for v in sorted(subset):
        ins = sum(graph.adj[u][v] for u in subset if u != v)
        outs = sum(graph.adj[v][u] for u in subset if u != v)
        if ins and outs:
            key = (max(ins, outs), v)
            best = key if best is None or key < best else best
    if best is None:
        raise Unsupported("no pivot vertex; the subset is not a tournament with a cycle")
    return best[1]


def summon(pb: ProgramBuilder, graph: CausalGraph, source: str, src: Location, subset: Sequence[int],
           responds: Responds = _called, tag: str = "s") -> dict[int, Delivery]:
    """Bring ``source`` (held at ``src``, which must precede every call point in ``subset``)
    to the return point of the responding diamond.

    With one responder it gets the input. With two responders j -> k, j gets it.
    ``graph`` must induce a tournament on ``subset``.
    """
    subset = sorted(subset)
    if not subset:
        return {}
    if not G.is_tournament(graph, subset):
        raise Unsupported(f"summoning needs a tournament, got {[v + 1 for v in subset]}")
    if len(subset) == 1:
        (u,) = subset
        d = pb.fresh(f"{tag}d{u + 1}_")
        pb.emit(src, Send(source, Call(u)))
        pb.emit(Call(u), Send(source, Return(u), rename=d))
        return {u: Delivery(d)}
    order = G.topological_order(graph, subset)
    if order is not None:
        return _rail(pb, source, src, order, responds, tag)
    v = pivot(graph, subset)
    ins = [u for u in subset if graph.adj[u][v]]
    outs = [u for u in subset if graph.adj[v][u]]
    shares = tuple(pb.fresh(f"{tag}{c}") for c in "XYZ")
    pb.emit(src, Encode(source, shares, 2))
    pb.min_dimension = max(pb.min_dimension, 3)
    via_x = summon(pb, graph, shares[0], src, [u for u in subset if u != v], responds, shares[0] + ".")
    via_y = summon(pb, graph, shares[1], src, [v, *outs], responds, shares[1] + ".")
    via_z = summon(pb, graph, shares[2], src, [v, *ins], responds, shares[2] + ".")
    result = {}
    for u in subset:
        if u == v:
            got, pos = (via_y[u], via_z[u]), (2, 3)
        elif u in outs:
            got, pos = (via_x[u], via_y[u]), (1, 2)
        else:
            got, pos = (via_x[u], via_z[u]), (1, 3)
        out = pb.fresh(f"{tag}d{u + 1}_")
        with pb.when(Return(u), responds(u)):
            for dl in got:
                if dl.terms:
                    pb.emit(Return(u), Correct(dl.name, dl.terms))
            pb.emit(Return(u), Decode(tuple(dl.name for dl in got), pos, out, 2))
        result[u] = Delivery(out)
    return result


def _rail(pb: ProgramBuilder, source: str, src: Location, order: Sequence[int], responds: Responds,
          tag: str) -> dict[int, Delivery]:
    """Teleportation chain along a transitive order; the first responder keeps the system."""
    m = len(order)
    carriers = [source]
    halves = []
    for i in range(m - 1):
        half, nxt = pb.pair(Call(order[i]), Call(order[i + 1]), f"{tag}E")
        halves.append(half)
        carriers.append(nxt)
    pb.emit(src, Send(source, Call(order[0])))
    outcomes: list[str] = []
    result = {}
    for i, u in enumerate(order):
        d = pb.fresh(f"{tag}d{u + 1}_")
        if i == m - 1:
            pb.emit(Call(u), Send(carriers[i], Return(u), rename=d))
        else:
            with pb.when(Call(u), responds(u)) as br:
                pb.emit(Call(u), Send(carriers[i], Return(u), rename=d))
            with pb.otherwise(Call(u), br):
                o = pb.measure_bell(Call(u), carriers[i], halves[i], f"{tag}o")
                pb.broadcast(Call(u), o, order[i + 1:])
            outcomes.append(o)
        terms: list[Term] = []
        for t in range(i):
            cond = _all(Not(responds(order[s])) for s in range(t, i))
            terms += teleport_terms(outcomes[t], cond)
        result[u] = Delivery(d, tuple(terms))
    return result


def _all(conds) -> Cond:
    conds = tuple(conds)
    return conds[0] if len(conds) == 1 else All(conds)


def summon_from(pb: ProgramBuilder, graph: CausalGraph, source: str, at: Location, subset: Sequence[int],
                responds: Responds = _called, tag: str = "t") -> dict[int, Delivery]:
    """Summon a system held at ``at``, which only precedes the return points of ``subset``.

    A past-prepared pair is summoned instead and ``source`` is teleported into it at ``at``.
    """
    if not subset:
        return {}
    carrier, entry = pb.pair(PAST, at, f"{tag}T")
    deliveries = summon(pb, graph, carrier, PAST, subset, responds, tag)
    o = pb.measure_bell(at, source, entry, f"{tag}in")
    pb.broadcast(at, o, sorted(subset))
    return {u: Delivery(d.name, d.terms + teleport_terms(o)) for u, d in deliveries.items()}


def _orient(graph: CausalGraph) -> CausalGraph:
    """Spanning subgraph keeping, for each bidirected pair, only the lower-to-higher arrow."""
    m = [list(row) for row in graph.adj]
    for a, b in G.bidirected_pairs(graph):
        m[b][a] = False
    return CausalGraph.from_matrix(m, start_in_past=graph.start_in_past,
                                   start_precedes_all_returns=graph.start_precedes_all_returns)


def build_single_system(graph: CausalGraph, subset: Sequence[int] | None = None) -> Program:
    """Single-system summoning of input A over ``subset`` (default: every diamond)."""
    subset = list(range(graph.n)) if subset is None else sorted(subset)
    if not G.all_connected(graph, subset):
        raise Unsupported("single-system summoning needs every pair of diamonds connected")
    oriented = _orient(graph)
    pb = ProgramBuilder(graph, "single-system", ("A",))
    got = summon(pb, oriented, "A", START, subset)
    for u, dl in got.items():
        with pb.when(Return(u), Called(u)):
            if dl.terms:
                pb.emit(Return(u), Correct(dl.name, dl.terms))
            pb.emit(Return(u), Output(dl.name, "A"))
    return pb.build()


# -- unassisted two-system summoning: teleportation rails ---------------------

def _two_rails(pb: ProgramBuilder, order: Sequence[int], e_head: str, f_head: str,
               f_head_terms: tuple[Term, ...] = ()) -> None:
    """Two rails along ``order``; the first caller returns the E content, the second the F content.

    ``e_head`` and ``f_head`` must already be at the first call point.
    ``f_head_terms`` is the frame the F head content carries on arrival.
    """
    m = len(order)
    e, f = [e_head], [f_head]
    e_half, f_half = [], []
    for i in range(m - 1):
        a, b = pb.pair(Call(order[i]), Call(order[i + 1]), "E")
        c, d = pb.pair(Call(order[i]), Call(order[i + 1]), "F")
        e_half.append(a)
        e.append(b)
        f_half.append(c)
        f.append(d)
    ee, ff, fe = {}, {}, {}
    for i, u in enumerate(order):
        later = order[i + 1:]
        with pb.when(Call(u), Called(u)) as br:
            pb.emit(Call(u), Send(e[i], Return(u)))
            if i < m - 1:
                fe[i] = pb.measure_bell(Call(u), f[i], e_half[i], "fe")
                pb.broadcast(Call(u), fe[i], later)
        if i < m - 1:
            with pb.otherwise(Call(u), br):
                ee[i] = pb.measure_bell(Call(u), e[i], e_half[i], "ee")
                ff[i] = pb.measure_bell(Call(u), f[i], f_half[i], "ff")
                pb.broadcast(Call(u), ee[i], later)
                pb.broadcast(Call(u), ff[i], later)
    for k, u in enumerate(order):
        before = order[:k]
        terms: list[Term] = []
        for i in range(k):
            uncalled_to_k = none_called(order[i:k])
            terms += teleport_terms(ee[i], uncalled_to_k)
            terms += teleport_terms(fe[i], _all((Called(order[i]), none_called(order[i + 1:k]))))
            terms += teleport_terms(ff[i], _all((Not(Called(order[i])), CountCalled(tuple(order[i + 1:k]), 1))))
        if k:
            terms += [t.guarded(CountCalled(tuple(before), 1)) for t in f_head_terms]
        with pb.when(Return(u), Called(u)):
            if terms:
                pb.emit(Return(u), Correct(e[k], tuple(terms)))
            if k == 0:
                pb.emit(Return(u), Output(e[k], "A"))
            else:
                with pb.when(Return(u), none_called(before)) as br:
                    pb.emit(Return(u), Output(e[k], "A"))
                with pb.otherwise(Return(u), br):
                    pb.emit(Return(u), Output(e[k], "B"))


def build_rails(graph: CausalGraph) -> Program:
    """Two teleportation rails along a transitive tournament."""
    order = G.chain_order(graph)
    if order is None or not G.all_connected(graph):
        raise Unsupported("the two-rail protocol needs a (spanning) transitive tournament")
    pb = ProgramBuilder(graph, "rails", ("A", "B"))
    pb.emit(START, Send("A", Call(order[0])), Send("B", Call(order[0])))
    _two_rails(pb, order, "A", "B")
    pb.meta["order"] = [v + 1 for v in order]
    return pb.build()


def build_rails_open_pair(graph: CausalGraph) -> Program:
    """Rails over D_0 and the chain, plus a pair linking D_0 to its non-adjacent partner D_0'."""
    split = G.near_transitive_split(graph)
    if split is None:
        raise Unsupported("expected a transitive tournament with the edge between its first two vertices removed")
    (d0, d0p), rest = split
    order = [d0, *rest]
    pb = ProgramBuilder(graph, "rails-open-pair", ("A", "B"))
    pb.emit(START, Send("A", Call(d0)), Send("B", Call(d0p)))
    g0, g0p = pb.pair(Call(d0), Call(d0p), "G")
    with pb.when(Call(d0p), Called(d0p)) as br:
        pb.emit(Call(d0p), Send("B", Return(d0p)))
    with pb.otherwise(Call(d0p), br):
        bg = pb.measure_bell(Call(d0p), "B", g0p, "bg")
        pb.broadcast(Call(d0p), bg, rest)
    with pb.when(Return(d0p), Called(d0p)):
        pb.emit(Return(d0p), Output("B", "B"))
    _two_rails(pb, order, "A", g0, teleport_terms(bg, Not(Called(d0p))))
    pb.meta["order"] = [v + 1 for v in order]
    pb.meta["pair"] = [d0 + 1, d0p + 1]
    return pb.build()


# -- label-assisted two-system summoning ---------------------------------------

def build_label_parallel(graph: CausalGraph) -> Program:
    """Two single-system summonings keyed on the call labels."""
    if not G.all_connected(graph):
        raise Unsupported("parallel summoning needs every pair of diamonds connected")
    oriented = _orient(graph)
    pb = ProgramBuilder(graph, "label-parallel", ("A", "B"))
    for name, label in (("A", 1), ("B", 2)):
        got = summon(pb, oriented, name, START, list(range(graph.n)), lambda j, lab=label: Label(j, lab), name)
        for u, dl in got.items():
            with pb.when(Return(u), Label(u, label)):
                if dl.terms:
                    pb.emit(Return(u), Correct(dl.name, dl.terms))
                pb.emit(Return(u), Output(dl.name, name))
    return pb.build()


def build_label_open_pair(graph: CausalGraph) -> Program:
    """Label-assisted protocol for a non-adjacent pair that points into a tournament."""
    split = G.rival_split(graph)
    if split is None:
        raise Unsupported("expected one non-adjacent pair pointing into a tournament")
    d0, d0p, rest = split
    pb = ProgramBuilder(graph, "label-open-pair", ("A", "B"))
    pb.emit(START, Send("A", Call(d0)), Send("B", Call(d0p)))
    e, ep = pb.pair(Call(d0), Call(d0p), "E")
    f, fp = pb.pair(Call(d0), Call(d0p), "F")
    g1, g2 = pb.alloc(Call(d0), "G1_"), pb.alloc(Call(d0), "G2_")
    g1p, g2p = pb.alloc(Call(d0p), "G1'_"), pb.alloc(Call(d0p), "G2'_")

    # D_0 holds A and the E, F halves; D_0' holds B and E', F'
    with pb.when(Call(d0), Called(d0)) as br:
        pb.emit(Call(d0), Send("A", Return(d0)))
        with pb.when(Call(d0), Label(d0, 1)) as lb:
            pb.emit(Call(d0), Swap(f, g2))
        with pb.otherwise(Call(d0), lb):
            pb.emit(Call(d0), Swap(f, g1))
    with pb.otherwise(Call(d0), br):
        ae = pb.measure_bell(Call(d0), "A", e, "ae")
        pb.broadcast(Call(d0), ae, rest)
        pb.emit(Call(d0), Swap(f, g1))
    with pb.when(Call(d0p), Called(d0p)) as br:
        pb.emit(Call(d0p), Send("B", Return(d0p)))
        with pb.when(Call(d0p), Label(d0p, 1)) as lb:
            pb.emit(Call(d0p), Swap(ep, g2p))
        with pb.otherwise(Call(d0p), lb):
            pb.emit(Call(d0p), Swap(ep, g1p))
    with pb.otherwise(Call(d0p), br):
        bf = pb.measure_bell(Call(d0p), "B", fp, "bf")
        pb.broadcast(Call(d0p), bf, rest)
        pb.emit(Call(d0p), Swap(ep, g2p))
    with pb.when(Return(d0), Called(d0)):
        pb.emit(Return(d0), Output("A", "A"))
    with pb.when(Return(d0p), Called(d0p)):
        pb.emit(Return(d0p), Output("B", "B"))

    def lab(ell):
        return lambda j: Label(j, ell)

    sub = {
        (0, 1): summon_from(pb, graph, g1, Call(d0), rest, lab(1), "g1."),
        (0, 2): summon_from(pb, graph, g2, Call(d0), rest, lab(2), "g2."),
        (1, 1): summon_from(pb, graph, g1p, Call(d0p), rest, lab(1), "h1."),
        (1, 2): summon_from(pb, graph, g2p, Call(d0p), rest, lab(2), "h2."),
    }
    carries_b = teleport_terms(bf)  # F holds B when D_0' was not called
    carries_a = teleport_terms(ae)  # E' holds A when D_0 was not called

    def give(u: int, key: tuple[int, int], frame: tuple[Term, ...], label: str) -> None:
        dl = sub[key][u]
        pb.emit(Return(u), Correct(dl.name, dl.terms + frame), Output(dl.name, label))

    for u in rest:
        for ell in (1, 2):
            with pb.when(Return(u), Label(u, ell)):
                with pb.when(Return(u), Called(d0)) as b0:
                    give(u, (0, ell), carries_b, "B")
                with pb.otherwise(Return(u), b0):
                    with pb.when(Return(u), Called(d0p)) as b1:
                        give(u, (1, ell), carries_a, "A")
                    with pb.otherwise(Return(u), b1):
                        if ell == 1:
                            give(u, (0, 1), carries_b, "B")
                        else:
                            give(u, (1, 2), carries_a, "A")
    pb.meta["pair"] = [d0 + 1, d0p + 1]
    return pb.build()


# -- global-assisted two-system summoning ---------------------------------------

def match(graph: CausalGraph, pattern: CausalGraph) -> tuple[int, ...] | None:
    """First vertex map embedding ``pattern`` as a spanning subgraph of ``graph``."""
    return next(G.embeddings(graph, pattern), None)


def build_global_two_sources(graph: CausalGraph) -> Program:
    m = match(graph, TWO_SOURCES)
    if m is None:
        raise Unsupported("expected two diamonds that both point at the same two others")
    x, a, y, b = m  # diamonds 1, 2, 3, 4 of the pattern
    pb = ProgramBuilder(graph, "global-two-sources", ("A", "B"))
    pb.emit(START, Send("A", Call(a)), Send("B", Call(b)))
    e, ep = pb.pair(Call(a), Call(b), "E")
    f, fp = pb.pair(Call(a), Call(b), "F")
    with pb.when(Call(a), Called(a)) as br:
        pb.emit(Call(a), Send("A", Return(a)))
        for ell in (x, y):
            with pb.when(Call(a), Partner(a, ell)):
                pb.emit(Call(a), Send(e, Return(ell)))
    with pb.otherwise(Call(a), br):
        pb.emit(Call(a), Send(e, Return(x)))
        af = pb.measure_bell(Call(a), "A", f, "af")
        pb.broadcast(Call(a), af, (x, y))
    with pb.when(Call(b), Called(b)) as br:
        pb.emit(Call(b), Send("B", Return(b)))
        for ell in (x, y):
            with pb.when(Call(b), Partner(b, ell)):
                pb.emit(Call(b), Send(fp, Return(ell)))
    with pb.otherwise(Call(b), br):
        pb.emit(Call(b), Send(fp, Return(y)))
        be = pb.measure_bell(Call(b), "B", ep, "be")
        pb.broadcast(Call(b), be, (x, y))
    with pb.when(Return(a), Called(a)):
        pb.emit(Return(a), Output("A", "A"))
    with pb.when(Return(b), Called(b)):
        pb.emit(Return(b), Output("B", "B"))
    # F' carries A (teleported at c_a); E carries B (teleported at c_b)
    for u, takes_fp in ((x, Partner(x, b)), (y, Any_((Partner(y, x), Partner(y, b))))):
        with pb.when(Return(u), Called(u)):
            with pb.when(Return(u), takes_fp) as br:
                pb.emit(Return(u), Correct(fp, teleport_terms(af)), Output(fp, "A"))
            with pb.otherwise(Return(u), br):
                pb.emit(Return(u), Correct(e, teleport_terms(be)), Output(e, "B"))
    pb.meta["roles"] = [v + 1 for v in m]
    return pb.build()


# -- bidirected edges: bounce and the square protocol ---------------------------

def bounce(pb: ProgramBuilder, graph: CausalGraph, x: str, j: int, k: int, when_j: Cond = ALWAYS,
           tag: str = "b") -> tuple[str, str]:
    """Route ``x`` (at c_j) to r_k if k is called, else back to r_j.

    The Bell measurement at c_j only happens under ``when_j``. Returns the name
    of the arriving qudit and the outcome that sets its frame.
    """
    if j == k or not G.bidirected(graph, j, k):
        raise Unsupported(f"a bounce needs a bidirected edge between {j + 1} and {k + 1}")
    e, ep = pb.pair(Call(j), Call(k), f"{tag}E")
    out = pb.fresh(f"{tag}o")
    with pb.when(Call(j), when_j):
        pb.emit(Call(j), MeasureBell(x, e, out))
        pb.broadcast(Call(j), out, (j, k))
    with pb.when(Call(k), Called(k)) as br:
        pb.emit(Call(k), Send(ep, Return(k)))
    with pb.otherwise(Call(k), br):
        pb.emit(Call(k), Send(ep, Return(j)))
    return ep, out


# per diamond of the square (1-based), what to do with each held share:
# (share, partner if called, partner if not called); partner None means keep/send
SQUARE_TABLE: dict[int, tuple[tuple[str, int, int], ...]] = {
    1: (("a1", 4, 2), ("b1", 2, 4), ("a5", 0, 2)),
    2: (("a2", 1, 3), ("b2", 3, 1)),
    3: (("a3", 2, 4), ("b3", 4, 2), ("b5", 0, 4)),
    4: (("a4", 3, 1), ("b4", 1, 3)),
}


def square_routing(table=SQUARE_TABLE) -> dict[tuple[int, int], dict[int, list[str]]]:
    """Which shares reach which called return point, per call pair (1-based, symbolic)."""
    out = {}
    for calls in itertools.combinations(range(1, 5), 2):
        got: dict[int, list[str]] = {c: [] for c in calls}
        for j, rows in table.items():
            for share, if_called, if_not in rows:
                called = j in calls
                if if_called == 0:  # kept share: r_j if called, else sent to r_{if_not}
                    dest = j if called else if_not
                else:
                    k = if_called if called else if_not
                    dest = k if k in calls else j
                if dest in got:
                    got[dest].append(share)
        out[calls] = {c: sorted(v) for c, v in got.items()}
    return out


def build_square(graph: CausalGraph, actions=SQUARE_TABLE, routing=SQUARE_TABLE) -> Program:
    """Square of bidirected edges: ((3,5)) shares of A and B moved by bounces.

    ``actions`` drives the call points and ``routing`` the decoding at the return
    points; they differ only in mutation tests.
    """
    m = match(graph, SQUARE)
    if m is None:
        raise Unsupported("expected the square of bidirected edges with two non-adjacent pairs")
    pb = ProgramBuilder(graph, "square", ("A", "B"))
    pb.min_dimension = 5
    alpha = tuple(f"a{i}" for i in range(1, 6))
    beta = tuple(f"b{i}" for i in range(1, 6))
    pb.emit(START, Encode("A", alpha, 3), Encode("B", beta, 3))
    v = lambda i: m[i - 1]  # noqa: E731  pattern diamond -> graph vertex
    for j, rows in actions.items():
        for share, _, _ in rows:
            pb.emit(START, Send(share, Call(v(j))))
    # (share, pattern call set) -> (arriving qudit, frame outcome)
    arrival: dict[tuple[str, bool], tuple[str, str | None, int, int]] = {}
    for j, rows in actions.items():
        for share, if_called, if_not in rows:
            if if_called == 0:
                with pb.when(Call(v(j)), Called(v(j))) as br:
                    pb.emit(Call(v(j)), Send(share, Return(v(j)), rename=f"{share}@{j}"))
                with pb.otherwise(Call(v(j)), br):
                    pb.emit(Call(v(j)), Send(share, Return(v(if_not)), rename=f"{share}@{if_not}"))
                continue
            for active, k in ((True, if_called), (False, if_not)):
                cond = Called(v(j)) if active else Not(Called(v(j)))
                name, out = bounce(pb, graph, share, v(j), v(k), cond, f"{share}>{k}.")
                arrival[(share, active)] = (name, out, j, k)
    routes = square_routing(routing)
    neighbours = {1: (2, 4), 2: (1, 3), 3: (2, 4), 4: (1, 3)}
    for t in range(1, 5):
        r = Return(v(t))
        with pb.when(r, Called(v(t))):
            for calls, got in routes.items():
                if t not in calls:
                    continue
                other = calls[0] if calls[1] == t else calls[1]
                if other in neighbours[t]:
                    cond = Called(v(other))
                else:
                    cond = none_called(tuple(v(u) for u in neighbours[t]))
                shares = got[t]
                letters = {s[0] for s in shares}
                counts = {c: sum(s[0] == c for s in shares) for c in letters}
                letter = next((c for c, n in counts.items() if n >= 3), None)
                if letter is None:
                    raise Unsupported(f"routing table delivers no three matching shares to r{t} for {calls}")
                use = [s for s in shares if s[0] == letter][:3]
                with pb.when(r, cond):
                    names = []
                    for s in use:
                        holder = next(j for j, rows in routing.items() if any(row[0] == s for row in rows))
                        row = next(row for row in routing[holder] if row[0] == s)
                        if row[1] == 0:
                            names.append(f"{s}@{holder if holder in calls else row[2]}")
                            continue
                        name, out, _, _ = arrival[(s, holder in calls)]
                        pb.emit(r, Correct(name, teleport_terms(out)))
                        names.append(name)
                    out_name = pb.fresh(f"{letter}dec{t}_")
                    pb.emit(r, Decode(tuple(names), tuple(int(s[1]) for s in use), out_name, 3))
                    pb.emit(r, Output(out_name, "A" if letter == "a" else "B"))
    pb.meta["roles"] = [x + 1 for x in m]
    pb.meta["bounces_per_pattern"] = sum(1 for rows in actions.values() for row in rows if row[1] != 0)
    return pb.build()


# -- entanglement summoning ------------------------------------------------------

def build_entanglement_s_set(graph: CausalGraph) -> Program:
    """Entanglement summoning when every S_j induces a tournament (oriented graphs)."""
    if not G.is_oriented(graph):
        raise Unsupported("this construction is for oriented graphs")
    for j in range(graph.n):
        if not G.is_tournament(graph, G.s_set(graph, j)):
            raise Unsupported(f"S_{j + 1} does not induce a tournament")
    part = G.x_partition(graph)
    if part is None:
        raise Unsupported("diamonds without edges cannot be paired up")
    partner = {a: b for a, b in part} | {b: a for a, b in part}
    pb = ProgramBuilder(graph, "entanglement-s-set")
    direct: dict[int, str] = {}
    via: dict[tuple[str, int], dict[int, Delivery]] = {}
    for a, b in part:
        qa, qb = pb.pair(PAST, PAST, f"A{a + 1}_")
        via[("A", a)] = summon(pb, graph, qa, PAST, G.s_set(graph, b), tag=f"A{a + 1}.")
        via[("A", b)] = summon(pb, graph, qb, PAST, G.s_set(graph, a), tag=f"A{b + 1}.")
    for k in range(graph.n):
        if k in partner:
            continue
        ak, bk = pb.pair(Return(k), PAST, f"A{k + 1}_")
        direct[k] = ak
        via[("B", k)] = summon(pb, graph, bk, PAST, G.s_set(graph, k), tag=f"B{k + 1}.")

    def give(u: int, dl: Delivery) -> None:
        if dl.terms:
            pb.emit(Return(u), Correct(dl.name, dl.terms))
        pb.emit(Return(u), Output(dl.name))

    for u in range(graph.n):
        r = Return(u)
        sources = [i for i in range(graph.n) if graph.adj[i][u]]
        with pb.when(r, Called(u)):
            for i in sources:
                with pb.when(r, Called(i)):
                    give(u, via[("A", partner[i])][u] if i in partner else via[("B", i)][u])
            with pb.when(r, none_called(sources) if sources else ALWAYS):
                if u in partner:
                    give(u, via[("A", u)][u])
                else:
                    pb.emit(r, Output(direct[u]))
    pb.meta["pairs"] = [[a + 1, b + 1] for a, b in part]
    return pb.build()


def build_ent_bidirected_pair(graph: CausalGraph) -> Program:
    """1 <-> 2 with 3 isolated: one pair shared by 1 and 2, one by 1 and 3."""
    m = match(graph, BIDIRECTED_TRIANGLE)
    if m is None:
        raise Unsupported("expected a bidirected pair plus a diamond disconnected from both")
    a, b, c = m
    pb = ProgramBuilder(graph, "entanglement-bidirected-pair")
    g, gp = pb.pair(Call(a), Return(c), "G")
    h, hp = pb.pair(Call(a), Return(b), "H")
    with pb.when(Call(a), Called(a)) as br:
        pb.emit(Call(a), Send(g, Return(a)), Send(h, Return(a)))
    with pb.otherwise(Call(a), br):
        pb.emit(Call(a), Send(g, Return(b)))
    with pb.when(Return(a), Called(a)):
        with pb.when(Return(a), Called(b)) as br:
            pb.emit(Return(a), Output(h))
        with pb.otherwise(Return(a), br):
            pb.emit(Return(a), Output(g))
    with pb.when(Return(b), Called(b)):
        with pb.when(Return(b), Called(a)) as br:
            pb.emit(Return(b), Output(hp))
        with pb.otherwise(Return(b), br):
            pb.emit(Return(b), Output(g))
    with pb.when(Return(c), Called(c)):
        pb.emit(Return(c), Output(gp))
    pb.meta["roles"] = [x + 1 for x in m]
    return pb.build()


def build_ent_global(graph: CausalGraph) -> Program:
    """One pair per pair of diamonds; each caller returns the half indexed by the call tuple."""
    pb = ProgramBuilder(graph, "entanglement-global")
    halves: dict[tuple[int, int], str] = {}
    for j, k in G.pairs(graph.n):
        x, y = pb.pair(Return(j), Return(k), f"P{j + 1}{k + 1}_")
        halves[(j, k)], halves[(k, j)] = x, y
    for j in range(graph.n):
        with pb.when(Return(j), Called(j)):
            for k in range(graph.n):
                if k != j:
                    with pb.when(Return(j), Partner(j, k)):
                        pb.emit(Return(j), Output(halves[(j, k)]))
    return pb.build()


# -- late start points --------------------------------------------------------------

def relax_start_point(program: Program, graph: CausalGraph | None = None) -> Program:
    """Let inputs arrive at a start point that precedes every return but not every call.

    The program runs on past-prepared halves instead; the real inputs are
    teleported into them at the start point and the outcomes corrected at
    whichever return point outputs each input.
    """
    if program.relaxed:
        raise Unsupported("the start point has already been relaxed")
    if graph is not None and not graph.start_precedes_all_returns:
        raise Unsupported("the start point does not precede every return point")
    new = program.copy()
    past, start = [], []
    fixes: dict[str, str] = {}
    for name in program.inputs:
        tilde = f"{name}~"
        past += [BellPair(name, tilde), Send(tilde, START)]
        out = f"relax:{name}"
        fixes[name] = out
        start.append(MeasureBell(f"{name}@s", tilde, out))
        start += [Send(out, Return(j)) for j in range(program.n)]
    new.steps[PAST] = past + new.steps.get(PAST, []) + new.steps.get(START, [])
    new.steps[START] = start
    for j in range(program.n):
        new.steps[Return(j)] = _patch_outputs(new.steps.get(Return(j), []), fixes)
    new.inputs = tuple(f"{name}@s" for name in program.inputs)
    new.relaxed = True
    new.name = program.name + "+late-start"
    return new


def _patch_outputs(instrs: list, fixes: dict[str, str]) -> list:
    out = []
    for ins in instrs:
        if isinstance(ins, Output):
            if ins.label is None and fixes:
                raise Unsupported("cannot relax a program whose outputs do not say which input they carry")
            if ins.label in fixes:
                out.append(Correct(ins.q, teleport_terms(fixes[ins.label])))
        elif hasattr(ins, "then"):
            ins.then = _patch_outputs(ins.then, fixes)
            ins.orelse = _patch_outputs(ins.orelse, fixes)
        out.append(ins)
    return out
