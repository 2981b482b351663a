"""Acceptance criteria 1-8, one test each; the terminal summary prints one PASS/FAIL line per criterion.

Run as a script (``python3 tests/test_acceptance.py``) to get the same lines without pytest.
"""

from __future__ import annotations

import itertools
import math
import sys
import time

import numpy as np

from summoning import catalog as C
from summoning import graph as G
from summoning.achievability import Status, check_witness, decide
from summoning.census import triple_rule_census
from summoning.engine import builders as B
from summoning.engine.ir import (
    PAST, BellPair, Branch, Call, CausalityViolation, Called, Correct, MeasureBell, Output, Return, Send, Unsupported,
    call_name, check_causality, teleport_terms,
)
from summoning.engine.ir import ProgramBuilder
from summoning.engine.plan import build_plan
from summoning.engine.runtime import input_label, run
from summoning.engine.verify import verify
from summoning.qudit import CssCode, SimState, bell_vector, cgl_decode, cgl_encode, trace_distance
from summoning.task import Assistance, CallPattern, Kind, TaskSpec

TOL = 1e-9
PEAK_LIMIT = 14

VARIANTS = [
    (Kind.SINGLE, Assistance.NONE),
    (Kind.TWO_SYSTEM, Assistance.NONE),
    (Kind.TWO_SYSTEM, Assistance.LABEL),
    (Kind.TWO_SYSTEM, Assistance.GLOBAL),
    (Kind.ENTANGLEMENT, Assistance.NONE),
    (Kind.ENTANGLEMENT, Assistance.LABEL),
    (Kind.ENTANGLEMENT, Assistance.GLOBAL),
]


# -- criterion 1: every shipped protocol is exact ------------------------------------------

def protocol_cases():
    two, ent = Kind.TWO_SYSTEM, Kind.ENTANGLEMENT
    none, label, glob = Assistance.NONE, Assistance.LABEL, Assistance.GLOBAL
    cases = [(f"rails n={n}", B.build_rails, C.transitive(n), two, none) for n in range(2, 6)]
    cases += [(f"rails-open-pair n={n}", B.build_rails_open_pair, C.near_transitive(n), two, none) for n in range(3, 6)]
    cases += [
        ("label-parallel 3-cycle", B.build_label_parallel, C.THREE_CYCLE, two, label),
        ("label-open-pair n=4", B.build_label_open_pair, C.near_transitive(4), two, label),
        ("global four-diamond", B.build_global_two_sources, C.TWO_SOURCES, two, glob),
        ("square", B.build_square, C.SQUARE, two, none),
        ("bidirected-pair entanglement", B.build_ent_bidirected_pair, C.BIDIRECTED_TRIANGLE, ent, none),
    ]
    for n in range(2, 5):
        for g in G.enumerate_graphs(n):
            if decide(TaskSpec(ent, none, g)).status is Status.ACHIEVABLE:
                cases.append((f"entanglement-s-set {g}", B.build_entanglement_s_set, g, ent, none))
    for n in range(2, 5):
        for g in (G.CausalGraph.from_edges(n, []), C.transitive(n)):
            cases.append((f"entanglement-global {g}", B.build_ent_global, g, ent, glob))
    return cases


def criterion_1() -> tuple[bool, str]:
    bad = []
    cases = protocol_cases()
    for name, build, g, kind, assistance in cases:
        task = TaskSpec(kind, assistance, g, name=name)
        program = build(g)
        for exhaustive in (False, True):
            result = verify(program, task, exhaustive=exhaustive)
            peak = max(r.peak_qudits for r in result.patterns)
            if not result.success or result.min_fidelity < 1 - TOL or peak > PEAK_LIMIT:
                bad.append(f"{name} exhaustive={exhaustive} min={result.min_fidelity:.3g} peak={peak}")
    return not bad, f"{len(cases)} protocol instances" + (f"; failures: {bad}" if bad else "")


# -- criterion 2: triple rules vs structural forms over every oriented graph up to n=6 ----------------------

def criterion_2() -> tuple[bool, str]:
    bad = []
    for n in range(1, G.MAX_ENUM_N + 1):
        r = triple_rule_census(n)
        if r["graphs"] != 3 ** math.comb(n, 2) or r["equivalence_violations"] or r["label_violations"] \
                or r["unassisted_not_label"]:
            bad.append((n, r))
        # transitive tournaments (n!) plus the ones missing their first edge (n!/2)
        if n >= 2 and r["structural"] != 3 * math.factorial(n) // 2:
            bad.append((n, "structural count", r["structural"]))
    return not bad, "n=1..6 zero discrepancies" if not bad else str(bad)


# -- criterion 3: decider soundness for n <= 4 ----------------------------------------------

def sweep(bidirected: bool, canonical_only: bool, exhaustive: bool) -> tuple[int, list[str]]:
    checked, bad = 0, []
    for kind, assistance in VARIANTS:
        for n in range(1 if kind is Kind.SINGLE else 2, 5):
            for g in G.enumerate_graphs(n, allow_bidirected=bidirected, canonical_only=canonical_only):
                task = TaskSpec(kind, assistance, g)
                v = decide(task)
                checked += 1
                if v.status is Status.ACHIEVABLE:
                    result = verify(build_plan(v.plan, g), task, exhaustive=exhaustive)
                    if not result.success:
                        bad.append(f"{kind.value}/{assistance.value} {g}: protocol failed")
                elif v.status is Status.UNACHIEVABLE and not check_witness(task, v.witness):
                    bad.append(f"{kind.value}/{assistance.value} {g}: witness {v.witness}")
    return checked, bad


def criterion_3() -> tuple[bool, str]:
    # every labeled graph once with sampled outcomes, every isomorphism class with all branches
    runs = [
        ("oriented labeled, sampled", False, False, False),
        ("oriented canonical, exhaustive", False, True, True),
        ("bidirected canonical, sampled", True, True, False),
        ("bidirected canonical, exhaustive", True, True, True),
    ]
    bad, total = [], 0
    for _, bidirected, canonical_only, exhaustive in runs:
        checked, errs = sweep(bidirected, canonical_only, exhaustive)
        total += checked
        bad += errs
    return not bad, f"{total} (graph, variant) decisions" + (f"; contradictions: {bad[:5]}" if bad else "")


# -- criterion 4: named verdicts ---------------------------------------------------------------

NAMED_VERDICTS = [
    ("three-cycle", Kind.TWO_SYSTEM, Assistance.NONE, Status.UNACHIEVABLE),
    ("three-cycle", Kind.TWO_SYSTEM, Assistance.LABEL, Status.ACHIEVABLE),
    ("three-cycle", Kind.SINGLE, Assistance.NONE, Status.ACHIEVABLE),
    ("two-out", Kind.TWO_SYSTEM, Assistance.NONE, Status.UNACHIEVABLE),
    ("two-out", Kind.TWO_SYSTEM, Assistance.LABEL, Status.UNACHIEVABLE),
    ("two-out", Kind.ENTANGLEMENT, Assistance.NONE, Status.UNACHIEVABLE),
    ("two-out", Kind.ENTANGLEMENT, Assistance.LABEL, Status.UNACHIEVABLE),
    ("two-sources", Kind.TWO_SYSTEM, Assistance.GLOBAL, Status.ACHIEVABLE),
    ("bidirected-triangle", Kind.TWO_SYSTEM, Assistance.NONE, Status.UNACHIEVABLE),
    ("bidirected-triangle", Kind.ENTANGLEMENT, Assistance.NONE, Status.ACHIEVABLE),
    ("square", Kind.TWO_SYSTEM, Assistance.NONE, Status.ACHIEVABLE),
    ("pentagon", Kind.ENTANGLEMENT, Assistance.NONE, Status.UNKNOWN),
]


def criterion_4() -> tuple[bool, str]:
    bad = []
    for name, kind, assistance, want in NAMED_VERDICTS:
        got = decide(TaskSpec(kind, assistance, C.NAMED[name])).status
        if got is not want:
            bad.append(f"{name} {kind.value}/{assistance.value}: {got.value} != {want.value}")
    return not bad, f"{len(NAMED_VERDICTS)} verdicts" + (f"; mismatches: {bad}" if bad else "")


# -- criterion 5: threshold codes ------------------------------------------------------------------

def _secrets(p: int, rng: np.random.Generator) -> list[np.ndarray]:
    basis = [np.eye(p)[i].astype(np.complex128) for i in range(p)]
    rand = []
    for _ in range(20):
        v = rng.normal(size=p) + 1j * rng.normal(size=p)
        rand.append(v / np.linalg.norm(v))
    return basis + rand


def code_report(k: int, p: int, seed: int = 7) -> tuple[float, float, int, int]:
    """(worst reconstruction fidelity, worst leak, #authorized subsets, #unauthorized subsets)."""
    code = CssCode(k, p)
    m = code.shares
    authorized = list(itertools.combinations(range(1, m + 1), k))
    unauthorized = [s for r in range(1, k) for s in itertools.combinations(range(1, m + 1), r)]
    worst_fid, worst_leak = 1.0, 0.0
    reference: dict[tuple[int, ...], np.ndarray] = {}
    for psi in _secrets(p, np.random.default_rng(seed)):
        for subset in authorized:
            st = SimState(p)
            shares = cgl_encode(st, st.prepare(psi), code)
            out = cgl_decode(st, [shares[i - 1] for i in subset], subset, code)
            worst_fid = min(worst_fid, st.fidelity_with([out], psi))
        st = SimState(p)
        shares = cgl_encode(st, st.prepare(psi), code)
        for subset in unauthorized:
            rho = st.reduced_state([shares[i - 1] for i in subset])
            base = reference.setdefault(subset, rho)
            worst_leak = max(worst_leak, trace_distance(rho, base))
    return worst_fid, worst_leak, len(authorized), len(unauthorized)


def criterion_5() -> tuple[bool, str]:
    details, ok = [], True
    for k, p, want in ((2, 3, 3), (3, 5, 10)):
        fid, leak, n_auth, _ = code_report(k, p)
        ok &= fid >= 1 - TOL and leak <= TOL and n_auth == want
        details.append(f"(({k},{2 * k - 1})) p={p}: min fidelity {fid:.12f}, max leak {leak:.1e}")
    return ok, "; ".join(details)


# -- criterion 6: acausal edits are rejected ------------------------------------------------------

def _task(g, kind=Kind.TWO_SYSTEM, assistance=Assistance.NONE) -> TaskSpec:
    return TaskSpec(kind, assistance, g)


def _with(program, loc, *instrs, front: bool = False):
    p = program.copy()
    if front:
        p.steps[loc][:0] = list(instrs)
    else:
        p.steps[loc].extend(instrs)
    return p


def _first_outcome_at(program, loc) -> str:
    for ins in program.steps[loc]:
        for sub in [ins, *getattr(ins, "then", []), *getattr(ins, "orelse", [])]:
            if isinstance(sub, MeasureBell):
                return sub.out
    raise LookupError(loc)


def _without_call_sends(program):
    """Drop the automatic call-bit broadcasts so deeper read checks are exercised."""
    p = program.copy()
    for loc in p.steps:
        p.steps[loc] = [i for i in p.steps[loc] if not (isinstance(i, Send) and i.item.startswith("call:"))]
    return p


def mutations():
    """(name, thunk); each thunk must raise CausalityViolation or Unsupported."""
    t3 = C.transitive(3)
    rails = B.build_rails(t3)
    cyc = C.THREE_CYCLE
    one_way_square = G.CausalGraph.from_edges(4, [(0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2), (3, 0)])

    def bounce_oriented():
        pb = ProgramBuilder(t3, "bounce", ("A",))
        B.bounce(pb, t3, "A", 0, 1)

    def check(program, g):
        return lambda: check_causality(program, g)

    late = t3.with_flags(start_in_past=False, start_precedes_all_returns=False)
    outcome_c2 = _first_outcome_at(rails, Call(1))
    two_sources_missing = G.CausalGraph.from_edges(4, [(1, 0), (1, 2), (3, 2)])
    s_set_prog = B.build_entanglement_s_set(t3)
    reversed_t3 = G.CausalGraph.from_edges(3, [(1, 0), (0, 2), (1, 2)])

    def teleport_free_move():
        # output at r1 a qudit that was left sitting at c3
        prog = _with(rails, Return(0), Output("ghost", "A"), front=True)
        prog.steps[PAST][:0] = [BellPair("ghost", "ghost'"), Send("ghost", Call(2))]
        run(prog, _task(t3), CallPattern((0, 1)))

    return [
        ("rails corrections on the 3-cycle", check(rails, cyc)),
        ("rails reads on the 3-cycle without call broadcasts", check(_without_call_sends(rails), cyc)),
        ("global program reads without call broadcasts, edge removed",
         check(_without_call_sends(B.build_global_two_sources(C.TWO_SOURCES)), two_sources_missing)),
        ("rails builder on the 3-cycle", lambda: B.build_rails(cyc)),
        ("bounce without a bidirected edge", bounce_oriented),
        ("call bit sent to a non-successor", check(_with(rails, Call(2), Send(call_name(2), Return(0))), t3)),
        ("branch on an unreachable call", check(_with(rails, Return(0), Branch(Called(2), [], [])), t3)),
        ("correction with an outcome from outside the past",
         check(_with(rails, Return(0), Correct("A", teleport_terms(outcome_c2))), t3)),
        ("return point sends to a call point", check(_with(rails, Return(0), Send("A", Call(1))), t3)),
        ("call point sends to another call point", check(_with(rails, Call(0), Send("A", Call(1))), t3)),
        ("start sends to a call it does not precede", check(rails, late.with_flags(start_precedes_all_returns=True))),
        ("late start wrapped around a start after a return", lambda: B.relax_start_point(rails, late)),
        ("start point relaxed twice", lambda: B.relax_start_point(B.relax_start_point(rails))),
        ("square program with one one-way edge", check(B.build_square(C.SQUARE), one_way_square)),
        ("square builder on a one-way edge", lambda: B.build_square(one_way_square)),
        ("four-diamond global program with an edge removed", check(B.build_global_two_sources(C.TWO_SOURCES), two_sources_missing)),
        ("entanglement program with an edge reversed", check(s_set_prog, reversed_t3)),
        ("qudit used where it never arrived", teleport_free_move),
    ]


def criterion_6() -> tuple[bool, str]:
    cases = mutations()
    escaped = []
    for name, thunk in cases:
        try:
            thunk()
        except (CausalityViolation, Unsupported):
            continue
        except Exception as exc:  # any other failure is not a clean rejection
            escaped.append(f"{name}: {type(exc).__name__}")
            continue
        escaped.append(f"{name}: accepted")
    return len(cases) >= 10 and not escaped, f"{len(cases) - len(escaped)}/{len(cases)} rejected" + (
        f"; escaped: {escaped}" if escaped else "")


# -- criterion 7: two calls on the single-system subroutine ---------------------------------------

def first_caller_fidelity(program, task: TaskSpec, j: int, k: int) -> float:
    """Worst branch fidelity of the input at Return(j) when both j and k are called."""
    t = run(program, task, CallPattern(tuple(sorted((j, k)))), coherent=True, allow_double=True)
    outs = t.output_refs.get(j, [])
    if len(outs) != 1:
        return 0.0
    st = t.state
    _, fids = st.branch_fidelities([outs[0], t.references[input_label("A")]], bell_vector(t.p), st.records)
    return float(fids.min())


def criterion_7() -> tuple[bool, str]:
    worst, count = 1.0, 0
    for n in range(2, 5):
        for g in G.enumerate_graphs(n):
            if not G.is_tournament(g):
                continue
            program = B.build_single_system(g)
            task = TaskSpec(Kind.SINGLE, Assistance.NONE, g)
            for j, k in g.edges():
                worst = min(worst, first_caller_fidelity(program, task, j, k))
                count += 1
    return worst >= 1 - TOL, f"{count} ordered patterns, worst fidelity {worst:.12f}"


# -- criterion 8: labels do not help entanglement summoning ---------------------------------------

def s_sets_are_tournaments(g) -> bool:
    """Every S_j (diamonds with no edge into j) is pairwise connected, from raw adjacency."""
    a = g.adj
    for j in range(g.n):
        s = [i for i in range(g.n) if i != j and not a[i][j]]
        if any(not (a[x][y] or a[y][x]) for x, y in itertools.combinations(s, 2)):
            return False
    return True


def criterion_8() -> tuple[bool, str]:
    bad, count = [], 0
    for n in range(2, 6):
        for g in G.enumerate_graphs(n):
            count += 1
            plain = decide(TaskSpec(Kind.ENTANGLEMENT, Assistance.NONE, g)).status is Status.ACHIEVABLE
            label = decide(TaskSpec(Kind.ENTANGLEMENT, Assistance.LABEL, g)).status is Status.ACHIEVABLE
            if plain != label or label != s_sets_are_tournaments(g):
                bad.append(str(g))
    return not bad, f"{count} oriented graphs, n=2..5" + (f"; mismatches: {bad[:5]}" if bad else "")


CRITERIA = [
    ("C1 protocol exactness", criterion_1),
    ("C2 characterization census n<=6", criterion_2),
    ("C3 decider soundness n<=4", criterion_3),
    ("C4 named verdicts", criterion_4),
    ("C5 threshold codes", criterion_5),
    ("C6 causality mutation suite", criterion_6),
    ("C7 first caller gets the input", criterion_7),
    ("C8 entanglement: label equals unassisted", criterion_8),
]


def _check(index: int, record) -> None:
    name, fn = CRITERIA[index]
    start = time.perf_counter()
    ok, detail = fn()
    record(name, ok, f"{detail}; {time.perf_counter() - start:.1f}s")
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, detail


def test_c1_protocol_exactness(record_acceptance):
    _check(0, record_acceptance)


def test_c2_characterization_census(record_acceptance):
    _check(1, record_acceptance)


def test_c3_decider_soundness(record_acceptance):
    _check(2, record_acceptance)


def test_c4_named_verdicts(record_acceptance):
    _check(3, record_acceptance)


def test_c5_threshold_codes(record_acceptance):
    _check(4, record_acceptance)


def test_c6_causality_mutations(record_acceptance):
    _check(5, record_acceptance)


def test_c7_first_caller(record_acceptance):
    _check(6, record_acceptance)


def test_c8_entanglement_label(record_acceptance):
    _check(7, record_acceptance)


if __name__ == "__main__":
    failed = 0
    for name, fn in CRITERIA:
        ok, detail = fn()
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}", flush=True)
    sys.exit(1 if failed else 0)
