import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import causal_graphs
from summoning import catalog as C
from summoning.task import (
    Assistance, CallPattern, Kind, TaskError, TaskSpec, call_values, enumerate_call_patterns, is_prime, load_task,
    parse_pattern, parse_task, serialize_task, validate_pattern,
)

TASKS = Path(__file__).resolve().parents[1] / "tasks"


def _doc(**over):
    doc = {"kind": "two-system", "assistance": "none", "graph": {"n": 3, "edges": [[1, 2], [2, 3], [3, 1]]}}
    doc.update(over)
    return doc


def test_parse_graph_task():
    task = parse_task(_doc(name="cycle"))
    assert task.name == "cycle"
    assert task.graph.adj == C.THREE_CYCLE.adj
    assert task.inputs == ("A", "B")
    assert task.dimension == 2


def test_parse_geometry_task():
    task = load_task((TASKS / "triangle-geometry.json").read_text())
    assert task.graph.adj == C.THREE_CYCLE.adj
    assert task.geometry is not None


@pytest.mark.parametrize("doc,needle", [
    (_doc(colour="red"), "unknown key"),
    (_doc(kind="three-system"), "task.kind"),
    (_doc(dimension=4), "prime"),
    (_doc(graph={"n": 2, "edges": [[1, 3]]}), "out of range"),
    (_doc(graph={"n": 2, "edges": [[1]]}), "graph.edges[0]"),
    (_doc(graph={"n": 0}), "graph.n"),
    (_doc(graph={"n": 2, "start_in_past": "yes"}), "true/false"),
    ({"kind": "single", "assistance": "none"}, "exactly one of"),
    ({"kind": "single", "graph": {"n": 1}}, "assistance"),
])
def test_parse_errors_name_the_key(doc, needle):
    with pytest.raises(TaskError) as err:
        parse_task(doc)
    assert needle in str(err.value)


def test_json_errors_report_line_and_column():
    with pytest.raises(TaskError, match="line 2"):
        load_task('{\n  "kind": }')


def test_inconsistent_start_flags_are_rejected():
    with pytest.raises(TaskError):
        parse_task(_doc(graph={"n": 2, "start_in_past": True, "start_precedes_returns": False}))


def test_single_system_drops_assistance():
    task = TaskSpec(Kind.SINGLE, Assistance.LABEL, C.THREE_CYCLE)
    assert task.assistance is Assistance.NONE


def test_is_prime():
    assert [p for p in range(20) if is_prime(p)] == [2, 3, 5, 7, 11, 13, 17, 19]


@pytest.mark.parametrize("kind,assistance,count", [
    (Kind.SINGLE, Assistance.NONE, 4),
    (Kind.TWO_SYSTEM, Assistance.NONE, 6),
    (Kind.TWO_SYSTEM, Assistance.LABEL, 12),
    (Kind.TWO_SYSTEM, Assistance.GLOBAL, 6),
    (Kind.ENTANGLEMENT, Assistance.NONE, 6),
])
def test_pattern_counts(kind, assistance, count):
    task = TaskSpec(kind, assistance, C.transitive(4))
    patterns = enumerate_call_patterns(task)
    assert len(patterns) == count == len(set(patterns))
    for p in patterns:
        validate_pattern(task, p)


def test_call_values_per_assistance():
    g = C.transitive(3)
    pat = CallPattern((2, 0), ordered=True)
    assert call_values(TaskSpec(Kind.TWO_SYSTEM, Assistance.LABEL, g), pat) == [2, 0, 1]
    glob = CallPattern((0, 2))
    assert call_values(TaskSpec(Kind.TWO_SYSTEM, Assistance.GLOBAL, g), glob) == [(0, 2), 0, (0, 2)]
    assert call_values(TaskSpec(Kind.TWO_SYSTEM, Assistance.NONE, g), glob) == [1, 0, 1]


def test_parse_pattern():
    label = TaskSpec(Kind.TWO_SYSTEM, Assistance.LABEL, C.THREE_CYCLE)
    assert parse_pattern(label, "3,1") == CallPattern((2, 0), ordered=True)
    plain = TaskSpec(Kind.TWO_SYSTEM, Assistance.NONE, C.THREE_CYCLE)
    assert parse_pattern(plain, "3,1") == CallPattern((0, 2))
    assert str(parse_pattern(label, "3,1")) == "3>1"
    for bad in ("1", "1,1", "1,4", "x"):
        with pytest.raises(TaskError):
            parse_pattern(plain, bad)


def test_two_calls_on_single_system_need_opt_in():
    task = TaskSpec(Kind.SINGLE, Assistance.NONE, C.transitive(3))
    with pytest.raises(TaskError):
        validate_pattern(task, CallPattern((0, 1)))
    validate_pattern(task, CallPattern((0, 1)), allow_double=True)
    validate_pattern(task, CallPattern(()), allow_empty=True)


def test_unordered_patterns_must_be_sorted():
    task = TaskSpec(Kind.TWO_SYSTEM, Assistance.NONE, C.transitive(3))
    with pytest.raises(TaskError):
        validate_pattern(task, CallPattern((1, 0)))
    with pytest.raises(TaskError):
        validate_pattern(task, CallPattern((0, 1), ordered=True))


def test_shipped_task_files_load():
    names = sorted(p.name for p in TASKS.glob("*.json"))
    assert len(names) >= 10
    for path in TASKS.glob("*.json"):
        load_task(path.read_text())


kinds = st.sampled_from(list(Kind))
assists = st.sampled_from(list(Assistance))


@settings(max_examples=40, deadline=None)
@given(causal_graphs(max_n=5, bidirected=True), kinds, assists, st.sampled_from([2, 3, 5]), st.booleans())
def test_serialization_round_trip(g, kind, assistance, dim, late):
    g = g.with_flags(start_in_past=not late)
    task = TaskSpec(kind, assistance, g, dim, "t")
    again = parse_task(json.loads(json.dumps(serialize_task(task))))
    assert again == task


def test_geometry_round_trip():
    task = load_task((TASKS / "triangle-geometry.json").read_text())
    again = parse_task(serialize_task(task))
    assert again.graph == task.graph and again.geometry == task.geometry
