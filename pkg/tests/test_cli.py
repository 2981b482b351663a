import csv
import io
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from summoning import census
from summoning import graph as G
from summoning.achievability import Witness, check_witness, decide
from summoning.cli import _class_rows, _labeled_rows, graph_text, main
from summoning.task import Assistance, Kind, TaskSpec

TASKS = Path(__file__).resolve().parents[1] / "tasks"

EXPECTED_EXIT = {
    "three-cycle-two-system": 2,
    "three-cycle-label": 0,
    "three-cycle-single": 0,
    "two-out-entanglement": 2,
    "transitive-4": 0,
    "two-sources-global": 0,
    "square": 0,
    "pentagon-entanglement": 3,
    "triangle-entanglement": 0,
    "triangle-geometry": 0,
}


def invoke(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


def task(name):
    return TASKS / f"{name}.json"


@pytest.mark.parametrize("name,code", sorted(EXPECTED_EXIT.items()))
def test_check_exit_codes(name, code):
    result = invoke("check", task(name))
    assert result.exit_code == code, result.output
    doc = json.loads(result.stdout)
    assert doc["status"] == {0: "achievable", 2: "unachievable", 3: "unknown"}[code]


def test_check_writes_the_report_file(tmp_path):
    out = tmp_path / "report.json"
    assert invoke("check", task("square"), "--out", out).exit_code == 0
    assert json.loads(out.read_text())["plan"]["builder"] == "square"


def test_simulate_is_deterministic():
    a = invoke("simulate", task("square"), "--calls", "1,3", "--seed", 7)
    b = invoke("simulate", task("square"), "--calls", "1,3", "--seed", 7)
    assert a.exit_code == 0 and a.stdout == b.stdout
    doc = json.loads(a.stdout)
    assert doc["pattern"] == "1,3" and doc["dimension"] == 5


def test_simulate_rejects_bad_calls():
    result = invoke("simulate", task("three-cycle-label"), "--calls", "1")
    assert result.exit_code == 1
    assert "exactly 2" in result.output


def test_simulate_on_a_no_go_task():
    assert invoke("simulate", task("three-cycle-two-system"), "--calls", "1,2").exit_code == 2


@pytest.mark.parametrize("name", ["three-cycle-label", "transitive-4", "triangle-entanglement"])
def test_verify_passes(name, tmp_path):
    out = tmp_path / "v.json"
    result = invoke("verify", task(name), "--exhaustive-outcomes", "--out", out)
    assert result.exit_code == 0, result.output
    assert json.loads(out.read_text())["success"]


def test_verify_output_is_byte_identical(tmp_path):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p, jobs in zip(paths, (1, 2)):
        assert invoke("verify", task("two-sources-global"), "--seed", 3, "--jobs", jobs, "--out", p).exit_code == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_verify_catches_a_flipped_square_share():
    result = invoke("verify", task("square"), "--mutate-square", "a1")
    assert result.exit_code == 4
    assert "FAILED pattern" in result.output


def test_verify_on_unknown_task():
    assert invoke("verify", task("pentagon-entanglement")).exit_code == 3


def test_graph_dot():
    result = invoke("graph", task("square"))
    assert result.exit_code == 0
    assert result.stdout.count("dir=both") == 4
    assert result.stdout.count("[label=") == 4
    cycle = invoke("graph", task("triangle-geometry")).stdout
    assert cycle.count("->") == 3 and "dir=both" not in cycle


def test_graph_dot_to_file(tmp_path):
    out = tmp_path / "g.dot"
    assert invoke("graph", task("two-sources-global"), "--dot", out).exit_code == 0
    assert out.read_text().startswith("digraph")


@pytest.mark.parametrize("n,rows", [(3, 27), (4, 729)])
def test_enumerate_csv(n, rows, tmp_path):
    out = tmp_path / "e.csv"
    result = invoke("enumerate", "--n", n, "--kind", "two-system", "--out", out)
    assert result.exit_code == 0
    table = list(csv.DictReader(io.StringIO(out.read_text())))
    assert len(table) == rows
    assert list(table[0]) == ["n", "graph", "canonical", "status", "builder", "witness", "verified"]


def test_enumerate_with_simulation():
    result = invoke("enumerate", "--n", 3, "--kind", "entanglement", "--simulate", "--format", "json")
    assert result.exit_code == 0
    doc = json.loads(result.stdout)
    assert doc["counts"] == {"achievable": 17, "unachievable": 10, "unknown": 0}
    assert {r["verified"] for r in doc["rows"] if r["status"] == "achievable"} == {"pass"}


def test_enumerate_bounds():
    assert invoke("enumerate", "--n", 9, "--kind", "single").exit_code != 0


def test_bad_files():
    r = CliRunner().invoke(main, ["check", "/nonexistent/task.json"])
    assert r.exit_code == 1 and "cannot read" in r.output
    with CliRunner().isolated_filesystem():
        Path("bad.json").write_text("{\n")
        r = CliRunner().invoke(main, ["check", "bad.json"])
        assert r.exit_code == 1 and "line 2" in r.output
        Path("odd.json").write_text(json.dumps({"kind": "single", "assistance": "none", "graph": {"n": 0}}))
        r = CliRunner().invoke(main, ["check", "odd.json"])
        assert r.exit_code == 1 and "graph.n" in r.output


@pytest.mark.parametrize("kind,assistance,bidirected", [
    (Kind.TWO_SYSTEM, Assistance.NONE, True),
    (Kind.TWO_SYSTEM, Assistance.LABEL, False),
    (Kind.TWO_SYSTEM, Assistance.GLOBAL, True),
    (Kind.ENTANGLEMENT, Assistance.NONE, True),
    (Kind.SINGLE, Assistance.NONE, False),
])
def test_enumeration_rows_match_direct_decisions(kind, assistance, bidirected):
    table = census.orbit_table(4, bidirected)
    rows = _labeled_rows(table, _class_rows(table, kind, assistance))
    for g, (digits, row) in zip(G.enumerate_graphs(4, allow_bidirected=bidirected), rows):
        assert tuple(digits) == g.pair_states() and row[1] == graph_text(g)
        assert row[2] == graph_text(G.canonical(g))
        task = TaskSpec(kind, assistance, g)
        v = decide(task)
        assert row[3] == v.status.value
        assert row[4] == (v.plan.builder if v.plan else "")
        if row[5]:
            wkind, vs = row[5].split(":")
            w = Witness(wkind, tuple(int(x) - 1 for x in vs.split(",") if x), v.witness.triple_class)
            assert check_witness(task, w)


def test_orbit_table_counts():
    # oriented graph classes (OEIS A001174) and digraph classes (A000273)
    assert [len(census.orbit_table(n).reps) for n in range(1, 6)] == [1, 2, 7, 42, 582]
    assert [len(census.orbit_table(n, bidirected=True).reps) for n in range(1, 5)] == [1, 3, 16, 218]
