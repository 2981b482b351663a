"""Command-line interface: check, simulate, verify, enumerate, graph.

Exit codes: 0 achievable / success, 1 input error, 2 unachievable,
3 unknown, 4 verification failure.
"""

from __future__ import annotations

import concurrent.futures
import csv
import io
import json
import re
import sys
from pathlib import Path
from typing import Any

import click

from . import census
from . import graph as G
from .achievability import Status, Verdict, check_witness, decide
from .engine import builders
from .engine.ir import CausalityViolation, ProgramError, Unsupported
from .engine.plan import build_plan
from .engine.runtime import run
from .engine.verify import certify, verify
from .graph import CausalGraph, GraphError
from .task import Assistance, Kind, TaskError, TaskSpec, load_task, parse_pattern

EXIT = {Status.ACHIEVABLE: 0, Status.UNACHIEVABLE: 2, Status.UNKNOWN: 3}
VERIFY_FAILED = 4
CSV_COLUMNS = ["n", "graph", "canonical", "status", "builder", "witness", "verified"]


class _Fail(click.ClickException):
    exit_code = 1

    def show(self, file=None) -> None:
        click.echo(f"error: {self.message}", err=True)


def _load(path: str) -> TaskSpec:
    try:
        return load_task(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise _Fail(f"cannot read {path}: {exc.strerror}") from None
    except (TaskError, GraphError) as exc:
        raise _Fail(f"{path}: {exc}") from None


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=not text.endswith("\n"))


def _dump(doc: Any) -> str:
    return json.dumps(doc, indent=2) + "\n"


def graph_text(g: CausalGraph) -> str:
    """Compact 1-based edge list, e.g. ``1->2;2<->3``."""
    parts = []
    for i, j in G.pairs(g.n):
        a, b = g.adj[i][j], g.adj[j][i]
        if a and b:
            parts.append(f"{i + 1}<->{j + 1}")
        elif a:
            parts.append(f"{i + 1}->{j + 1}")
        elif b:
            parts.append(f"{j + 1}->{i + 1}")
    return ";".join(parts)


def _program(task: TaskSpec, verdict: Verdict, mutate: str | None = None):
    if verdict.status is not Status.ACHIEVABLE:
        click.echo(f"{verdict.status.value}: {verdict.reason}", err=True)
        sys.exit(EXIT[verdict.status])
    plan = verdict.plan
    if mutate:
        if plan.builder != "square":
            raise _Fail("--mutate-square only applies to the square protocol")
        return builders.build_square(plan.graph, actions=_flip(mutate), routing=builders.SQUARE_TABLE)
    return build_plan(plan, task.graph)


def _flip(share: str) -> dict:
    """Square action table with the called/uncalled targets of one bounced share exchanged."""
    table = {}
    hit = False
    for j, rows in builders.SQUARE_TABLE.items():
        new = []
        for name, if_called, if_not in rows:
            if name == share and if_called:
                new.append((name, if_not, if_called))
                hit = True
            else:
                new.append((name, if_called, if_not))
        table[j] = tuple(new)
    if not hit:
        raise _Fail(f"no bounced share named {share!r}")
    return table


@click.group()
def main() -> None:
    """Summoning tasks on causal diamonds: decide, simulate and verify."""


@main.command()
@click.argument("taskfile")
@click.option("--out", type=click.Path(dir_okay=False), help="Write the report here instead of stdout.")
def check(taskfile: str, out: str | None) -> None:
    """Decide achievability of the task in TASKFILE."""
    task = _load(taskfile)
    try:
        verdict = decide(task)
    except TaskError as exc:
        raise _Fail(str(exc)) from None
    _emit(_dump({"task": task.name, "graph": graph_text(task.graph), **verdict.to_json()}), out)
    sys.exit(EXIT[verdict.status])


@main.command()
@click.argument("taskfile")
@click.option("--calls", required=True, help="1-based called diamonds, e.g. 1,3 (label tasks: label-1 diamond first).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False))
def simulate(taskfile: str, calls: str, seed: int, out: str | None) -> None:
    """Run the planned protocol once for one call pattern and print the transcript."""
    task = _load(taskfile)
    try:
        pattern = parse_pattern(task, calls)
        program = _program(task, decide(task))
        t = run(program, task, pattern, seed=seed)
        fidelity, assignment = certify(task, t, pattern)
    except (TaskError, Unsupported, ProgramError, CausalityViolation) as exc:
        raise _Fail(str(exc)) from None
    doc = {"program": program.name, **t.to_json(), "fidelity": round(fidelity, 12), "assignment": assignment}
    _emit(_dump(doc), out)


@main.command("verify")
@click.argument("taskfile")
@click.option("--exhaustive-outcomes", is_flag=True, help="Cover every measurement outcome, not one sample.")
@click.option("--jobs", type=click.IntRange(1), default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False))
@click.option("--mutate-square", hidden=True, help="Test hook: flip one bounced share of the square protocol.")
def verify_cmd(taskfile: str, exhaustive_outcomes: bool, jobs: int, seed: int, out: str | None,
               mutate_square: str | None) -> None:
    """Verify the planned protocol on every call pattern (exit 4 on any failure)."""
    task = _load(taskfile)
    try:
        program = _program(task, decide(task), mutate_square)
        result = verify(program, task, seed=seed, exhaustive=exhaustive_outcomes, jobs=jobs)
    except (TaskError, Unsupported, ProgramError, CausalityViolation) as exc:
        raise _Fail(str(exc)) from None
    _emit(_dump(result.to_json()), out)
    ok = len(result.patterns) - len(result.failures)
    click.echo(f"{ok}/{len(result.patterns)} patterns verified", err=True)
    for r in result.failures:
        click.echo(f"FAILED pattern {r.pattern}: fidelity {r.fidelity:.6f}" + (f" ({r.error})" if r.error else ""),
                   err=True)
    sys.exit(0 if result.success else VERIFY_FAILED)


def _class_rows(table: census.OrbitTable, kind: Kind, assistance: Assistance) -> list[tuple[str, Verdict, bool]]:
    """Canonical text, verdict and witness validity for each isomorphism class."""
    out = []
    for digits in table.reps:
        g = CausalGraph.from_pair_states(table.n, digits)
        task = TaskSpec(kind, assistance, g)
        v = decide(task)
        out.append((graph_text(g), v, v.witness is None or check_witness(task, v.witness)))
    return out


def _labeled_rows(table: census.OrbitTable, classes: list[tuple[str, Verdict, bool]]):
    """(pair states, CSV row) per labeled graph; verdicts come from the class, witnesses are relabeled."""
    n = table.n
    fragments = []
    for i, j in G.pairs(n):
        fragments.append(("", f"{i + 1}->{j + 1}", f"{j + 1}->{i + 1}", f"{i + 1}<->{j + 1}"))
    perms = table.perms.tolist()
    index = 0
    for chunk in census.state_chunks(n, table.bidirected):
        cls = table.class_of[index:index + len(chunk)].tolist()
        perm = table.perm_of[index:index + len(chunk)].tolist()
        for digits, c, q in zip(chunk.tolist(), cls, perm):
            text = ";".join(f[d] for f, d in zip(fragments, digits) if d)
            canon, v, ok = classes[c]
            witness = ""
            if v.witness is not None:
                p = perms[q]
                witness = v.witness.kind + ":" + ",".join(str(p[x] + 1) for x in v.witness.vertices)
                if not ok:
                    witness += ":INVALID"
            yield digits, [n, text, canon, v.status.value, v.plan.builder if v.plan else "", witness, ""]
        index += len(chunk)


def _simulate_row(args) -> str:
    n, digits, kind, assistance, exhaustive = args
    g = CausalGraph.from_pair_states(n, digits)
    task = TaskSpec(kind, assistance, g)
    v = decide(task)
    return "pass" if verify(build_plan(v.plan, g), task, exhaustive=exhaustive).success else "FAIL"


@main.command()
@click.option("--n", "n", type=click.IntRange(1, G.MAX_ENUM_N), required=True)
@click.option("--kind", type=click.Choice([k.value for k in Kind]), required=True)
@click.option("--assistance", type=click.Choice([a.value for a in Assistance]), default="none", show_default=True)
@click.option("--bidirected", is_flag=True, help="Allow bidirected pairs (n <= 4).")
@click.option("--simulate", "simulate_rows", is_flag=True, help="Verify every achievable row (n <= 4).")
@click.option("--exhaustive-outcomes", is_flag=True)
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="csv", show_default=True)
@click.option("--jobs", type=click.IntRange(1), default=1, show_default=True, help="Workers for --simulate.")
@click.option("--out", type=click.Path(dir_okay=False))
def enumerate(n: int, kind: str, assistance: str, bidirected: bool, simulate_rows: bool, exhaustive_outcomes: bool,
              fmt: str, jobs: int, out: str | None) -> None:
    """Classify every labeled graph on N diamonds."""
    if bidirected and n > 4:
        raise _Fail("bidirected enumeration is limited to n <= 4")
    if simulate_rows and n > 4:
        raise _Fail("--simulate is limited to n <= 4")
    k, a = Kind(kind), Assistance(assistance)
    if k is not Kind.SINGLE and n < 2:
        raise _Fail("two-call tasks need at least two diamonds")
    table = census.orbit_table(n, bidirected)
    rows = _labeled_rows(table, _class_rows(table, k, a))
    if simulate_rows:
        rows = list(rows)
        todo = [(d, r) for d, r in rows if r[3] == Status.ACHIEVABLE.value]
        work = [(n, d, k, a, exhaustive_outcomes) for d, _ in todo]
        if jobs > 1 and len(work) > 1:
            with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_simulate_row, work, chunksize=16))
        else:
            results = [_simulate_row(w) for w in work]
        for (_, r), res in zip(todo, results):
            r[6] = res
    counts = {s.value: 0 for s in Status}
    failed = False
    stream = open(out, "w", encoding="utf-8", newline="") if out else None
    sink = stream if stream is not None else click.get_text_stream("stdout")
    try:
        if fmt == "csv":
            writer = csv.writer(sink, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
        else:
            head = {"n": n, "kind": kind, "assistance": assistance, "bidirected": bidirected}
            sink.write(json.dumps(head, indent=2)[:-2] + ',\n  "rows": [')
        first = True
        for _, row in rows:
            counts[row[3]] += 1
            failed |= row[6] == "FAIL" or row[5].endswith(":INVALID")
            if fmt == "csv":
                writer.writerow(row)
            else:
                sink.write(("\n    " if first else ",\n    ") + json.dumps(dict(zip(CSV_COLUMNS, row))))
                first = False
        if fmt == "json":
            tail = {"graphs": sum(counts.values()), "counts": counts}
            sink.write("\n  ],\n" + json.dumps(tail, indent=2)[2:] + "\n")
    finally:
        if stream is not None:
            stream.close()
    summary = ", ".join(f"{s}={c}" for s, c in counts.items())
    click.echo(f"{sum(counts.values())} graphs: {summary}", err=True)
    if failed:
        sys.exit(VERIFY_FAILED)


@main.command("graph")
@click.argument("taskfile")
@click.option("--dot", "dot", type=click.Path(dir_okay=False), help="Write DOT here (default: stdout).")
def graph_cmd(taskfile: str, dot: str | None) -> None:
    """Render the causal graph of TASKFILE as DOT."""
    task = _load(taskfile)
    _emit(G.to_dot(task.graph, re.sub(r"\W", "_", task.name) or "causal"), dot)
