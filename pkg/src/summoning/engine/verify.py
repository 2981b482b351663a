"""Choi-certified verification of protocol programs over every call pattern.

Inputs enter maximally entangled with reference qudits, so fidelity 1 between
(output, reference) and a Bell pair certifies the identity channel on every
input state. Entanglement tasks compare the two returned qudits with a Bell
pair directly.

Outcome coverage comes in three strengths:

* ``sampled``: one seeded run per pattern.
* ``coherent``: measurements keep their results as records, so every outcome
  branch lives in one state; the minimum over branches is reported.
* ``affine``: used when coherent branching outgrows the row budget. All
  measurement results are uniform over F_p or deterministic, branches read
  only call inputs and corrections are affine in the results. The residual
  Pauli on the outputs is therefore affine in the free results, and checking
  one reference path plus a unit step in each free result covers every path.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from ..qudit import BranchLimitExceeded, SimulationError, bell_vector
from ..task import CallPattern, Kind, TaskSpec, enumerate_call_patterns
from .ir import CausalityViolation, Program, ProgramError, check_causality
from .runtime import Transcript, run, working_dimension

TOL = 1e-9


@dataclass
class PatternResult:
    pattern: str
    success: bool
    fidelity: float
    assignment: str | None = None
    messages: list[dict[str, str]] = field(default_factory=list)
    peak_qudits: int = 0
    method: str = "sampled"
    branches: int = 1
    error: str | None = None

    def to_json(self) -> dict[str, Any]:
        out = {
            "pattern": self.pattern,
            "success": self.success,
            "fidelity": round(self.fidelity, 12),
            "assignment": self.assignment,
            "messages": self.messages,
            "peak_qudits": self.peak_qudits,
            "method": self.method,
            "branches": self.branches,
        }
        if self.error:
            out["error"] = self.error
        return out


@dataclass
class VerificationResult:
    program: str
    task: str
    dimension: int
    patterns: list[PatternResult]

    @property
    def success(self) -> bool:
        return all(r.success for r in self.patterns)

    @property
    def failures(self) -> list[PatternResult]:
        return [r for r in self.patterns if not r.success]

    @property
    def min_fidelity(self) -> float:
        return min((r.fidelity for r in self.patterns), default=1.0)

    def to_json(self) -> dict[str, Any]:
        return {
            "program": self.program,
            "task": self.task,
            "dimension": self.dimension,
            "success": self.success,
            "patterns": [r.to_json() for r in self.patterns],
        }


class _Missing(Exception):
    pass


def _targets(task: TaskSpec, t: Transcript, pattern: CallPattern) -> list[tuple[str, list, np.ndarray]]:
    """Candidate (assignment, qudits, target vector) triples; the best one counts."""
    p = t.p
    outs = {}
    for j in pattern.calls:
        refs = t.output_refs.get(j, [])
        if len(refs) != 1:
            raise _Missing(f"return point {j + 1} produced {len(refs)} outputs")
        outs[j] = refs[0]
    if task.kind is Kind.SINGLE:
        (j,) = pattern.calls
        return [(f"A->{j + 1}", [outs[j], t.references["A"]], bell_vector(p))]
    j, k = pattern.calls
    if task.kind is Kind.ENTANGLEMENT:
        return [(f"pair->{j + 1},{k + 1}", [outs[j], outs[k]], bell_vector(p))]
    ra, rb = t.references["A"], t.references["B"]
    target = bell_vector(p, 2)
    return [
        (f"A->{j + 1},B->{k + 1}", [outs[j], ra, outs[k], rb], target),
        (f"A->{k + 1},B->{j + 1}", [outs[k], ra, outs[j], rb], target),
    ]


def _score(task: TaskSpec, t: Transcript, pattern: CallPattern, coherent: bool) -> tuple[float, str, int]:
    best = (-1.0, "", 1)
    st = t.state
    assert st is not None
    for name, qudits, target in _targets(task, t, pattern):
        if coherent:
            _, fids = st.branch_fidelities(qudits, target, st.records)
            fid, nb = float(fids.min()), int(fids.size)
        else:
            fid, nb = st.fidelity_with(qudits, target), 1
        if fid > best[0]:
            best = (fid, name, nb)
    return best


def certify(task: TaskSpec, t: Transcript, pattern: CallPattern) -> tuple[float, str]:
    """Best-assignment fidelity of one finished (sampled) run."""
    try:
        fid, name, _ = _score(task, t, pattern, False)
    except _Missing as exc:
        return 0.0, str(exc)
    return fid, name


class _Path:
    """Chooser that replays a fixed outcome path and logs each measurement's support."""

    def __init__(self, plan: Callable[[int, np.ndarray], int]) -> None:
        self.plan = plan
        self.supports: list[np.ndarray] = []
        self.values: list[int] = []

    def __call__(self, probs: np.ndarray) -> int:
        i = len(self.values)
        support = np.flatnonzero(probs)
        value = int(self.plan(i, support))
        self.supports.append(support)
        self.values.append(value)
        return value


def _affine(program: Program, task: TaskSpec, pattern: CallPattern) -> tuple[float, str, int, Transcript]:
    ref = _Path(lambda i, support: int(support[0]))
    t = run(program, task, pattern, chooser=ref)
    fid, name, _ = _score(task, t, pattern, False)
    worst = (fid, name)
    p = t.p
    free = [i for i, s in enumerate(ref.supports) if s.size > 1]
    for i in free:
        if ref.supports[i].size != p:
            raise SimulationError("a measurement outcome is neither uniform nor deterministic")

        def plan(step, support, i=i):
            if step < i:
                return ref.values[step]
            if step == i:
                return (ref.values[step] + 1) % p
            return ref.values[step] if support.size > 1 else int(support[0])

        dev = run(program, task, pattern, chooser=_Path(plan))
        fid, name, _ = _score(task, dev, pattern, False)
        if fid < worst[0]:
            worst = (fid, name)
    return worst[0], worst[1], len(free) + 1, t


def verify_pattern(program: Program, task: TaskSpec, pattern: CallPattern, seed: int = 0,
                   exhaustive: bool = False, coherent_rows: int = 200_000) -> PatternResult:
    method = "sampled"
    try:
        if exhaustive:
            try:
                t = run(program, task, pattern, seed=seed, coherent=True, max_rows=coherent_rows)
                fid, name, nb = _score(task, t, pattern, True)
                method = "coherent"
            except BranchLimitExceeded:
                fid, name, nb, t = _affine(program, task, pattern)
                method = "affine"
        else:
            t = run(program, task, pattern, seed=seed)
            fid, name, nb = _score(task, t, pattern, False)
    except (_Missing, SimulationError, CausalityViolation, ProgramError) as exc:
        return PatternResult(str(pattern), False, 0.0, method=method, error=str(exc))
    return PatternResult(str(pattern), fid >= 1 - TOL, fid, name, t.messages, t.peak_qudits, method, nb)


def _one(args) -> PatternResult:
    return verify_pattern(*args)


def verify(program: Program, task: TaskSpec, seed: int = 0, exhaustive: bool = False, jobs: int = 1,
           patterns: list[CallPattern] | None = None) -> VerificationResult:
    """Run ``program`` on every call pattern of ``task`` and certify each output.

    Static acausality raises; a runtime miss in one pattern (a qudit or value
    that never reaches the location reading it) fails that pattern.

    :raises CausalityViolation: if the program is acausal for the task graph.
    """
    check_causality(program, task.graph)
    patterns = enumerate_call_patterns(task) if patterns is None else patterns
    work = [(program, task, pat, seed, exhaustive) for pat in patterns]
    if jobs > 1 and len(work) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_one, work))
    else:
        results = [_one(w) for w in work]
    return VerificationResult(program.name, task.name, working_dimension(task, program), results)
