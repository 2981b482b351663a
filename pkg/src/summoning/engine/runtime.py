"""Interpreter for protocol programs on the qudit simulator."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from ..qudit import SWAP, Chooser, CssCode, Record, SimState, cgl_decode, cgl_encode
from ..task import CallPattern, TaskSpec, call_values, validate_pattern
from .ir import (
    Alloc,
    BellPair,
    Branch,
    CausalityViolation,
    Correct,
    Decode,
    Encode,
    Location,
    Measure,
    MeasureBell,
    Output,
    Program,
    ProgramError,
    Send,
    Swap,
    call_name,
    check_causality,
    locations,
    precedes,
)


def next_prime(m: int) -> int:
    p = max(2, m)
    while any(p % d == 0 for d in range(2, int(p**0.5) + 1)):
        p += 1
    return p


def working_dimension(task: TaskSpec, program: Program) -> int:
    """Smallest prime at least the task dimension and the program's code requirement."""
    return next_prime(max(task.dimension, program.min_dimension))


def input_label(name: str) -> str:
    return name.split("@")[0]


@dataclass
class Transcript:
    pattern: CallPattern
    p: int
    steps: list[str] = field(default_factory=list)
    messages: list[dict[str, str]] = field(default_factory=list)
    outcomes: dict[str, Any] = field(default_factory=dict)
    outputs: dict[int, list[tuple[str, str | None]]] = field(default_factory=dict)
    peak_qudits: int = 0
    state: SimState | None = None
    output_refs: dict[int, list[Any]] = field(default_factory=dict)
    references: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        def plain(v):
            if isinstance(v, tuple):
                return [plain(x) for x in v]
            return "coherent" if isinstance(v, Record) else v

        return {
            "pattern": str(self.pattern),
            "dimension": self.p,
            "steps": list(self.steps),
            "messages": list(self.messages),
            "outcomes": {k: plain(v) for k, v in self.outcomes.items()},
            "outputs": {str(j + 1): [{"qudit": q, "label": lab} for q, lab in outs]
                        for j, outs in sorted(self.outputs.items())},
            "peak_qudits": self.peak_qudits,
        }


class _Machine:
    def __init__(self, program: Program, task: TaskSpec, pattern: CallPattern, state: SimState) -> None:
        self.program = program
        self.task = task
        self.graph = task.graph
        self.state = state
        self.t = Transcript(pattern, state.p, state=state)
        self.where: dict[str, Location] = {}  # qudit name -> location
        self.refs: dict[str, Any] = {}  # materialized qudit handles
        self.pending: dict[str, tuple] = {}  # declared but not yet simulated
        self.values: dict[Location, dict[str, Any]] = {loc: {} for loc in locations(program.n)}
        self.calls = call_values(task, pattern)

    # -- qudit access -----------------------------------------------------

    def _bind(self, name: str, loc: Location) -> None:
        if name in self.where:
            raise ProgramError(f"{loc}: qudit name {name!r} is already in use")
        self.where[name] = loc

    def _at(self, name: str, loc: Location) -> None:
        if name not in self.where:
            raise ProgramError(f"{loc}: unknown qudit {name!r}")
        if self.where[name] != loc:
            raise CausalityViolation(f"{loc}: qudit {name!r} is at {self.where[name]}, not here")

    def _touch(self, name: str, loc: Location):
        """Handle for a qudit at ``loc``, creating declared resources on first use."""
        self._at(name, loc)
        if name in self.pending:
            kind = self.pending.pop(name)
            if kind[0] == "pair":
                partner = kind[1]
                self.pending.pop(partner, None)
                a, b = self.state.bell_pair()
                self.refs[name], self.refs[partner] = a, b
            else:
                self.refs[name] = self.state.alloc()[0]
        return self.refs[name]

    def _drop(self, name: str) -> None:
        del self.where[name]
        self.refs.pop(name, None)

    # -- classical access -------------------------------------------------

    def _call(self, loc: Location):
        env = self.values[loc]

        def value(j: int):
            key = call_name(j)
            if key not in env:
                raise CausalityViolation(f"{loc}: call input of diamond {j + 1} is not available here")
            return env[key]

        return value

    def _outcome(self, loc: Location, name: str):
        env = self.values[loc]
        if name not in env:
            raise CausalityViolation(f"{loc}: outcome {name!r} has not reached this location")
        return env[name]

    # -- execution --------------------------------------------------------

    def run(self) -> Transcript:
        prog = self.program
        for name in prog.inputs:
            ref, inp = self.state.bell_pair()
            self.t.references[input_label(name)] = ref
            self.refs[name] = inp
            self._bind(name, prog.input_location)
        for loc in locations(prog.n):
            if loc.kind == 2:
                self.values[loc][call_name(loc.j)] = self.calls[loc.j]
            self._exec(loc, prog.steps.get(loc, []))
        self.t.peak_qudits = self.state.peak
        self.t.output_refs = {j: [self.refs.get(q) for q, _ in outs] for j, outs in self.t.outputs.items()}
        return self.t

    def _log(self, loc: Location, text: str) -> None:
        self.t.steps.append(f"{loc}: {text}")

    def _exec(self, loc: Location, instrs) -> None:
        for ins in instrs:
            self._step(loc, ins)

    def _step(self, loc: Location, ins) -> None:
        st = self.state
        if isinstance(ins, Branch):
            taken = ins.cond.evaluate(self._call(loc))
            self._exec(loc, ins.then if taken else ins.orelse)
        elif isinstance(ins, BellPair):
            if loc.kind != 0:
                raise ProgramError(f"{loc}: shared pairs are prepared in the past")
            self._bind(ins.first, loc)
            self._bind(ins.second, loc)
            self.pending[ins.first] = ("pair", ins.second)
            self.pending[ins.second] = ("pair", ins.first)
            self._log(loc, f"pair {ins.first},{ins.second}")
        elif isinstance(ins, Alloc):
            self._bind(ins.name, loc)
            self.pending[ins.name] = ("alloc",)
        elif isinstance(ins, Send):
            self._send(loc, ins)
        elif isinstance(ins, MeasureBell):
            a = self._touch(ins.system, loc)
            b = self._touch(ins.half, loc)
            result = st.measure_bell(a, b)
            self._drop(ins.system)
            self._drop(ins.half)
            self._record(loc, ins.out, result)
            self._log(loc, f"bell {ins.system},{ins.half} -> {ins.out}")
        elif isinstance(ins, Measure):
            q = self._touch(ins.q, loc)
            result = (st.measure(q),)
            self._drop(ins.q)
            self._record(loc, ins.out, result)
            self._log(loc, f"measure {ins.q} -> {ins.out}")
        elif isinstance(ins, Correct):
            q = self._touch(ins.q, loc)
            xs, zs = [], []
            for term in ins.terms:
                if term.when.evaluate(self._call(loc)):
                    value = self._outcome(loc, term.outcome)[term.part]
                    (xs if term.axis == "x" else zs).append((value, term.coef))
            st.correct(q, xs, zs)
            if xs or zs:
                self._log(loc, f"correct {ins.q}")
        elif isinstance(ins, Swap):
            st.apply_gate(SWAP, [self._touch(ins.a, loc), self._touch(ins.b, loc)])
            self._log(loc, f"swap {ins.a},{ins.b}")
        elif isinstance(ins, Encode):
            code = CssCode(ins.k, st.p)
            shares = cgl_encode(st, self._touch(ins.q, loc), code)
            self._drop(ins.q)
            for name, ref in zip(ins.shares, shares):
                self._bind(name, loc)
                self.refs[name] = ref
            self._log(loc, f"encode {ins.q} -> {','.join(ins.shares)}")
        elif isinstance(ins, Decode):
            code = CssCode(ins.k, st.p)
            refs = [self._touch(s, loc) for s in ins.shares]
            out = cgl_decode(st, refs, ins.positions, code)
            for s in ins.shares:
                self._drop(s)
            self._bind(ins.out, loc)
            self.refs[ins.out] = out
            self._log(loc, f"decode {','.join(ins.shares)} -> {ins.out}")
        elif isinstance(ins, Output):
            if loc.kind != 3:
                raise ProgramError(f"{loc}: outputs happen at return points only")
            self._touch(ins.q, loc)
            self.t.outputs.setdefault(loc.j, []).append((ins.q, ins.label))
            self._log(loc, f"return {ins.q}" + (f" as {ins.label}" if ins.label else ""))
        else:
            raise ProgramError(f"{loc}: unknown instruction {ins!r}")

    def _record(self, loc: Location, name: str, result: tuple) -> None:
        if name in self.t.outcomes:
            raise ProgramError(f"{loc}: outcome name {name!r} produced twice")
        self.t.outcomes[name] = result
        self.values[loc][name] = result

    def _send(self, loc: Location, ins: Send) -> None:
        if not precedes(self.graph, loc, ins.dst):
            raise CausalityViolation(f"{loc}: send of {ins.item!r} to {ins.dst} leaves the causal future")
        env = self.values[loc]
        if ins.item in self.where:
            self._at(ins.item, loc)
            new = ins.rename or ins.item
            del self.where[ins.item]
            self._bind(new, ins.dst)
            if new != ins.item:
                for table in (self.refs, self.pending):
                    if ins.item in table:
                        table[new] = table.pop(ins.item)
                for other, kind in list(self.pending.items()):
                    if kind[0] == "pair" and kind[1] == ins.item:
                        self.pending[other] = ("pair", new)
            kind = "quantum"
        elif ins.item in env:
            if ins.rename:
                raise ProgramError(f"{loc}: classical values keep their names")
            self.values[ins.dst][ins.item] = env[ins.item]
            kind = "classical"
        else:
            raise CausalityViolation(f"{loc}: {ins.item!r} is not available here")
        self.t.messages.append({"src": str(loc), "dst": str(ins.dst), "kind": kind, "item": ins.item})


def run(program: Program, task: TaskSpec, pattern: CallPattern, seed: int = 0, coherent: bool = False,
        chooser: Chooser | None = None, max_rows: int = 3_000_000, allow_empty: bool = False, allow_double: bool = False) -> Transcript:
    """Execute ``program`` for one call pattern.

    Inputs are prepared maximally entangled with reference qudits (returned in
    ``Transcript.references``), so one run certifies the map on all inputs.

    :raises CausalityViolation: if the program moves or reads information acausally.
    """
    validate_pattern(task, pattern, allow_empty=allow_empty, allow_double=allow_double)
    check_causality(program, task.graph)
    expected = tuple(task.inputs)
    got = tuple(input_label(n) for n in program.inputs)
    if got != expected:
        raise ProgramError(f"program inputs {got} do not match the task inputs {expected}")
    state = SimState(working_dimension(task, program), seed=seed, coherent=coherent, chooser=chooser,
                     max_rows=max_rows)
    return _Machine(program, task, pattern, state).run()

