"""Protocol programs as data: locations, call conditions and instructions.

A program is a list of instructions per location. Quantum resources are named
strings; classical values (call inputs, measurement outcomes) are named too,
and every instruction names what it touches, so causality can be checked by
scanning the program rather than trusting each protocol.
"""

from __future__ import annotations

import contextlib
import copy
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator, Sequence

from ..graph import CausalGraph


class ProgramError(ValueError):
    """Malformed program (unknown names, outputs outside return points)."""


class CausalityViolation(RuntimeError):
    """An instruction would move or read information outside the causal future of its origin."""


class Unsupported(ValueError):
    """A builder was asked for a graph shape its construction does not cover."""


# -- locations ---------------------------------------------------------------

@dataclass(frozen=True, order=True)
class Location:
    kind: int  # PAST, START, CALL, RETURN in execution order
    j: int = -1

    def __str__(self) -> str:
        return {0: "past", 1: "s"}.get(self.kind) or f"{'cr'[self.kind - 2]}{self.j + 1}"


PAST = Location(0)
START = Location(1)


def Call(j: int) -> Location:
    return Location(2, j)


def Return(j: int) -> Location:
    return Location(3, j)


def precedes(graph: CausalGraph, a: Location, b: Location) -> bool:
    """Causal order between program locations for ``graph``."""
    if a == b or a.kind == 0:
        return True
    if a.kind == 1:
        if b.kind == 2:
            return graph.start_in_past
        if b.kind == 3:
            return graph.start_precedes_all_returns
        return False
    if a.kind == 2 and b.kind == 3:
        return a.j == b.j or graph.adj[a.j][b.j]
    return False


def locations(n: int) -> list[Location]:
    return [PAST, START, *(Call(j) for j in range(n)), *(Return(j) for j in range(n))]


def call_name(j: int) -> str:
    return f"call:{j}"


# -- conditions over call values --------------------------------------------

class Cond:
    """Predicate over the call values visible at a location."""

    def reads(self) -> set[int]:
        raise NotImplementedError

    def evaluate(self, value: Callable[[int], Any]) -> bool:
        raise NotImplementedError

    def __and__(self, other: "Cond") -> "Cond":
        return All((self, other))

    def __or__(self, other: "Cond") -> "Cond":
        return Any_((self, other))

    def __invert__(self) -> "Cond":
        return Not(self)


@dataclass(frozen=True)
class TrueCond(Cond):
    def reads(self) -> set[int]:
        return set()

    def evaluate(self, value) -> bool:
        return True

    def __str__(self) -> str:
        return "true"


ALWAYS = TrueCond()


@dataclass(frozen=True)
class Called(Cond):
    j: int

    def reads(self) -> set[int]:
        return {self.j}

    def evaluate(self, value) -> bool:
        return value(self.j) != 0

    def __str__(self) -> str:
        return f"called({self.j + 1})"


@dataclass(frozen=True)
class Label(Cond):
    """Call at ``j`` carries label ``label``; with the full tuple, label 1 is the smaller index."""

    j: int
    label: int

    def reads(self) -> set[int]:
        return {self.j}

    def evaluate(self, value) -> bool:
        v = value(self.j)
        if isinstance(v, tuple):
            return (self.j == min(v)) == (self.label == 1)
        return v == self.label

    def __str__(self) -> str:
        return f"label({self.j + 1})={self.label}"


@dataclass(frozen=True)
class Partner(Cond):
    """Diamond ``j`` was called and its call tuple names ``k`` as the other call."""

    j: int
    k: int

    def reads(self) -> set[int]:
        return {self.j}

    def evaluate(self, value) -> bool:
        v = value(self.j)
        if v == 0:
            return False
        if not isinstance(v, tuple):
            raise ProgramError("partner conditions need the call tuple")
        return self.k in v and self.k != self.j

    def __str__(self) -> str:
        return f"partner({self.j + 1})={self.k + 1}"


@dataclass(frozen=True)
class CountCalled(Cond):
    among: tuple[int, ...]
    count: int

    def reads(self) -> set[int]:
        return set(self.among)

    def evaluate(self, value) -> bool:
        return sum(value(j) != 0 for j in self.among) == self.count

    def __str__(self) -> str:
        return f"#called({','.join(str(j + 1) for j in self.among)})={self.count}"


@dataclass(frozen=True)
class Not(Cond):
    inner: Cond

    def reads(self) -> set[int]:
        return self.inner.reads()

    def evaluate(self, value) -> bool:
        return not self.inner.evaluate(value)

    def __str__(self) -> str:
        return f"not {self.inner}"


@dataclass(frozen=True)
class All(Cond):
    parts: tuple[Cond, ...]

    def reads(self) -> set[int]:
        return set().union(*(p.reads() for p in self.parts))

    def evaluate(self, value) -> bool:
        return all(p.evaluate(value) for p in self.parts)

    def __str__(self) -> str:
        return "(" + " and ".join(map(str, self.parts)) + ")" if self.parts else "true"


@dataclass(frozen=True)
class Any_(Cond):
    parts: tuple[Cond, ...]

    def reads(self) -> set[int]:
        return set().union(*(p.reads() for p in self.parts))

    def evaluate(self, value) -> bool:
        return any(p.evaluate(value) for p in self.parts)

    def __str__(self) -> str:
        return "(" + " or ".join(map(str, self.parts)) + ")" if self.parts else "false"


def none_called(among: Sequence[int]) -> Cond:
    return All(tuple(Not(Called(j)) for j in among))


# -- instructions --------------------------------------------------------------

@dataclass(frozen=True)
class Term:
    """One summand of a Pauli frame: ``coef * outcome[part]`` on the ``axis`` exponent."""

    outcome: str
    part: int  # 0 for the X-type result a, 1 for the Z-type result b
    axis: str  # "x" or "z"
    coef: int = 1
    when: Cond = ALWAYS

    def guarded(self, cond: Cond) -> "Term":
        when = cond if self.when is ALWAYS else All((cond, self.when))
        return Term(self.outcome, self.part, self.axis, self.coef, when)


def teleport_terms(outcome: str, when: Cond = ALWAYS) -> tuple[Term, Term]:
    """Frame left on the receiving half by a Bell measurement with result (a, b): X^a Z^-b."""
    return Term(outcome, 0, "x", 1, when), Term(outcome, 1, "z", -1, when)


@dataclass
class BellPair:
    """Declare a maximally entangled pair; only legal at the past location."""

    first: str
    second: str


@dataclass
class Alloc:
    name: str


@dataclass
class Send:
    item: str
    dst: Location
    rename: str | None = None


@dataclass
class MeasureBell:
    system: str
    half: str
    out: str


@dataclass
class Measure:
    q: str
    out: str


@dataclass
class Correct:
    q: str
    terms: tuple[Term, ...]


@dataclass
class Swap:
    a: str
    b: str


@dataclass
class Encode:
    """((k, 2k-1)) encode ``q`` into the named shares (positions 1..2k-1 in order)."""

    q: str
    shares: tuple[str, ...]
    k: int


@dataclass
class Decode:
    shares: tuple[str, ...]
    positions: tuple[int, ...]
    out: str
    k: int


@dataclass
class Output:
    q: str
    label: str | None = None  # which input the qudit carries, when known


@dataclass
class Branch:
    cond: Cond
    then: list = field(default_factory=list)
    orelse: list = field(default_factory=list)


Instruction = Any


def walk(instrs: Sequence[Instruction], conds: tuple[Cond, ...] = ()) -> Iterator[tuple[Instruction, tuple[Cond, ...]]]:
    """Every instruction with the branch conditions enclosing it (negated for else-parts)."""
    for ins in instrs:
        yield ins, conds
        if isinstance(ins, Branch):
            yield from walk(ins.then, conds + (ins.cond,))
            yield from walk(ins.orelse, conds + (Not(ins.cond),))


# -- programs ------------------------------------------------------------------

@dataclass
class Program:
    name: str
    n: int
    steps: dict[Location, list[Instruction]]
    inputs: tuple[str, ...] = ()
    input_location: Location = START
    min_dimension: int = 2
    relaxed: bool = False
    meta: dict[str, Any] = field(default_factory=dict)

    def copy(self) -> "Program":
        return copy.deepcopy(self)

    def instructions(self) -> Iterator[tuple[Location, Instruction, tuple[Cond, ...]]]:
        for loc in locations(self.n):
            for ins, conds in walk(self.steps.get(loc, [])):
                yield loc, ins, conds

    def count(self, kind: type) -> int:
        return sum(isinstance(ins, kind) for _, ins, _ in self.instructions())


def reads_of(ins: Instruction) -> tuple[set[int], set[str]]:
    """(call indices, outcome names) an instruction reads, excluding nested branches."""
    calls: set[int] = set()
    outcomes: set[str] = set()
    if isinstance(ins, Branch):
        calls |= ins.cond.reads()
    elif isinstance(ins, Correct):
        for t in ins.terms:
            calls |= t.when.reads()
            outcomes.add(t.outcome)
    return calls, outcomes


def check_causality(program: Program, graph: CausalGraph) -> None:
    """Static check: every transfer and every read respects the causal order of ``graph``.

    :raises CausalityViolation: naming the first offending instruction.
    """
    if graph.n != program.n:
        raise ProgramError(f"program is for {program.n} diamonds, task has {graph.n}")
    origin: dict[str, Location] = {}
    for loc, ins, _ in program.instructions():
        if isinstance(ins, (MeasureBell, Measure)):
            if ins.out in origin:
                raise ProgramError(f"outcome name {ins.out!r} is produced twice")
            origin[ins.out] = loc
        if isinstance(ins, BellPair) and loc != PAST:
            raise ProgramError(f"{loc}: shared pairs are prepared in the past")
        if isinstance(ins, Output) and loc.kind != 3:
            raise ProgramError(f"{loc}: outputs happen at return points only")
    for loc, ins, _ in program.instructions():
        if isinstance(ins, Send) and not precedes(graph, loc, ins.dst):
            raise CausalityViolation(f"{loc}: send of {ins.item!r} to {ins.dst} leaves the causal future")
        calls, outcomes = reads_of(ins)
        for j in sorted(calls):
            if not precedes(graph, Call(j), loc):
                raise CausalityViolation(f"{loc}: reads the call input of diamond {j + 1}, which cannot reach it")
        for o in sorted(outcomes):
            if o not in origin:
                raise ProgramError(f"{loc}: correction uses unknown outcome {o!r}")
            if not precedes(graph, origin[o], loc):
                raise CausalityViolation(f"{loc}: correction uses outcome {o!r} from {origin[o]}, outside its past")


# -- builder -------------------------------------------------------------------

class ProgramBuilder:
    """Imperative helper for constructing programs with nested branches."""

    def __init__(self, graph: CausalGraph, name: str, inputs: Sequence[str] = ()) -> None:
        self.graph = graph
        self.name = name
        self.inputs = tuple(inputs)
        self.steps: dict[Location, list[Instruction]] = {loc: [] for loc in locations(graph.n)}
        self._targets: dict[Location, list[list[Instruction]]] = {loc: [lst] for loc, lst in self.steps.items()}
        self._counter: dict[str, int] = {}
        self.min_dimension = 2
        self.meta: dict[str, Any] = {}

    def fresh(self, prefix: str) -> str:
        i = self._counter.get(prefix, 0)
        self._counter[prefix] = i + 1
        return f"{prefix}{i}" if i else prefix

    def emit(self, loc: Location, *instrs: Instruction) -> None:
        self._targets[loc][-1].extend(instrs)

    @contextlib.contextmanager
    def when(self, loc: Location, cond: Cond) -> Iterator[Branch]:
        br = Branch(cond)
        self.emit(loc, br)
        self._targets[loc].append(br.then)
        try:
            yield br
        finally:
            self._targets[loc].pop()

    @contextlib.contextmanager
    def otherwise(self, loc: Location, br: Branch) -> Iterator[Branch]:
        self._targets[loc].append(br.orelse)
        try:
            yield br
        finally:
            self._targets[loc].pop()

    def pair(self, a: Location, b: Location, prefix: str = "E") -> tuple[str, str]:
        """Shared pair prepared in the past with halves sent to ``a`` and ``b``."""
        x, y = self.fresh(prefix), self.fresh(prefix + "'")
        self.emit(PAST, BellPair(x, y))
        if a != PAST:
            self.emit(PAST, Send(x, a))
        if b != PAST:
            self.emit(PAST, Send(y, b))
        return x, y

    def alloc(self, loc: Location, prefix: str = "junk") -> str:
        name = self.fresh(prefix)
        self.emit(loc, Alloc(name))
        return name

    def measure_bell(self, loc: Location, system: str, half: str, prefix: str = "o") -> str:
        out = self.fresh(prefix)
        self.emit(loc, MeasureBell(system, half, out))
        return out

    def broadcast(self, loc: Location, value: str, targets: Sequence[int]) -> None:
        for k in targets:
            self.emit(loc, Send(value, Return(k)))

    def build(self) -> Program:
        n = self.graph.n
        for j in range(n):
            sends = [Send(call_name(j), Return(k)) for k in range(n) if k == j or self.graph.adj[j][k]]
            self.steps[Call(j)][:0] = sends
        return Program(self.name, n, self.steps, self.inputs, START, self.min_dimension, meta=dict(self.meta))
