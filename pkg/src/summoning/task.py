"""Summoning task specifications, call patterns and the JSON task-file format."""

from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass
from typing import Any, Mapping

from .graph import CausalGraph, GraphError
from .spacetime import Diamond, Geometry, GeometryError, Point, graph_from_geometry


class TaskError(ValueError):
    pass


class Kind(str, enum.Enum):
    SINGLE = "single"
    TWO_SYSTEM = "two-system"
    ENTANGLEMENT = "entanglement"


class Assistance(str, enum.Enum):
    NONE = "none"
    LABEL = "label"
    GLOBAL = "global"


def is_prime(p: int) -> bool:
    return p >= 2 and all(p % d for d in range(2, int(p**0.5) + 1))


@dataclass(frozen=True)
class TaskSpec:
    kind: Kind
    assistance: Assistance
    graph: CausalGraph
    dimension: int = 2
    name: str = ""
    geometry: Geometry | None = None

    def __post_init__(self) -> None:
        if not is_prime(self.dimension):
            raise TaskError(f"dimension must be prime, got {self.dimension}")
        if self.kind is Kind.SINGLE and self.assistance is not Assistance.NONE:
            # single-system summoning has one call, so assistance carries nothing
            object.__setattr__(self, "assistance", Assistance.NONE)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def inputs(self) -> tuple[str, ...]:
        return {Kind.SINGLE: ("A",), Kind.TWO_SYSTEM: ("A", "B"), Kind.ENTANGLEMENT: ()}[self.kind]

    def with_graph(self, graph: CausalGraph) -> "TaskSpec":
        return TaskSpec(self.kind, self.assistance, graph, self.dimension, self.name)


@dataclass(frozen=True)
class CallPattern:
    """Called diamonds, 0-based.

    For label assistance ``calls`` is ordered (label-1 diamond, label-2
    diamond). Otherwise it is sorted. Single-system patterns hold one index,
    or none for the internal zero-call case.
    """

    calls: tuple[int, ...]
    ordered: bool = False

    def __str__(self) -> str:
        sep = ">" if self.ordered else ","
        return sep.join(str(c + 1) for c in self.calls) or "-"

    def label_of(self, j: int) -> int:
        return self.calls.index(j) + 1 if j in self.calls else 0


def validate_pattern(task: TaskSpec, pattern: CallPattern, allow_empty: bool = False,
                     allow_double: bool = False) -> None:
    """Check a pattern against the task's promise.

    ``allow_empty`` and ``allow_double`` let single-system runs see zero or two
    calls, which is how the subroutine behaves inside larger protocols.
    """
    calls = pattern.calls
    if any(not 0 <= c < task.n for c in calls):
        raise TaskError(f"call index out of range in {pattern}")
    if len(set(calls)) != len(calls):
        raise TaskError(f"duplicate call in {pattern}")
    want = 1 if task.kind is Kind.SINGLE else 2
    extra = {0} if allow_empty else set()
    if allow_double:
        extra.add(2)
    if len(calls) != want and not (task.kind is Kind.SINGLE and len(calls) in extra):
        raise TaskError(f"{task.kind.value} tasks take exactly {want} call(s), got {len(calls)}")
    label = task.assistance is Assistance.LABEL and task.kind is not Kind.SINGLE
    if pattern.ordered != label:
        raise TaskError("label-assisted patterns are ordered, all others unordered")
    if not pattern.ordered and list(calls) != sorted(calls):
        raise TaskError("unordered patterns must list calls in increasing order")


def enumerate_call_patterns(task: TaskSpec) -> list[CallPattern]:
    n = task.n
    if task.kind is Kind.SINGLE:
        return [CallPattern((j,)) for j in range(n)]
    if n < 2:
        raise TaskError("two-call tasks need at least two diamonds")
    if task.assistance is Assistance.LABEL:
        return [CallPattern(p, ordered=True) for p in itertools.permutations(range(n), 2)]
    return [CallPattern(p) for p in itertools.combinations(range(n), 2)]


def call_values(task: TaskSpec, pattern: CallPattern) -> list[Any]:
    """Classical input delivered at each call point under ``pattern``."""
    values: list[Any] = [0] * task.n
    for j in pattern.calls:
        if task.kind is Kind.SINGLE or task.assistance is Assistance.NONE:
            values[j] = 1
        elif task.assistance is Assistance.LABEL:
            values[j] = pattern.label_of(j)
        else:
            values[j] = tuple(sorted(pattern.calls))
    return values


def parse_pattern(task: TaskSpec, text: str) -> CallPattern:
    """Parse 1-based ``"1,3"`` (or ``"3,1"`` for label order) into a pattern."""
    try:
        calls = tuple(int(tok) - 1 for tok in text.replace(">", ",").split(",") if tok.strip())
    except ValueError as exc:
        raise TaskError(f"bad call list {text!r}") from exc
    ordered = task.assistance is Assistance.LABEL and task.kind is not Kind.SINGLE
    pattern = CallPattern(calls if ordered else tuple(sorted(calls)), ordered=ordered)
    validate_pattern(task, pattern)
    return pattern


# -- task files ---------------------------------------------------------------

_TOP_KEYS = {"name", "kind", "assistance", "dimension", "graph", "geometry"}
_GRAPH_KEYS = {"n", "edges", "start_in_past", "start_precedes_returns"}
_GEOM_KEYS = {"spatial_dims", "speed", "start", "diamonds"}
_DIAMOND_KEYS = {"id", "call", "return"}


def _strict(doc: Any, allowed: set[str], where: str) -> Mapping[str, Any]:
    if not isinstance(doc, Mapping):
        raise TaskError(f"{where}: expected an object")
    extra = sorted(set(doc) - allowed)
    if extra:
        raise TaskError(f"{where}: unknown key(s) {', '.join(extra)}")
    return doc


def _enum(cls, value: Any, where: str):
    try:
        return cls(value)
    except ValueError:
        choices = ", ".join(m.value for m in cls)
        raise TaskError(f"{where}: {value!r} is not one of {choices}") from None


def _bool(doc: Mapping[str, Any], key: str, default: bool, where: str) -> bool:
    value = doc.get(key, default)
    if not isinstance(value, bool):
        raise TaskError(f"{where}.{key}: expected true/false")
    return value


def _coords(value: Any, where: str) -> Point:
    if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise TaskError(f"{where}: expected a list of numbers [t, x...]")
    try:
        return Point.of(value)
    except GeometryError as exc:
        raise TaskError(f"{where}: {exc}") from None


def _parse_graph(doc: Any) -> CausalGraph:
    doc = _strict(doc, _GRAPH_KEYS, "graph")
    n = doc.get("n")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise TaskError("graph.n: expected a positive integer")
    edges = doc.get("edges", [])
    if not isinstance(edges, list):
        raise TaskError("graph.edges: expected a list of [j, k] pairs")
    parsed = []
    for i, e in enumerate(edges):
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(v, int) and not isinstance(v, bool) for v in e)):
            raise TaskError(f"graph.edges[{i}]: expected [j, k] with 1-based integers")
        parsed.append((e[0] - 1, e[1] - 1))
    in_past = _bool(doc, "start_in_past", True, "graph")
    before_returns = _bool(doc, "start_precedes_returns", True, "graph")
    try:
        return CausalGraph.from_edges(n, parsed, start_in_past=in_past, start_precedes_all_returns=before_returns)
    except GraphError as exc:
        raise TaskError(f"graph: {exc}") from None


def _parse_geometry(doc: Any) -> Geometry:
    doc = _strict(doc, _GEOM_KEYS, "geometry")
    dims = doc.get("spatial_dims")
    if not isinstance(dims, int) or isinstance(dims, bool):
        raise TaskError("geometry.spatial_dims: expected an integer")
    speed = doc.get("speed", 1)
    if not isinstance(speed, (int, float)) or isinstance(speed, bool):
        raise TaskError("geometry.speed: expected a number")
    start = _coords(doc["start"], "geometry.start") if "start" in doc else None
    raw = doc.get("diamonds")
    if not isinstance(raw, list) or not raw:
        raise TaskError("geometry.diamonds: expected a non-empty list")
    diamonds = []
    for i, d in enumerate(raw):
        where = f"geometry.diamonds[{i}]"
        d = _strict(d, _DIAMOND_KEYS, where)
        if "call" not in d or "return" not in d:
            raise TaskError(f"{where}: needs both call and return")
        ident = d.get("id", str(i + 1))
        if not isinstance(ident, str):
            raise TaskError(f"{where}.id: expected a string")
        diamonds.append(Diamond(_coords(d["call"], f"{where}.call"), _coords(d["return"], f"{where}.return"), ident))
    try:
        return Geometry(dims, tuple(diamonds), float(speed), start)
    except GeometryError as exc:
        raise TaskError(f"geometry: {exc}") from None


def parse_task(document: Any) -> TaskSpec:
    doc = _strict(document, _TOP_KEYS, "task")
    if ("graph" in doc) == ("geometry" in doc):
        raise TaskError("task: exactly one of 'graph' or 'geometry' is required")
    for key in ("kind", "assistance"):
        if key not in doc:
            raise TaskError(f"task: missing required key {key!r}")
    kind = _enum(Kind, doc["kind"], "task.kind")
    assistance = _enum(Assistance, doc["assistance"], "task.assistance")
    dim = doc.get("dimension", 2)
    if not isinstance(dim, int) or isinstance(dim, bool) or not is_prime(dim):
        raise TaskError(f"task.dimension: expected a prime integer, got {dim!r}")
    name = doc.get("name", "")
    if not isinstance(name, str):
        raise TaskError("task.name: expected a string")
    geometry = None
    if "graph" in doc:
        graph = _parse_graph(doc["graph"])
    else:
        geometry = _parse_geometry(doc["geometry"])
        try:
            graph = graph_from_geometry(geometry)
        except GeometryError as exc:
            raise TaskError(f"geometry: {exc}") from None
    return TaskSpec(kind, assistance, graph, dim, name, geometry)


def load_task(text: str) -> TaskSpec:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TaskError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_task(document)


def serialize_task(task: TaskSpec) -> dict[str, Any]:
    doc: dict[str, Any] = {"name": task.name, "kind": task.kind.value, "assistance": task.assistance.value,
                           "dimension": task.dimension}
    if task.geometry is not None:
        g = task.geometry
        geo: dict[str, Any] = {"spatial_dims": g.spatial_dims, "speed": g.speed,
                               "diamonds": [{"id": d.id, "call": d.call.as_list(), "return": d.ret.as_list()}
                                            for d in g.diamonds]}
        if g.start is not None:
            geo["start"] = g.start.as_list()
        doc["geometry"] = geo
    else:
        gr = task.graph
        doc["graph"] = {"n": gr.n, "edges": [[j + 1, k + 1] for j, k in gr.edges()],
                        "start_in_past": gr.start_in_past,
                        "start_precedes_returns": gr.start_precedes_all_returns}
    return doc
