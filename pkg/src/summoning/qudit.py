"""Prime-dimension qudit simulator with Pauli/Clifford gates, Bell measurements and
polynomial threshold codes.

The state is stored as its support: an integer matrix of basis digits (one row
per nonzero amplitude, one column per qudit) and a matching amplitude vector.
Every state reachable by the shipped protocols is a stabilizer state, whose
support is far smaller than the dense ``p**n`` vector, so ten 5-level shares
plus references stay cheap.

In ``coherent`` mode measurements do not collapse. The measured column is
kept as a classical record, so one state holds every outcome branch at once
and corrections act row by row on the recorded values.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, Union

import numpy as np
import scipy.sparse

PRUNE = 1e-10


class SimulationError(RuntimeError):
    pass


class ContractViolation(SimulationError):
    """An operation the simulator contract forbids, such as discarding an entangled qudit."""


class BranchLimitExceeded(SimulationError):
    pass


@dataclass(frozen=True)
class QuditRef:
    handle: int
    p: int


@dataclass(frozen=True)
class Record:
    """Opaque reference to a measurement result kept coherently."""

    handle: int


Outcome = Union[int, Record]
Chooser = Callable[[np.ndarray], int]


@dataclass(frozen=True)
class Gate:
    name: str
    param: int = 1

    @property
    def arity(self) -> int:
        return 2 if self.name in ("SUM", "SWAP") else 1


def X(a: int = 1) -> Gate:
    return Gate("X", a)


def Z(b: int = 1) -> Gate:
    return Gate("Z", b)


def F(inverse: bool = False) -> Gate:
    return Gate("F", -1 if inverse else 1)


def SUM(scale: int = 1) -> Gate:
    """Controlled add: target += scale * control."""
    return Gate("SUM", scale)


SWAP = Gate("SWAP", 0)


def MUL(factor: int) -> Gate:
    return Gate("MUL", factor)


def _inv(a: int, p: int) -> int:
    a %= p
    if a == 0:
        raise SimulationError("zero has no multiplicative inverse")
    return pow(a, p - 2, p)


def _row_keys(digits: np.ndarray, p: int) -> np.ndarray:
    """One sortable key per row: packed base-p integers when they fit in int64."""
    d = np.ascontiguousarray(digits)
    if d.shape[1] * np.log2(p) < 62:
        weights = p ** np.arange(d.shape[1] - 1, -1, -1, dtype=np.int64)
        return d.astype(np.int64) @ weights
    return d.view(np.dtype((np.void, d.shape[1]))).ravel()


class SimState:
    def __init__(self, p: int, seed: int = 0, coherent: bool = False, chooser: Chooser | None = None,
                 max_rows: int = 3_000_000) -> None:
        if p < 2 or any(p % d == 0 for d in range(2, int(p**0.5) + 1)):
            raise SimulationError(f"dimension must be prime, got {p}")
        if p > 127:
            raise SimulationError("digits are stored as int8; p must be below 128")
        self.p = p
        self.rng_seed = seed
        self.rng = np.random.default_rng(seed)
        self.coherent = coherent
        self.chooser = chooser
        self.max_rows = max_rows
        self._digits = np.zeros((1, 0), dtype=np.int8)
        self._amps = np.ones(1, dtype=np.complex128)
        self._handles: list[int] = []
        self._col: dict[int, int] = {}
        self._quantum: dict[int, None] = {}
        self._next = 0
        self.peak = 0
        self._phase = np.exp(2j * np.pi * np.arange(p) / p)

    # -- bookkeeping ------------------------------------------------------

    @property
    def live(self) -> list[QuditRef]:
        return [QuditRef(h, self.p) for h in self._quantum]

    @property
    def records(self) -> list[Record]:
        return [Record(h) for h in self._handles if h not in self._quantum]

    @property
    def rows(self) -> int:
        return self._amps.size

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self._amps) ** 2)))

    def _c(self, q: QuditRef) -> int:
        if not isinstance(q, QuditRef) or q.handle not in self._quantum:
            raise SimulationError(f"{q!r} is not a live qudit")
        return self._col[q.handle]

    def _distinct(self, qs: Sequence[QuditRef]) -> list[int]:
        cols = [self._c(q) for q in qs]
        if len(set(cols)) != len(cols):
            raise SimulationError("qudit arguments must be distinct")
        return cols

    def _add_columns(self, values: np.ndarray, amps: np.ndarray) -> list[QuditRef]:
        """Tensor the state with the sparse state ``sum_i amps[i] |values[i]>`` on new qudits."""
        r, k = values.shape
        digits = np.repeat(self._digits, r, axis=0)
        fresh = np.tile(values.astype(np.int8), (self.rows, 1))
        self._digits = np.concatenate([digits, fresh], axis=1)
        self._amps = (self._amps[:, None] * amps[None, :]).reshape(-1)
        refs = []
        for _ in range(k):
            h = self._next
            self._next += 1
            self._col[h] = len(self._handles)
            self._handles.append(h)
            self._quantum[h] = None
            refs.append(QuditRef(h, self.p))
        self.peak = max(self.peak, len(self._quantum))
        self._check_rows()
        return refs

    def _drop_column(self, col: int) -> None:
        h = self._handles.pop(col)
        del self._col[h]
        self._quantum.pop(h, None)
        self._digits = np.delete(self._digits, col, axis=1)
        self._col = {hh: i for i, hh in enumerate(self._handles)}

    def _check_rows(self) -> None:
        if self.rows > self.max_rows:
            raise BranchLimitExceeded(f"support grew to {self.rows} rows (limit {self.max_rows})")

    def _merge(self) -> None:
        """Combine duplicate basis rows and drop vanishing amplitudes."""
        d = np.ascontiguousarray(self._digits)
        if d.shape[1] == 0:
            self._amps = np.array([self._amps.sum()])
            self._digits = np.zeros((1, 0), dtype=np.int8)
            return
        _, first, inverse = np.unique(_row_keys(d, self.p), return_index=True, return_inverse=True)
        amps = np.zeros(first.size, dtype=np.complex128)
        np.add.at(amps, inverse.ravel(), self._amps)
        keep = np.abs(amps) > PRUNE
        self._digits = d[first][keep]
        self._amps = amps[keep]

    def _column_values(self, value: Outcome) -> np.ndarray | int:
        if isinstance(value, Record):
            if value.handle not in self._col or value.handle in self._quantum:
                raise SimulationError(f"unknown measurement record {value!r}")
            return self._digits[:, self._col[value.handle]].astype(np.int64)
        return int(value)

    # -- allocation -------------------------------------------------------

    def alloc(self, count: int = 1) -> list[QuditRef]:
        return self._add_columns(np.zeros((1, count), dtype=np.int64), np.ones(1, dtype=np.complex128))

    def bell_pair(self) -> tuple[QuditRef, QuditRef]:
        p = self.p
        values = np.repeat(np.arange(p)[:, None], 2, axis=1)
        a, b = self._add_columns(values, np.full(p, p**-0.5, dtype=np.complex128))
        return a, b

    def prepare(self, amplitudes: Sequence[complex]) -> QuditRef:
        """Allocate one qudit in the given (normalised) state."""
        vec = np.asarray(amplitudes, dtype=np.complex128)
        if vec.shape != (self.p,) or not np.isclose(np.linalg.norm(vec), 1.0, atol=1e-9):
            raise SimulationError("expected a normalised vector of length p")
        nz = np.flatnonzero(np.abs(vec) > PRUNE)
        return self._add_columns(nz[:, None], vec[nz])[0]

    def discard(self, q: QuditRef) -> None:
        """Remove a qudit that is in a product state with everything else."""
        col = self._c(q)
        rho = self.reduced_state([q])
        vals, vecs = np.linalg.eigh(rho)
        if vals[-1] < 1 - 1e-9:
            raise ContractViolation(f"qudit {q.handle} is entangled with the rest of the state")
        phi = vecs[:, -1]
        weights = np.conj(phi)[self._digits[:, col].astype(np.int64)]
        self._amps = self._amps * weights
        self._drop_column(col)
        self._merge()

    # -- gates ------------------------------------------------------------

    def apply_gate(self, gate: Gate, qudits: Sequence[QuditRef]) -> None:
        if len(qudits) != gate.arity:
            raise SimulationError(f"{gate.name} acts on {gate.arity} qudit(s), got {len(qudits)}")
        cols = self._distinct(qudits)
        p = self.p
        d = self._digits
        if gate.name == "X":
            d[:, cols[0]] = (d[:, cols[0]].astype(np.int64) + gate.param) % p
        elif gate.name == "Z":
            self._amps = self._amps * self._phase[(gate.param * d[:, cols[0]].astype(np.int64)) % p]
        elif gate.name == "MUL":
            if gate.param % p == 0:
                raise SimulationError("field multiplication needs a nonzero factor")
            d[:, cols[0]] = (d[:, cols[0]].astype(np.int64) * gate.param) % p
        elif gate.name == "SUM":
            c, t = cols
            d[:, t] = (d[:, t].astype(np.int64) + gate.param * d[:, c].astype(np.int64)) % p
        elif gate.name == "SWAP":
            a, b = cols
            d[:, [a, b]] = d[:, [b, a]]
        elif gate.name == "F":
            self._fourier(cols[0], gate.param)
        else:
            raise SimulationError(f"unknown gate {gate.name}")

    def _fourier(self, col: int, sign: int) -> None:
        p = self.p
        old = self._digits[:, col].astype(np.int64)
        k = np.arange(p)
        self._digits = np.repeat(self._digits, p, axis=0)
        self._digits[:, col] = np.tile(k, old.size)
        phase = self._phase[(sign * old[:, None] * k[None, :]) % p]
        self._amps = (self._amps[:, None] * phase).reshape(-1) * p**-0.5
        self._check_rows()
        self._merge()

    def apply_linear(self, qudits: Sequence[QuditRef], matrix: Sequence[Sequence[int]]) -> None:
        """Map register values v to M v over F_p, as a sequence of SUM, MUL and SWAP gates."""
        for gate, idx in linear_gates(tuple(tuple(int(v) % self.p for v in row) for row in matrix), self.p):
            self.apply_gate(gate, [qudits[i] for i in idx])

    def correct(self, q: QuditRef, x_terms: Iterable[tuple[Outcome, int]] = (),
                z_terms: Iterable[tuple[Outcome, int]] = ()) -> None:
        """Undo a Pauli frame X^x Z^z, where x and z are linear in measurement results."""
        col = self._c(q)
        p = self.p
        x = sum((c * self._column_values(v) for v, c in x_terms), 0)
        z = sum((c * self._column_values(v) for v, c in z_terms), 0)
        d = (self._digits[:, col].astype(np.int64) - x) % p
        self._digits[:, col] = d
        self._amps = self._amps * self._phase[(-z * d) % p]

    # -- measurement ------------------------------------------------------

    def _probabilities(self, col: int) -> np.ndarray:
        probs = np.bincount(self._digits[:, col].astype(np.int64), weights=np.abs(self._amps) ** 2,
                            minlength=self.p)
        probs[probs < 1e-12] = 0.0
        return probs / probs.sum()

    def measure(self, q: QuditRef) -> Outcome:
        """Computational-basis measurement; the qudit is removed afterwards."""
        col = self._c(q)
        if self.coherent:
            del self._quantum[q.handle]
            return Record(q.handle)
        probs = self._probabilities(col)
        value = self._choose(probs)
        keep = self._digits[:, col] == value
        self._digits = self._digits[keep]
        self._amps = self._amps[keep] / np.sqrt(probs[value])
        self._drop_column(col)
        return value

    def _choose(self, probs: np.ndarray) -> int:
        if self.chooser is not None:
            value = int(self.chooser(probs))
            if probs[value] == 0:
                raise SimulationError(f"chooser picked impossible outcome {value}")
            return value
        value = int(np.searchsorted(np.cumsum(probs), self.rng.random() * probs.sum(), side="right"))
        value = min(value, self.p - 1)
        while probs[value] == 0:
            value -= 1
        return value

    def _measure_fourier(self, q: QuditRef) -> int:
        """Measure in the basis F|k>, i.e. apply F^-1 then measure, without expanding rows."""
        col = self._c(q)
        p = self.p
        rest = [i for i in range(len(self._handles)) if i != col]
        _, first, env = np.unique(_row_keys(self._digits[:, rest], p), return_index=True, return_inverse=True)
        env = env.ravel()
        x = self._digits[:, col].astype(np.int64)
        inner = np.empty((first.size, p), dtype=np.complex128)
        for k in range(p):
            w = self._amps * self._phase[(-x * k) % p]
            inner[:, k] = np.bincount(env, weights=w.real, minlength=first.size) + 1j * np.bincount(
                env, weights=w.imag, minlength=first.size)
        inner /= np.sqrt(p)
        probs = np.sum(np.abs(inner) ** 2, axis=0)
        probs[probs < 1e-12] = 0.0
        probs /= probs.sum()
        value = self._choose(probs)
        amps = inner[:, value] / np.sqrt(probs[value] * np.sum(np.abs(self._amps) ** 2))
        keep = np.abs(amps) > PRUNE
        self._digits = self._digits[first][keep]
        self._amps = amps[keep]
        self._drop_column(col)
        return value

    def measure_bell(self, q1: QuditRef, q2: QuditRef) -> tuple[Outcome, Outcome]:
        """Project onto (I (x) X^a Z^b)|Phi> and return ``(a, b)``."""
        self._distinct([q1, q2])
        self.apply_gate(SUM(-1), [q1, q2])
        if self.coherent:
            self.apply_gate(F(inverse=True), [q1])
            return self.measure(q2), self.measure(q1)
        a = self.measure(q2)
        return a, self._measure_fourier(q1)

    # -- queries ----------------------------------------------------------

    def _split(self, qudits: Sequence[QuditRef]) -> tuple[np.ndarray, np.ndarray, int]:
        cols = self._distinct(qudits)
        p = self.p
        idx = np.zeros(self.rows, dtype=np.int64)
        for c in cols:
            idx = idx * p + self._digits[:, c].astype(np.int64)
        rest = [i for i in range(len(self._handles)) if i not in cols]
        if rest:
            _, env_id = np.unique(_row_keys(self._digits[:, rest], p), return_inverse=True)
            env_id = env_id.ravel()
            n_env = int(env_id.max()) + 1 if env_id.size else 0
        else:
            env_id = np.zeros(self.rows, dtype=np.int64)
            n_env = 1
        return idx, env_id, n_env

    def reduced_state(self, qudits: Sequence[QuditRef]) -> np.ndarray:
        idx, env_id, n_env = self._split(qudits)
        dim = self.p ** len(qudits)
        m = scipy.sparse.csr_matrix((self._amps, (env_id, idx)), shape=(n_env, dim))
        rho = (m.T @ m.conj()).toarray()
        return rho / np.trace(rho).real

    def fidelity_with(self, qudits: Sequence[QuditRef], target: Sequence[complex]) -> float:
        """<target| rho |target> for the reduced state on ``qudits``."""
        t = np.asarray(target, dtype=np.complex128).ravel()
        if t.size != self.p ** len(qudits):
            raise SimulationError("target dimension does not match the qudits")
        idx, env_id, n_env = self._split(qudits)
        w = np.conj(t[idx]) * self._amps
        inner = np.bincount(env_id, weights=w.real, minlength=n_env) + 1j * np.bincount(
            env_id, weights=w.imag, minlength=n_env)
        return float(np.sum(np.abs(inner) ** 2) / np.sum(np.abs(self._amps) ** 2))

    def branch_fidelities(self, qudits: Sequence[QuditRef], target: Sequence[complex],
                          records: Sequence[Record]) -> tuple[np.ndarray, np.ndarray]:
        """Fidelity with ``target`` conditioned on each value of ``records``.

        :returns: ``(probabilities, fidelities)``, one entry per outcome branch.
        """
        t = np.asarray(target, dtype=np.complex128).ravel()
        idx, env_id, n_env = self._split(qudits)
        if records:
            rec = self._digits[:, [self._col[r.handle] for r in records]]
            _, branch = np.unique(_row_keys(rec, self.p), return_inverse=True)
            branch = branch.ravel()
        else:
            branch = np.zeros(self.rows, dtype=np.int64)
        nb = int(branch.max()) + 1
        w = np.conj(t[idx]) * self._amps
        inner = np.bincount(env_id, weights=w.real, minlength=n_env) + 1j * np.bincount(
            env_id, weights=w.imag, minlength=n_env)
        env_branch = np.zeros(n_env, dtype=np.int64)
        env_branch[env_id] = branch
        num = np.bincount(env_branch, weights=np.abs(inner) ** 2, minlength=nb)
        den = np.bincount(branch, weights=np.abs(self._amps) ** 2, minlength=nb)
        return den / den.sum(), num / den

    @property
    def amplitudes(self) -> np.ndarray:
        """Dense vector over the live qudits in allocation order (no records allowed)."""
        if len(self._quantum) != len(self._handles):
            raise SimulationError("dense export is only defined without measurement records")
        vec = np.zeros(self.p ** len(self._handles), dtype=np.complex128)
        idx = np.zeros(self.rows, dtype=np.int64)
        for c in range(len(self._handles)):
            idx = idx * self.p + self._digits[:, c].astype(np.int64)
        np.add.at(vec, idx, self._amps)
        return vec


# -- linear maps over F_p -----------------------------------------------------

@functools.lru_cache(maxsize=None)
def linear_gates(matrix: tuple[tuple[int, ...], ...], p: int) -> tuple[tuple[Gate, tuple[int, ...]], ...]:
    """Gate sequence realising v -> M v on registers, from Gauss-Jordan elimination.

    Reducing ``E_m ... E_1 M = I`` gives ``M = E_1^-1 ... E_m^-1``, so the
    inverse elementary operations are applied from ``E_m`` down to ``E_1``.
    """
    n = len(matrix)
    m = [list(row) for row in matrix]
    ops: list[tuple[Gate, tuple[int, ...]]] = []
    for col in range(n):
        pivot = next((r for r in range(col, n) if m[r][col] % p), None)
        if pivot is None:
            raise SimulationError("matrix is singular over F_p")
        if pivot != col:
            m[pivot], m[col] = m[col], m[pivot]
            ops.append((SWAP, (col, pivot)))
        scale = _inv(m[col][col], p)
        m[col] = [(v * scale) % p for v in m[col]]
        ops.append((MUL(_inv(scale, p)), (col,)))
        for r in range(n):
            if r != col and m[r][col] % p:
                f = m[r][col]
                m[r] = [(a - f * b) % p for a, b in zip(m[r], m[col])]
                # row_r -= f * row_col; its inverse adds f * v_col into v_r
                ops.append((SUM(f), (col, r)))
    return tuple(reversed(ops))


def _solve_matrix(a: list[list[int]], p: int) -> list[list[int]]:
    n = len(a)
    aug = [list(row) + [int(i == j) for j in range(n)] for i, row in enumerate(a)]
    for col in range(n):
        pivot = next(r for r in range(col, n) if aug[r][col] % p)
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = _inv(aug[col][col], p)
        aug[col] = [(v * inv) % p for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] % p:
                f = aug[r][col]
                aug[r] = [(x - f * y) % p for x, y in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


# -- polynomial threshold codes -----------------------------------------------

@dataclass(frozen=True)
class CssCode:
    """((k, 2k-1)) polynomial code.

    The secret is the leading coefficient of a degree-(k-1) polynomial whose
    lower coefficients are uniformly superposed. Share i (1-based) is the
    value at point i mod p, so p = 2k-1 is allowed and uses the point 0.
    """

    k: int
    p: int

    def __post_init__(self) -> None:
        if self.k < 1:
            raise SimulationError("threshold must be positive")
        if self.p < self.shares:
            raise SimulationError(f"((k,2k-1)) with k={self.k} needs p >= {self.shares}, got {self.p}")

    @property
    def shares(self) -> int:
        return 2 * self.k - 1

    @property
    def points(self) -> tuple[int, ...]:
        return tuple(i % self.p for i in range(1, self.shares + 1))

    def encoding_matrix(self) -> list[list[int]]:
        return [[pow(x, j, self.p) for j in range(self.shares)] for x in self.points]

    def decoding_matrix(self, positions: Sequence[int]) -> tuple[list[list[int]], list[int]]:
        """Map from the k held share values to (secret, copies of the missing shares)."""
        k, p = self.k, self.p
        held = [self.points[i - 1] for i in positions]
        missing = [i for i in range(1, self.shares + 1) if i not in positions]
        vinv = _solve_matrix([[pow(x, j, p) for j in range(k)] for x in held], p)
        rows = [vinv[k - 1]]
        for i in missing:
            x = self.points[i - 1]
            rows.append([sum(pow(x, j, p) * vinv[j][c] for j in range(k)) % p for c in range(k)])
        return rows, missing


def cgl_encode(state: SimState, secret: QuditRef, code: CssCode) -> list[QuditRef]:
    """Encode ``secret`` into ``2k-1`` shares; the secret handle is consumed."""
    if code.p != state.p:
        raise SimulationError("code dimension differs from the simulator dimension")
    state._c(secret)
    coeffs = state.alloc(code.k - 1)
    for c in coeffs:
        state.apply_gate(F(), [c])
    pad = state.alloc(code.k - 1)
    registers = [*coeffs, secret, *pad]
    state.apply_linear(registers, code.encoding_matrix())
    return _rename(state, registers)


def cgl_decode(state: SimState, shares: Sequence[QuditRef], positions: Sequence[int], code: CssCode) -> QuditRef:
    """Recover the secret from ``k`` shares at 1-based ``positions``."""
    if len(shares) != code.k or len(positions) != code.k:
        raise SimulationError(f"decoding needs exactly k={code.k} shares")
    if len(set(positions)) != code.k or not all(1 <= i <= code.shares for i in positions):
        raise SimulationError(f"bad share positions {list(positions)}")
    matrix, _ = code.decoding_matrix(positions)
    state.apply_linear(shares, matrix)
    for junk in shares[1:]:
        state.measure(junk)
    return shares[0]


def _rename(state: SimState, refs: Sequence[QuditRef]) -> list[QuditRef]:
    """Fresh handles for ``refs`` so the consumed input handle is invalidated."""
    out = []
    for r in refs:
        h = state._next
        state._next += 1
        col = state._col.pop(r.handle)
        state._handles[col] = h
        state._col[h] = col
        del state._quantum[r.handle]
        state._quantum[h] = None
        out.append(QuditRef(h, state.p))
    return out


def bell_vector(p: int, pairs: int = 1) -> np.ndarray:
    """Amplitudes of |Phi>^{(x) pairs} with each pair on adjacent positions."""
    phi = np.zeros(p * p, dtype=np.complex128)
    phi[[i * p + i for i in range(p)]] = p**-0.5
    out = np.ones(1, dtype=np.complex128)
    for _ in range(pairs):
        out = np.kron(out, phi)
    return out


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(rho - sigma))))
