"""Exact density-matrix backend.

Operators on k qubits are stored as 2^k x 2^k matrices whose row index reads
the qubits big-endian in the order of ``qubits``. Internally most work happens
on the (2,)*2k tensor view: axes 0..k-1 are row bits, k..2k-1 column bits.
"""

from __future__ import annotations

import os
from dataclasses import InitVar, dataclass
from typing import Iterable, Sequence

import numpy as np

from .circuit import Circuit
from .lattice import reverse_lightcone

HERMITIAN_TOL = 1e-9
TRACE_TOL = 1e-9
PSD_TOL = 1e-9
PROB_TOL = 1e-12
ZERO_CONDITION = 1e-12

DENSE_ENV = "NOISYLOC_MAX_DENSE_QUBITS"
STATEVECTOR_ENV = "NOISYLOC_MAX_STATEVECTOR_QUBITS"


class GuardError(RuntimeError):
    """A computation would exceed the configured size limit."""


def max_dense_qubits() -> int:
    return int(os.environ.get(DENSE_ENV, "13"))


def max_statevector_qubits() -> int:
    return int(os.environ.get(STATEVECTOR_ENV, "24"))


def check_dense_guard(k: int, what: str = "dense simulation") -> None:
    limit = max_dense_qubits()
    if k > limit:
        raise GuardError(f"{what} needs {k} qubits; limit is {limit} (set {DENSE_ENV} to raise it)")


def _qubit_tuple(qubits: Iterable[int]) -> tuple[int, ...]:
    if isinstance(qubits, (set, frozenset)):
        return tuple(sorted(int(q) for q in qubits))
    out = tuple(int(q) for q in qubits)
    if len(set(out)) != len(out):
        raise ValueError(f"repeated qubit in {out}")
    return out


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    qubits: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        qubits = _qubit_tuple(self.qubits)
        mat = np.array(self.matrix, dtype=complex)
        dim = 2 ** len(qubits)
        if mat.shape != (dim, dim):
            raise ValueError(f"matrix shape {mat.shape} does not match {len(qubits)} qubits")
        dev = np.max(np.abs(mat - mat.conj().T)) if dim else 0.0
        if dev > HERMITIAN_TOL * max(1.0, np.max(np.abs(mat))):
            raise ValueError(f"operator is not Hermitian (deviation {dev:.3g})")
        mat = (mat + mat.conj().T) / 2
        mat.setflags(write=False)
        object.__setattr__(self, "qubits", qubits)
        object.__setattr__(self, "matrix", mat)

    @property
    def k(self) -> int:
        return len(self.qubits)

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def tensor(self) -> np.ndarray:
        return self.matrix.reshape((2,) * (2 * self.k))

    def positions(self, qubits: Iterable[int]) -> list[int]:
        index = {q: i for i, q in enumerate(self.qubits)}
        try:
            return [index[q] for q in qubits]
        except KeyError as exc:
            raise ValueError(f"qubit {exc.args[0]} not in operator qubits {self.qubits}") from None

    def __add__(self, other: "HermitianOperator") -> "HermitianOperator":
        other = reorder(other, self.qubits)
        return HermitianOperator(self.qubits, self.matrix + other.matrix)

    def __sub__(self, other: "HermitianOperator") -> "HermitianOperator":
        other = reorder(other, self.qubits)
        return HermitianOperator(self.qubits, self.matrix - other.matrix)

    def scaled(self, c: float) -> "HermitianOperator":
        return HermitianOperator(self.qubits, c * self.matrix)


@dataclass(frozen=True, eq=False)
class State(HermitianOperator):
    """Unit-trace PSD operator. ``validate=False`` skips the eigenvalue check."""

    validate: InitVar[bool] = True

    def __post_init__(self, validate: bool = True):
        super().__post_init__()
        tr = self.trace()
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"state trace is {tr}, expected 1")
        if validate:
            lo = np.linalg.eigvalsh(self.matrix).min() if self.k else 1.0
            if lo < -PSD_TOL:
                raise ValueError(f"state has negative eigenvalue {lo:.3g}")


def _from_tensor(qubits, t: np.ndarray, cls=HermitianOperator, **kw) -> HermitianOperator:
    k = len(qubits)
    return cls(tuple(qubits), t.reshape(2 ** k, 2 ** k), **kw)


def as_state(op: HermitianOperator, validate: bool = False) -> State:
    if isinstance(op, State):
        return op
    return State(op.qubits, op.matrix, validate=validate)


def zero_state(qubits: Iterable[int]) -> State:
    qubits = _qubit_tuple(qubits)
    mat = np.zeros((2 ** len(qubits),) * 2, dtype=complex)
    mat[0, 0] = 1
    return State(qubits, mat, validate=False)


def maximally_mixed(qubits: Iterable[int]) -> State:
    qubits = _qubit_tuple(qubits)
    dim = 2 ** len(qubits)
    return State(qubits, np.eye(dim, dtype=complex) / dim, validate=False)


def tensor_product(a: HermitianOperator, b: HermitianOperator) -> HermitianOperator:
    if set(a.qubits) & set(b.qubits):
        raise ValueError("tensor factors must act on disjoint qubits")
    cls = State if isinstance(a, State) and isinstance(b, State) else HermitianOperator
    kw = {"validate": False} if cls is State else {}
    return cls(a.qubits + b.qubits, np.kron(a.matrix, b.matrix), **kw)


def reorder(op: HermitianOperator, order: Sequence[int]) -> HermitianOperator:
    order = _qubit_tuple(order)
    if order == op.qubits:
        return op
    if sorted(order) != sorted(op.qubits):
        raise ValueError(f"cannot reorder {op.qubits} to {order}")
    k = op.k
    pos = op.positions(order)
    t = np.transpose(op.tensor(), pos + [k + i for i in pos])
    kw = {"validate": False} if isinstance(op, State) else {}
    return _from_tensor(order, t, type(op), **kw)


# -- tensor kernels ----------------------------------------------------------

def _apply_unitary(t: np.ndarray, k: int, u: np.ndarray, pos: Sequence[int]) -> np.ndarray:
    r = len(pos)
    ut = u.reshape((2,) * (2 * r))
    t = np.tensordot(ut, t, axes=(list(range(r, 2 * r)), list(pos)))
    t = np.moveaxis(t, list(range(r)), list(pos))
    cols = [k + p for p in pos]
    t = np.tensordot(ut.conj(), t, axes=(list(range(r, 2 * r)), cols))
    return np.moveaxis(t, list(range(r)), cols)


def _depolarize_axis(t: np.ndarray, k: int, pos: int, p: float) -> np.ndarray:
    v = np.moveaxis(t, (pos, k + pos), (0, 1))
    tr = v[0, 0] + v[1, 1]
    out = (1 - p) * v
    out[0, 0] += (p / 2) * tr
    out[1, 1] += (p / 2) * tr
    return np.moveaxis(out, (0, 1), (pos, k + pos))


def _trace_out(t: np.ndarray, k: int, keep: Sequence[int]) -> np.ndarray:
    """Partial trace of the tensor ``t`` keeping local positions ``keep`` in that order."""
    rows = list(range(k))
    cols = [k + i if i in keep else i for i in range(k)]
    out = list(keep) + [k + i for i in keep]
    return np.einsum(t, rows + cols, out, optimize=True)


def _complete_depolarize(t: np.ndarray, k: int, pos: Sequence[int]) -> np.ndarray:
    """sigma on ``pos`` tensored with the partial trace over ``pos``."""
    if not pos:
        return t
    keep = [i for i in range(k) if i not in pos]
    reduced = _trace_out(t, k, keep)
    eye = np.eye(2) / 2
    operands: list = [reduced, keep + [k + i for i in keep]]
    for i in pos:
        operands += [eye, [i, k + i]]
    return np.einsum(*operands, list(range(2 * k)), optimize=True)


# -- simulation --------------------------------------------------------------

def simulate(circuit: Circuit) -> State:
    """Output state of the noisy circuit on the all-zeros input."""
    n = circuit.n
    check_dense_guard(n)
    t = np.zeros((2,) * (2 * n), dtype=complex)
    t[(0,) * (2 * n)] = 1
    for layer in circuit.layers:
        for g in layer:
            t = _apply_unitary(t, n, g.matrix, g.targets)
        if circuit.p > 0:
            for q in range(n):
                t = _depolarize_axis(t, n, q, circuit.p)
    return _from_tensor(tuple(range(n)), t, State, validate=False)


def simulate_lightcone(circuit: Circuit, region: Iterable[int]) -> State:
    """Reduced output state on ``region``, simulating only its reverse lightcone.

    Qubits that leave the lightcone are traced out layer by layer, so the
    working register never exceeds |L(region)|.
    """
    region = _qubit_tuple(region)
    trace = reverse_lightcone(circuit, region)
    cone = sorted(trace.cone)
    check_dense_guard(len(cone), "lightcone simulation")
    local = list(cone)
    k = len(local)
    t = np.zeros((2,) * (2 * k), dtype=complex)
    t[(0,) * (2 * k)] = 1
    for i, layer in enumerate(circuit.layers, start=1):
        where = {q: j for j, q in enumerate(local)}
        for g in layer:
            if all(q in where for q in g.targets):
                t = _apply_unitary(t, k, g.matrix, [where[q] for q in g.targets])
        if circuit.p > 0:
            for j in range(k):
                t = _depolarize_axis(t, k, j, circuit.p)
        nxt = trace[i]
        if len(nxt) < k:
            keep = [j for j, q in enumerate(local) if q in nxt]
            t = _trace_out(t, k, keep)
            local = [local[j] for j in keep]
            k = len(local)
    st = _from_tensor(tuple(local), t, State, validate=False)
    return reorder(st, region)


def partial_trace(op: HermitianOperator, keep: Iterable[int]) -> HermitianOperator:
    keep = _qubit_tuple(keep)
    pos = op.positions(keep)
    t = _trace_out(op.tensor(), op.k, pos)
    kw = {"validate": False} if isinstance(op, State) else {}
    return _from_tensor(keep, t, type(op), **kw)


def dephase(op: HermitianOperator, qubits: Iterable[int] | None = None) -> HermitianOperator:
    """Zero coherences between computational basis states of ``qubits`` (default: all)."""
    qubits = op.qubits if qubits is None else _qubit_tuple(qubits)
    pos = op.positions(qubits)
    k = op.k
    t = op.tensor().copy()
    for i in pos:
        v = np.moveaxis(t, (i, k + i), (0, 1))
        v[0, 1] = 0
        v[1, 0] = 0
    kw = {"validate": False} if isinstance(op, State) else {}
    return _from_tensor(op.qubits, t, type(op), **kw)


def depolarize(op: HermitianOperator, qubits: Iterable[int], p: float) -> HermitianOperator:
    """Depolarizing channel of strength ``p`` on each listed qubit."""
    k = op.k
    t = op.tensor()
    for i in op.positions(_qubit_tuple(qubits)):
        t = _depolarize_axis(t, k, i, p)
    kw = {"validate": False} if isinstance(op, State) else {}
    return _from_tensor(op.qubits, t, type(op), **kw)


def complete_depolarize(op: HermitianOperator, qubits: Iterable[int]) -> HermitianOperator:
    """sigma_S tensored with Tr_S(op)."""
    pos = op.positions(_qubit_tuple(qubits))
    t = _complete_depolarize(op.tensor(), op.k, pos)
    kw = {"validate": False} if isinstance(op, State) else {}
    return _from_tensor(op.qubits, t, type(op), **kw)


def apply_gate(op: HermitianOperator, u: np.ndarray, qubits: Sequence[int]) -> HermitianOperator:
    t = _apply_unitary(op.tensor(), op.k, np.asarray(u, dtype=complex), op.positions(qubits))
    kw = {"validate": False} if isinstance(op, State) else {}
    return _from_tensor(op.qubits, t, type(op), **kw)


# -- distributions -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class QuasiDistribution:
    """Signed weights over bitstrings of ``qubits`` (big-endian in that order)."""

    qubits: tuple[int, ...]
    probs: np.ndarray

    def __post_init__(self):
        qubits = _qubit_tuple(self.qubits)
        probs = np.array(self.probs, dtype=float).reshape(-1)
        if probs.shape != (2 ** len(qubits),):
            raise ValueError(f"need {2 ** len(qubits)} entries for {len(qubits)} qubits")
        probs.setflags(write=False)
        object.__setattr__(self, "qubits", qubits)
        object.__setattr__(self, "probs", probs)

    def prob(self, bits: str | Sequence[int]) -> float:
        return float(self.probs[bits_to_index(bits)])

    def marginal(self, qubits: Iterable[int]) -> "QuasiDistribution":
        qubits = _qubit_tuple(qubits)
        t = self.probs.reshape((2,) * len(self.qubits))
        pos = [self.qubits.index(q) for q in qubits]
        rest = tuple(i for i in range(len(self.qubits)) if i not in pos)
        t = np.transpose(t.sum(axis=rest), np.argsort(np.argsort(pos))) if pos else t.sum(axis=rest)
        return type(self)(qubits, np.asarray(t).reshape(-1))

    def reordered(self, qubits: Sequence[int]) -> "QuasiDistribution":
        return self.marginal(qubits)

    def as_dict(self) -> dict[str, float]:
        k = len(self.qubits)
        return {format(i, f"0{k}b") if k else "": float(v) for i, v in enumerate(self.probs)}


@dataclass(frozen=True, eq=False)
class Distribution(QuasiDistribution):
    def __post_init__(self):
        super().__post_init__()
        if self.probs.size and self.probs.min() < -PROB_TOL:
            raise ValueError(f"negative probability {self.probs.min():.3g}")
        s = float(self.probs.sum())
        if abs(s - 1.0) > TRACE_TOL:
            raise ValueError(f"probabilities sum to {s}, expected 1")


def bits_to_index(bits: str | Sequence[int]) -> int:
    idx = 0
    for b in bits:
        b = int(b)
        if b not in (0, 1):
            raise ValueError(f"bad bit {b!r}")
        idx = 2 * idx + b
    return idx


def index_to_bits(index: int, k: int) -> str:
    return format(index, f"0{k}b") if k else ""


def _diag_marginal(diag: np.ndarray, qubits: Sequence[int], subset: Sequence[int]) -> np.ndarray:
    k = len(qubits)
    pos = [qubits.index(q) for q in subset]
    t = diag.reshape((2,) * k)
    rest = tuple(i for i in range(k) if i not in pos)
    t = t.sum(axis=rest)
    if len(pos) > 1:
        t = np.transpose(t, np.argsort(np.argsort(pos)))
    return np.asarray(t).reshape(-1)


def diagonal(op: HermitianOperator) -> np.ndarray:
    return np.real(np.diag(op.matrix)).copy()


def marginal_distribution(state: HermitianOperator, subset: Iterable[int]) -> Distribution:
    subset = _qubit_tuple(subset)
    state.positions(subset)
    probs = _diag_marginal(diagonal(state), list(state.qubits), subset)
    cls = Distribution if isinstance(state, State) else QuasiDistribution
    return cls(subset, probs)


def conditional_distribution(state: HermitianOperator, target: Iterable[int],
                             given: tuple[Iterable[int], str | Sequence[int]]) -> Distribution:
    """P(target | given_qubits = bits) from the computational-basis distribution."""
    target = _qubit_tuple(target)
    gq, bits = given
    gq = _qubit_tuple(gq)
    if len(bits) != len(gq):
        raise ValueError("conditioning bitstring length differs from its qubit list")
    if set(gq) & set(target):
        raise ValueError("target and conditioning qubits overlap")
    joint = marginal_distribution(state, gq + target).probs.reshape(2 ** len(gq), 2 ** len(target))
    row = joint[bits_to_index(bits)]
    mass = row.sum()
    if mass <= ZERO_CONDITION:
        raise ValueError(f"conditioning event {gq}={bits} has probability {mass:.3g}")
    return Distribution(target, np.clip(row / mass, 0.0, None))


# -- entropies and norms ------------------------------------------------------

def _spectrum(mat: np.ndarray) -> np.ndarray:
    if mat.shape[0] == 0:
        return np.ones(1)
    w = np.linalg.eigvalsh(mat)
    if w.min() < -PSD_TOL or w.max() > 1 + PSD_TOL:
        raise ValueError(f"spectrum outside [0, 1]: [{w.min():.3g}, {w.max():.3g}]")
    return np.clip(w, 0.0, 1.0)


def entropy_of_spectrum(w: np.ndarray) -> float:
    w = w[w > 0]
    return float(-np.sum(w * np.log2(w)))


def von_neumann_entropy(op: HermitianOperator | np.ndarray) -> float:
    """Entropy in bits; 0 log 0 = 0."""
    mat = op.matrix if isinstance(op, HermitianOperator) else np.asarray(op)
    return entropy_of_spectrum(_spectrum(mat))


def conditional_entropy(state: HermitianOperator, A: Iterable[int]) -> float:
    """S(A|rest) = S(state) - S(rest), in bits."""
    A = set(_qubit_tuple(A))
    state.positions(A)
    rest = [q for q in state.qubits if q not in A]
    s_rest = von_neumann_entropy(partial_trace(state, rest)) if rest else 0.0
    return von_neumann_entropy(state) - s_rest


def relative_entropy_to_depolarized(state: HermitianOperator, A: Iterable[int]) -> float:
    """D(rho || sigma_A (x) rho_rest) in bits, via |A| - S(A|rest)."""
    A = _qubit_tuple(A)
    return len(A) - conditional_entropy(state, A)


def relative_entropy(rho: HermitianOperator, sigma: HermitianOperator) -> float:
    """D(rho||sigma) in bits by eigendecomposition; inf when supports mismatch."""
    sigma = reorder(sigma, rho.qubits)
    wr, vr = np.linalg.eigh(rho.matrix)
    ws, vs = np.linalg.eigh(sigma.matrix)
    wr = np.clip(wr, 0, None)
    overlap = np.abs(vr.conj().T @ vs) ** 2
    log_s = np.where(ws > 1e-15, np.log2(np.where(ws > 1e-15, ws, 1.0)), -np.inf)
    cross = 0.0
    for i, lam in enumerate(wr):
        if lam <= 1e-15:
            continue
        row = overlap[i]
        if np.any((row > 1e-12) & ~np.isfinite(log_s)):
            return float("inf")
        cross += lam * np.sum(row[np.isfinite(log_s)] * log_s[np.isfinite(log_s)])
    return float(-entropy_of_spectrum(wr) - cross)


def trace_norm(op: HermitianOperator | np.ndarray) -> float:
    mat = op.matrix if isinstance(op, HermitianOperator) else np.asarray(op)
    if mat.shape[0] == 0:
        return 0.0
    return float(np.sum(np.abs(np.linalg.eigvalsh(mat))))


def trace_distance(a: HermitianOperator, b: HermitianOperator) -> float:
    """Unhalved ||a - b||_1."""
    if a.matrix.shape != b.matrix.shape:
        raise ValueError(f"dimension mismatch {a.matrix.shape} vs {b.matrix.shape}")
    if sorted(a.qubits) != sorted(b.qubits):
        raise ValueError(f"operators act on different qubits {a.qubits} vs {b.qubits}")
    return trace_norm(a - b)


def l1_distance(p: np.ndarray | QuasiDistribution, q: np.ndarray | QuasiDistribution) -> float:
    if isinstance(p, QuasiDistribution) and isinstance(q, QuasiDistribution):
        q = q.reordered(p.qubits)
    pa = p.probs if isinstance(p, QuasiDistribution) else np.asarray(p)
    qa = q.probs if isinstance(q, QuasiDistribution) else np.asarray(q)
    if pa.shape != qa.shape:
        raise ValueError("distribution sizes differ")
    return float(np.sum(np.abs(pa - qa)))


def random_state(n: int, rng: np.random.Generator, rank: int | None = None) -> State:
    """Random mixed state from a complex Ginibre matrix of the given rank."""
    dim = 2 ** n
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    return State(tuple(range(n)), rho, validate=False)


# -- marginal access ----------------------------------------------------------

class MarginalOracle:
    """Exact computational-basis marginals of a circuit's output, with caching.

    ``method="lightcone"`` always simulates the reverse lightcone of the
    requested qubits; ``"dense"`` simulates the whole register once;
    ``"auto"`` uses the lightcone when it is smaller than the register.
    """

    def __init__(self, circuit: Circuit, method: str = "auto"):
        if method not in ("auto", "dense", "lightcone"):
            raise ValueError(f"unknown marginal method {method!r}")
        self.circuit = circuit
        self.method = method
        self._full: np.ndarray | None = None
        self._cache: dict[frozenset, tuple[tuple[int, ...], np.ndarray]] = {}

    def full_diagonal(self) -> np.ndarray:
        if self._full is None:
            self._full = diagonal(simulate(self.circuit))
        return self._full

    def _compute(self, qubits: tuple[int, ...]) -> np.ndarray:
        n = self.circuit.n
        method = self.method
        if method == "auto":
            if self._full is not None:
                method = "dense"
            else:
                cone = reverse_lightcone(self.circuit, qubits).cone
                method = "lightcone" if len(cone) < n or n > max_dense_qubits() else "dense"
        if method == "dense":
            return _diag_marginal(self.full_diagonal(), list(range(n)), qubits)
        return diagonal(simulate_lightcone(self.circuit, qubits))

    def probs(self, qubits: Iterable[int]) -> np.ndarray:
        """Marginal probability vector, big-endian in the given qubit order."""
        qubits = _qubit_tuple(qubits)
        if not qubits:
            return np.ones(1)
        key = frozenset(qubits)
        if key not in self._cache:
            srt = tuple(sorted(qubits))
            self._cache[key] = (srt, self._compute(srt))
        srt, vec = self._cache[key]
        if srt == qubits:
            return vec
        return _diag_marginal(vec, list(srt), qubits)

    def distribution(self, qubits: Iterable[int]) -> Distribution:
        qubits = _qubit_tuple(qubits)
        return Distribution(qubits, np.clip(self.probs(qubits), 0.0, None))
