"""Pauli-basis decomposition, block supports, inclusion-exclusion terms and truncations.

Pauli strings are packed two bits per qubit (I=0, X=1, Y=2, Z=3) with qubit 0
in the most significant position, so the integer code of a string equals its
row-major index in the 4^n coefficient tensor.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .dense import (
    HermitianOperator,
    _complete_depolarize,
    _from_tensor,
    check_dense_guard,
)
from .lattice import SublatticeGrid, connected_components

LETTERS = "IXYZ"
MAX_ENUM_BLOCKS = 16

_PAULI_MATS = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


@dataclass(frozen=True, order=True)
class PauliString:
    n: int
    code: int

    def __post_init__(self):
        if self.n < 0 or not 0 <= self.code < 4 ** self.n:
            raise ValueError(f"code {self.code} invalid for {self.n} qubits")

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        code = 0
        for ch in label.upper():
            if ch not in LETTERS:
                raise ValueError(f"bad Pauli letter {ch!r} in {label!r}")
            code = 4 * code + LETTERS.index(ch)
        return cls(len(label), code)

    @classmethod
    def from_sparse(cls, n: int, factors: dict[int, str]) -> "PauliString":
        letters = ["I"] * n
        for q, ch in factors.items():
            letters[q] = ch
        return cls.from_label("".join(letters))

    def digits(self) -> list[int]:
        return [(self.code >> (2 * (self.n - 1 - q))) & 3 for q in range(self.n)]

    @property
    def label(self) -> str:
        return "".join(LETTERS[d] for d in self.digits())

    def __str__(self) -> str:
        return self.label

    @property
    def support_qubits(self) -> tuple[int, ...]:
        return tuple(q for q, d in enumerate(self.digits()) if d)

    @property
    def weight(self) -> int:
        return len(self.support_qubits)

    def matrix(self) -> np.ndarray:
        out = np.ones((1, 1), dtype=complex)
        for d in self.digits():
            out = np.kron(out, _PAULI_MATS[d])
        return out

    def restricted(self) -> tuple[tuple[int, ...], np.ndarray]:
        """Support qubits and the matrix of the non-identity factors on them."""
        out = np.ones((1, 1), dtype=complex)
        for d in self.digits():
            if d:
                out = np.kron(out, _PAULI_MATS[d])
        return self.support_qubits, out


def _digits_array(codes: np.ndarray, n: int) -> np.ndarray:
    shifts = 2 * (n - 1 - np.arange(n))
    return (codes[:, None] >> shifts[None, :]) & 3


@dataclass(frozen=True, eq=False)
class PauliDecomposition:
    """Sparse map from Pauli codes to c_P = Tr(op P); op = sum_P c_P P / 2^n."""

    n: int
    codes: np.ndarray
    coeffs: np.ndarray
    qubits: tuple[int, ...] | None = None

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.int64)
        coeffs = np.asarray(self.coeffs, dtype=float)
        order = np.argsort(codes, kind="stable")
        codes, coeffs = codes[order], coeffs[order]
        codes.setflags(write=False)
        coeffs.setflags(write=False)
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "coeffs", coeffs)
        if self.qubits is None:
            object.__setattr__(self, "qubits", tuple(range(self.n)))

    def __len__(self) -> int:
        return len(self.codes)

    def __getitem__(self, key: str | PauliString) -> float:
        if isinstance(key, str):
            key = PauliString.from_label(key)
        i = np.searchsorted(self.codes, key.code)
        if i < len(self.codes) and self.codes[i] == key.code:
            return float(self.coeffs[i])
        return 0.0

    def items(self):
        for c, v in zip(self.codes, self.coeffs):
            yield PauliString(self.n, int(c)), float(v)

    def as_dict(self) -> dict[str, float]:
        return {p.label: v for p, v in self.items()}

    def digits(self) -> np.ndarray:
        return _digits_array(self.codes, self.n)

    def weights(self) -> np.ndarray:
        return (self.digits() != 0).sum(axis=1)

    def filtered(self, keep: np.ndarray) -> "PauliDecomposition":
        return PauliDecomposition(self.n, self.codes[keep], self.coeffs[keep], self.qubits)

    def dense_coefficients(self) -> np.ndarray:
        out = np.zeros(4 ** self.n)
        out[self.codes] = self.coeffs
        return out

    def dump(self) -> str:
        """Text lines ``label coefficient`` sorted by label, for golden files."""
        rows = sorted((p.label, v) for p, v in self.items() if v != 0.0)
        return "".join(f"{lab} {v:.17g}\n" for lab, v in rows)


def load_dump(text: str, qubits: Sequence[int] | None = None) -> PauliDecomposition:
    codes, coeffs = [], []
    n = None
    for line in text.splitlines():
        if not line.strip():
            continue
        lab, val = line.split()
        p = PauliString.from_label(lab)
        if n is None:
            n = p.n
        elif p.n != n:
            raise ValueError("mixed string lengths in dump")
        codes.append(p.code)
        coeffs.append(float(val))
    if n is None:
        raise ValueError("empty dump")
    return PauliDecomposition(n, np.array(codes), np.array(coeffs), tuple(qubits) if qubits else None)


# -- transforms ----------------------------------------------------------------

def pauli_decompose(op: HermitianOperator, zero_tol: float = 1e-14) -> PauliDecomposition:
    """All c_P = Tr(op P), entries with |c_P| <= zero_tol dropped."""
    n = op.k
    check_dense_guard(n, "Pauli decomposition")
    # tr_p[P, i, j] = P[j, i] so that contracting with op[i, j] yields Tr(op P)
    tr_p = np.transpose(_PAULI_MATS, (0, 2, 1))
    t = op.tensor()
    done = 0
    for q in range(n - 1, -1, -1):
        row, col = done + q, done + (q + 1) + q
        t = np.tensordot(tr_p, t, axes=([1, 2], [row, col]))
        done += 1
    flat = np.asarray(t).reshape(-1)
    if n and np.max(np.abs(flat.imag)) > 1e-9 * max(1.0, np.max(np.abs(flat))):
        raise ValueError("operator is not Hermitian: complex Pauli coefficients")
    vals = flat.real
    keep = np.nonzero(np.abs(vals) > zero_tol)[0]
    return PauliDecomposition(n, keep, vals[keep], op.qubits)


def pauli_reconstruct(dec: PauliDecomposition) -> HermitianOperator:
    n = dec.n
    check_dense_guard(n, "Pauli reconstruction")
    t = dec.dense_coefficients().astype(complex).reshape((4,) * n) if n else dec.dense_coefficients().astype(complex)
    mats = _PAULI_MATS / 2
    # contract each Pauli axis into a (row, col) pair; rows are gathered first
    for q in range(n):
        t = np.tensordot(t, mats, axes=([0], [0]))
    # axes now: r0, c0, r1, c1, ...
    perm = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
    t = np.transpose(t, perm) if n else t
    return _from_tensor(dec.qubits, np.asarray(t))


# -- supports and inclusion-exclusion -------------------------------------------

def _block_positions(grid: SublatticeGrid, qubits: Sequence[int]) -> list[int]:
    return [grid.block_of[q] for q in qubits]


def support(P: PauliString, grid: SublatticeGrid, qubits: Sequence[int] | None = None) -> frozenset[int]:
    """Blocks on which P acts non-trivially."""
    qubits = range(P.n) if qubits is None else qubits
    blocks = _block_positions(grid, list(qubits))
    return frozenset(blocks[i] for i, d in enumerate(P.digits()) if d)


def support_masks(dec: PauliDecomposition, grid: SublatticeGrid) -> np.ndarray:
    """Bitmask of supporting blocks for every stored Pauli string."""
    if grid.m > 62:
        raise ValueError("block masks support at most 62 blocks")
    blocks = np.array(_block_positions(grid, dec.qubits), dtype=np.int64)
    nonid = dec.digits() != 0
    if dec.n == 0:
        return np.zeros(len(dec), dtype=np.int64)
    return np.bitwise_or.reduce(np.where(nonid, np.left_shift(1, blocks)[None, :], 0), axis=1)


def mask_to_set(mask: int) -> frozenset[int]:
    out, b = [], 0
    while mask:
        if mask & 1:
            out.append(b)
        mask >>= 1
        b += 1
    return frozenset(out)


def set_to_mask(blocks: Iterable[int]) -> int:
    mask = 0
    for b in blocks:
        mask |= 1 << b
    return mask


def popcount(masks: np.ndarray) -> np.ndarray:
    return np.array([bin(int(x)).count("1") for x in masks], dtype=int)


def max_component_sizes(masks: np.ndarray, grid: SublatticeGrid) -> np.ndarray:
    @lru_cache(maxsize=None)
    def size(mask: int) -> int:
        comps = connected_components(grid, mask_to_set(mask))
        return max((len(c) for c in comps), default=0)

    return np.array([size(int(x)) for x in masks], dtype=int)


def apply_inclusion_exclusion(P: PauliString, A: Iterable[int], grid: SublatticeGrid) -> PauliString | None:
    """(M_A (x) D_{J minus A})(P): P itself when its support is exactly A, else zero (None)."""
    return P if support(P, grid) == frozenset(A) else None


def _positions_of_blocks(op: HermitianOperator, grid: SublatticeGrid, blocks: Iterable[int]) -> list[int]:
    blocks = set(blocks)
    return [i for i, q in enumerate(op.qubits) if grid.block_of[q] in blocks]


def inclusion_exclusion_map(op: HermitianOperator, grid: SublatticeGrid, A: Iterable[int],
                            include_rest: bool = True) -> HermitianOperator:
    """Apply (I - D_j) for every block j in A by composition, then D on the other blocks.

    With ``include_rest=False`` only M_A is applied and the other blocks are left alone.
    """
    A = frozenset(A)
    for b in A:
        grid._check(b)
    k = op.k
    t = op.tensor()
    for b in sorted(A):
        pos = _positions_of_blocks(op, grid, [b])
        t = t - _complete_depolarize(t, k, pos)
    if include_rest:
        rest = _positions_of_blocks(op, grid, set(range(grid.m)) - A)
        t = _complete_depolarize(t, k, rest)
    return _from_tensor(op.qubits, t)


def inclusion_exclusion_term(state: HermitianOperator, grid: SublatticeGrid, A: Iterable[int]) -> HermitianOperator:
    """M_A(rho_A) (x) sigma_{J minus A} via the signed sum over B within A."""
    A = frozenset(A)
    for b in A:
        grid._check(b)
    check_dense_guard(state.k, "inclusion-exclusion term")
    k = state.k
    t0 = state.tensor()
    rest = set(range(grid.m)) - A
    acc = np.zeros_like(t0)
    for r in range(len(A) + 1):
        for B in itertools.combinations(sorted(A), r):
            pos = _positions_of_blocks(state, grid, rest | set(B))
            acc = acc + (-1) ** r * _complete_depolarize(t0, k, pos)
    return _from_tensor(state.qubits, acc)


def _subsets(m: int, keep) -> Iterable[frozenset[int]]:
    for r in range(m + 1):
        for A in itertools.combinations(range(m), r):
            if keep(frozenset(A)):
                yield frozenset(A)


def inclusion_exclusion_sum(state: HermitianOperator, grid: SublatticeGrid, keep) -> HermitianOperator:
    """Sum of inclusion-exclusion terms over block subsets A with ``keep(A)`` true.

    Each term is expanded by the signed sum over B within A and the resulting
    depolarization patterns are merged before evaluation.
    """
    if grid.m > MAX_ENUM_BLOCKS:
        raise ValueError(f"{grid.m} blocks exceed the subset enumeration limit {MAX_ENUM_BLOCKS}")
    check_dense_guard(state.k, "inclusion-exclusion sum")
    m = grid.m
    weights: dict[frozenset[int], int] = {}
    for A in _subsets(m, keep):
        rest = frozenset(range(m)) - A
        for r in range(len(A) + 1):
            for B in itertools.combinations(sorted(A), r):
                dep = rest | frozenset(B)
                weights[dep] = weights.get(dep, 0) + (-1) ** r
    k = state.k
    t0 = state.tensor()
    acc = np.zeros_like(t0)
    for dep in sorted(weights, key=lambda s: (len(s), sorted(s))):
        w = weights[dep]
        if w:
            acc = acc + w * _complete_depolarize(t0, k, _positions_of_blocks(state, grid, dep))
    return _from_tensor(state.qubits, acc)


def inclusion_exclusion_reconstruct(state: HermitianOperator, grid: SublatticeGrid) -> HermitianOperator:
    """Sum of every term M_A(rho_A) (x) sigma_{J minus A}; recovers the input."""
    if grid.m > MAX_ENUM_BLOCKS:
        raise ValueError(f"{grid.m} blocks exceed the subset enumeration limit {MAX_ENUM_BLOCKS}")
    acc = None
    for A in _subsets(grid.m, lambda A: True):
        term = inclusion_exclusion_term(state, grid, A)
        acc = term if acc is None else acc + term
    return acc


def sparse_approximation(state: HermitianOperator, grid: SublatticeGrid, k: int) -> HermitianOperator:
    return inclusion_exclusion_sum(state, grid, lambda A: len(A) <= k)


def percolated_approximation(state: HermitianOperator, grid: SublatticeGrid, ell: int) -> HermitianOperator:
    def keep(A):
        return all(len(c) <= ell for c in connected_components(grid, A))

    return inclusion_exclusion_sum(state, grid, keep)


# -- truncations in the Pauli basis ----------------------------------------------

def truncate_sparse(dec: PauliDecomposition, grid: SublatticeGrid, k: int) -> PauliDecomposition:
    """Drop every Pauli term supported on more than k blocks."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return dec.filtered(popcount(support_masks(dec, grid)) <= k)


def truncate_percolated(dec: PauliDecomposition, grid: SublatticeGrid, ell: int) -> PauliDecomposition:
    """Drop every Pauli term whose support has a connected component of more than ell blocks."""
    if ell < 0:
        raise ValueError("ell must be >= 0")
    return dec.filtered(max_component_sizes(support_masks(dec, grid), grid) <= ell)


def pauli_expectation(op: HermitianOperator, P: PauliString) -> float:
    """Tr(op P) for a Pauli string over all of op's qubits."""
    return float(np.real(np.trace(op.matrix @ P.matrix())))


def support_statistics(dec: PauliDecomposition, grid: SublatticeGrid) -> list[dict]:
    """Coefficient mass grouped by support size and by largest connected component.

    ``hs_weight`` is the share of Tr(op^2) carried by each group.
    """
    masks = support_masks(dec, grid)
    sizes = popcount(masks)
    comps = max_component_sizes(masks, grid)
    c = dec.coeffs
    total = float(np.sum(c ** 2)) or 1.0
    rows = []
    for by, key in (("support_size", sizes), ("largest_component", comps)):
        for v in range(grid.m + 1):
            sel = key == v
            rows.append({
                "by": by,
                "value": v,
                "count": int(sel.sum()),
                "l1_mass": float(np.sum(np.abs(c[sel]))),
                "hs_weight": float(np.sum(c[sel] ** 2)) / total,
            })
    return rows
