"""Bitstring samplers and exact enumeration of their sampling laws.

Every bit-by-bit sampler is driven by a step function returning the
probability of a 1 for the next bit given a batch of prefix indices. The
same step functions build the enumerated laws, so a law computed here is the
law of the code that draws the samples.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from math import comb
from typing import Callable, Sequence

import numpy as np

from .circuit import RNG_NAME, Circuit, circuit_hash
from .dense import (
    ZERO_CONDITION,
    Distribution,
    GuardError,
    MarginalOracle,
    QuasiDistribution,
    max_statevector_qubits,
)
from .lattice import SublatticeGrid
from .statevector import check_statevector_guard, run_trajectories

METHODS = ("uniform", "exact", "trajectory", "sparse", "patching")
TRAJECTORY_CHUNK = 4096


@dataclass
class SampleBatch:
    n: int
    bitstrings: list[str]
    method: str
    seed: int
    generator: str = RNG_NAME
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        for s in self.bitstrings:
            if len(s) != self.n:
                raise ValueError(f"bitstring {s!r} does not have length {self.n}")

    def __len__(self) -> int:
        return len(self.bitstrings)

    def counts(self) -> np.ndarray:
        out = np.zeros(2 ** self.n, dtype=np.int64)
        for s in self.bitstrings:
            out[int(s, 2) if s else 0] += 1
        return out

    def empirical(self) -> np.ndarray:
        c = self.counts().astype(float)
        return c / max(1, len(self))

    def text(self) -> str:
        return "".join(s + "\n" for s in self.bitstrings)

    def metadata(self, circuit: Circuit | None = None) -> dict:
        meta = {
            "method": self.method,
            "seed": self.seed,
            "generator": self.generator,
            "n": self.n,
            "count": len(self),
            "diagnostics": self.diagnostics,
        }
        if circuit is not None:
            meta["circuit_hash"] = circuit_hash(circuit)
        return meta

    def write(self, path, circuit: Circuit | None = None, extra: dict | None = None) -> None:
        with open(path, "w") as fh:
            fh.write(self.text())
        meta = self.metadata(circuit)
        meta.update(extra or {})
        with open(str(path) + ".meta.json", "w") as fh:
            json.dump(meta, fh, sort_keys=True, indent=1)
            fh.write("\n")


def _bits_from_array(arr: np.ndarray) -> list[str]:
    return ["".join("1" if b else "0" for b in row) for row in arr]


# -- sanitization ---------------------------------------------------------------

def sanitize(q: QuasiDistribution | np.ndarray) -> tuple[Distribution | np.ndarray, float]:
    """Clamp negative entries to zero and renormalize; also returns the clamped mass."""
    vals = np.asarray(q.probs if isinstance(q, QuasiDistribution) else q, dtype=float)
    neg = float(-vals[vals < 0].sum())
    pos = np.clip(vals, 0.0, None)
    total = pos.sum()
    if not total > 0:
        raise ValueError("quasi-distribution has no positive mass")
    out = pos / total
    if isinstance(q, QuasiDistribution):
        return Distribution(q.qubits, out), neg
    return out, neg


def _sanitize_pairs(p0: np.ndarray, p1: np.ndarray, strict: bool = True):
    """Per-row clamp-and-renormalize of (p0, p1); returns P(bit=1), clamped mass, dead rows."""
    a = np.clip(p0, 0.0, None)
    b = np.clip(p1, 0.0, None)
    tot = a + b
    clamped = np.clip(-p0, 0.0, None) + np.clip(-p1, 0.0, None)
    dead = ~(tot > 0)
    if strict and dead.any():
        raise ValueError("conditioning prefix has zero sanitized probability")
    with np.errstate(invalid="ignore", divide="ignore"):
        q1 = np.where(dead, 0.5, b / np.where(dead, 1.0, tot))
    # clamped mass expressed relative to the step's positive mass
    rel = np.where(dead, 0.0, clamped / np.where(dead, 1.0, tot))
    return q1, rel, dead


# Step: (i, prefixes) -> (P(bit i = 1), clamped mass per prefix)
Step = Callable[[int, np.ndarray], tuple[np.ndarray, np.ndarray]]


def _run_chain(n: int, step: Step, tape: np.ndarray) -> tuple[np.ndarray, float, int]:
    count = tape.shape[0]
    prefix = np.zeros(count, dtype=np.int64)
    bits = np.zeros((count, n), dtype=np.int8)
    clamped, events = 0.0, 0
    for i in range(n):
        if count == 0:
            break
        q1, cl = step(i, prefix)
        b = tape[:, i] < q1
        bits[:, i] = b
        prefix = 2 * prefix + b
        clamped += float(cl.sum())
        events += int(np.count_nonzero(cl > 0))
    return bits, clamped, events


def _chain_law(n: int, step: Step) -> np.ndarray:
    law = np.ones(1)
    for i in range(n):
        q1, _ = step(i, np.arange(2 ** i))
        law = np.stack([law * (1 - q1), law * q1], axis=1).reshape(-1)
    return law


def _check_enumerable(n: int) -> None:
    limit = max_statevector_qubits()
    if n > limit:
        raise GuardError(f"a length-{n} probability vector exceeds the limit of {limit} qubits")


# -- uniform ------------------------------------------------------------------------

def sample_uniform(n: int, seed: int = 0, count: int = 1) -> SampleBatch:
    rng = np.random.default_rng(seed)
    arr = rng.integers(0, 2, size=(count, n), dtype=np.int8)
    return SampleBatch(n, _bits_from_array(arr), "uniform", seed)


def uniform_law(n: int) -> np.ndarray:
    return np.full(2 ** n, 2.0 ** -n)


# -- exact -------------------------------------------------------------------------

def _exact_step(circuit: Circuit, oracle: MarginalOracle, strict: bool = True) -> Step:
    def step(i, prefixes):
        v = oracle.probs(range(i + 1))
        q1, cl, _ = _sanitize_pairs(v[2 * prefixes], v[2 * prefixes + 1], strict)
        return q1, cl

    return step


def sample_exact(circuit: Circuit, seed: int = 0, count: int = 1, method: str = "auto") -> SampleBatch:
    """Bit-by-bit sampling from exact prefix marginals of the dephased output."""
    n = circuit.n
    _check_enumerable(n)
    rng = np.random.default_rng(seed)
    tape = rng.random((count, n))
    bits, clamped, events = _run_chain(n, _exact_step(circuit, MarginalOracle(circuit, method)), tape)
    return SampleBatch(n, _bits_from_array(bits), "exact", seed,
                       diagnostics={"clamped_mass": clamped, "clamp_events": events})


def exact_law(circuit: Circuit, method: str = "auto") -> np.ndarray:
    _check_enumerable(circuit.n)
    # unreachable prefixes get weight zero, so their rows need not be valid
    return _chain_law(circuit.n, _exact_step(circuit, MarginalOracle(circuit, method), strict=False))


# -- trajectories --------------------------------------------------------------------

def _error_probs(p: float) -> np.ndarray:
    return np.array([1 - 0.75 * p, p / 4, p / 4, p / 4])


def _draw_outcomes(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(probs, axis=1)
    idx = (cdf < (u * cdf[:, -1])[:, None]).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


def sample_trajectory(circuit: Circuit, seed: int = 0, count: int = 1) -> SampleBatch:
    """Unravel each depolarizing site into a random Pauli, evolve pure states, measure."""
    n, d = circuit.n, circuit.depth
    check_statevector_guard(n)
    rng = np.random.default_rng(seed)
    out: list[str] = []
    done = 0
    while done < count:
        b = min(TRAJECTORY_CHUNK, count - done)
        errors = rng.choice(4, size=(b, d, n), p=_error_probs(circuit.p))
        u = rng.random(b)
        idx = _draw_outcomes(run_trajectories(circuit, errors), u)
        out.extend(format(int(i), f"0{n}b") if n else "" for i in idx)
        done += b
    return SampleBatch(n, out, "trajectory", seed)


def trajectory_law(circuit: Circuit, max_patterns: int = 1 << 20) -> np.ndarray:
    """Exact law of the trajectory sampler by enumerating every error pattern."""
    n, d = circuit.n, circuit.depth
    check_statevector_guard(n)
    sites = n * d
    if circuit.p == 0.0:
        return run_trajectories(circuit, np.zeros((1, d, n), dtype=np.int8))[0]
    if 4 ** sites > max_patterns:
        raise GuardError(f"{4 ** sites} error patterns exceed the enumeration limit {max_patterns}")
    w1 = _error_probs(circuit.p)
    law = np.zeros(2 ** n)
    codes = np.arange(4 ** sites, dtype=np.int64)
    for start in range(0, len(codes), TRAJECTORY_CHUNK):
        chunk = codes[start:start + TRAJECTORY_CHUNK]
        digits = (chunk[:, None] >> (2 * np.arange(sites))[None, :]) & 3
        weights = np.prod(w1[digits], axis=1)
        probs = run_trajectories(circuit, digits.reshape(-1, d, n))
        law += weights @ probs
    return law


# -- sparse-truncation sampler ----------------------------------------------------------

def _sparse_weight(t: int, r: int, k: int) -> int:
    """Signed count of (A, B) with A within T, |A| <= k, B within A and A minus B = K, |T|=t, |K|=r."""
    return sum((-1) ** j * comb(t - r, j) for j in range(0, max(-1, k - r) + 1))


def sparse_marginal_vector(oracle: MarginalOracle, grid: SublatticeGrid, k: int,
                           subset: Sequence[int]) -> QuasiDistribution:
    """Diagonal of the sparse approximation marginalized onto ``subset``.

    Blocks disjoint from ``subset`` contribute nothing after the partial trace,
    so only block sets K touching the subset are enumerated; each carries the
    combined sign of every inclusion-exclusion term that keeps exactly K.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    subset = tuple(int(q) for q in subset)
    _check_enumerable(len(subset))
    s = len(subset)
    T = sorted(grid.blocks_touching(subset))
    acc = np.zeros((2,) * s) if s else np.zeros(())
    for r in range(min(k, len(T)) + 1):
        for K in itertools.combinations(T, r):
            w = _sparse_weight(len(T), r, k)
            if w == 0:
                continue
            kept_blocks = set(K)
            kept = [q for q in subset if grid.block_of[q] in kept_blocks]
            pk = oracle.probs(kept).reshape((2,) * len(kept)) if kept else np.ones(())
            shape = [2 if grid.block_of[q] in kept_blocks else 1 for q in subset]
            term = pk.reshape(shape) * 0.5 ** (s - len(kept))
            acc = acc + w * np.broadcast_to(term, (2,) * s)
    return QuasiDistribution(subset, np.asarray(acc).reshape(-1))


def sparse_marginal(circuit: Circuit, grid: SublatticeGrid, k: int, subset: Sequence[int],
                    prefix: str | Sequence[int], oracle: MarginalOracle | None = None) -> float:
    """Quasi-probability that ``subset`` reads ``prefix`` under the sparse approximation."""
    if len(prefix) != len(subset):
        raise ValueError("prefix length differs from the subset size")
    oracle = oracle or MarginalOracle(circuit, "lightcone")
    return sparse_marginal_vector(oracle, grid, k, subset).prob(prefix)


def _sparse_step(circuit: Circuit, grid: SublatticeGrid, k: int, oracle: MarginalOracle,
                 strict: bool = True) -> Step:
    cache: dict[int, np.ndarray] = {}

    def step(i, prefixes):
        if i not in cache:
            cache[i] = sparse_marginal_vector(oracle, grid, k, range(i + 1)).probs
        v = cache[i]
        q1, cl, _ = _sanitize_pairs(v[2 * prefixes], v[2 * prefixes + 1], strict)
        return q1, cl

    return step


def sample_sparse(circuit: Circuit, grid: SublatticeGrid, k: int, seed: int = 0, count: int = 1,
                  method: str = "lightcone") -> SampleBatch:
    """Bit-by-bit sampling from sanitized conditionals of the sparse approximation."""
    n = circuit.n
    _check_enumerable(n)
    rng = np.random.default_rng(seed)
    tape = rng.random((count, n))
    step = _sparse_step(circuit, grid, k, MarginalOracle(circuit, method))
    bits, clamped, events = _run_chain(n, step, tape)
    return SampleBatch(n, _bits_from_array(bits), "sparse", seed,
                       diagnostics={"k": k, "width": grid.width, "clamped_mass": clamped,
                                    "clamp_events": events})


@dataclass
class SparseLaw:
    law: np.ndarray
    quasi: np.ndarray

    @property
    def sanitization_deviation(self) -> float:
        """l1 distance between the sampler law and the quasi-diagonal it targets."""
        return float(np.abs(self.law - self.quasi).sum())

    @property
    def negative_mass(self) -> float:
        return float(-self.quasi[self.quasi < 0].sum())


def sparse_law(circuit: Circuit, grid: SublatticeGrid, k: int, method: str = "auto") -> SparseLaw:
    n = circuit.n
    _check_enumerable(n)
    oracle = MarginalOracle(circuit, method)
    # prefixes with no positive mass are never reached, so dead rows are allowed here
    law = _chain_law(n, _sparse_step(circuit, grid, k, oracle, strict=False))
    quasi = sparse_marginal_vector(oracle, grid, k, range(n)).probs
    return SparseLaw(law, quasi)


# -- patching sampler ---------------------------------------------------------------------

@dataclass(frozen=True)
class PatchStep:
    block: int
    boundary_blocks: tuple[int, ...]
    block_qubits: tuple[int, ...]
    boundary_qubits: tuple[int, ...]


def patching_plan(grid: SublatticeGrid, ell: int) -> list[PatchStep]:
    steps = []
    for i in range(grid.m):
        bnd = tuple(sorted(b for b in grid.boundary([i], ell) if b < i))
        steps.append(PatchStep(i, bnd, grid.qubits([i]), grid.qubits(bnd)))
    return steps


def _patch_kernel(oracle: MarginalOracle, st: PatchStep):
    """Conditional table P(block | boundary), rows indexed by boundary bits, with fallback rows."""
    nb, nj = len(st.boundary_qubits), len(st.block_qubits)
    joint = oracle.probs(st.boundary_qubits + st.block_qubits).reshape(2 ** nb, 2 ** nj)
    joint = np.clip(joint, 0.0, None)
    mass = joint.sum(axis=1)
    dead = mass <= ZERO_CONDITION
    block_marg = joint.sum(axis=0)
    block_marg = block_marg / block_marg.sum()
    with np.errstate(invalid="ignore", divide="ignore"):
        cond = np.where(dead[:, None], block_marg[None, :], joint / np.where(dead, 1.0, mass)[:, None])
    return cond, dead


def sample_patching(circuit: Circuit, grid: SublatticeGrid, ell: int, seed: int = 0, count: int = 1,
                    method: str = "lightcone") -> SampleBatch:
    """Block-by-block sampling, each block conditioned on earlier blocks within distance ell."""
    if ell < 0:
        raise ValueError("ell must be >= 0")
    n = circuit.n
    rng = np.random.default_rng(seed)
    tape = rng.random((count, n))
    oracle = MarginalOracle(circuit, method)
    bits = np.zeros((count, n), dtype=np.int8)
    fallbacks = 0
    col = 0
    for st in patching_plan(grid, ell):
        cond, dead = _patch_kernel(oracle, st)
        bidx = np.zeros(count, dtype=np.int64)
        for q in st.boundary_qubits:
            bidx = 2 * bidx + bits[:, q]
        fallbacks += int(dead[bidx].sum())
        rows = cond[bidx]
        nj = len(st.block_qubits)
        pre = np.zeros(count, dtype=np.int64)
        # bit-by-bit inside the block, in row-major qubit order
        for t, q in enumerate(st.block_qubits):
            part = rows.reshape(count, 2 ** t, 2, 2 ** (nj - t - 1)).sum(axis=3)
            sel = part[np.arange(count), pre]
            tot = sel.sum(axis=1)
            p1 = np.where(tot > 0, sel[:, 1] / np.where(tot > 0, tot, 1.0), 0.0)
            b = tape[:, col] < p1
            col += 1
            bits[:, q] = b
            pre = 2 * pre + b
    return SampleBatch(n, _bits_from_array(bits), "patching", seed,
                       diagnostics={"ell": ell, "width": grid.width, "zero_condition_fallbacks": fallbacks})


def patching_law(circuit: Circuit, grid: SublatticeGrid, ell: int, method: str = "auto",
                 oracle: MarginalOracle | None = None) -> np.ndarray:
    """Exact law of the patching sampler as a product of its conditional kernels."""
    n = circuit.n
    _check_enumerable(n)
    oracle = oracle or MarginalOracle(circuit, method)
    law = np.ones((2,) * n)
    for st in patching_plan(grid, ell):
        cond, _ = _patch_kernel(oracle, st)
        qs = st.boundary_qubits + st.block_qubits
        kern = cond.reshape((2,) * len(qs))
        order = np.argsort(qs)
        kern = np.transpose(kern, order)
        shape = [1] * n
        for q in qs:
            shape[q] = 2
        law = law * kern.reshape(shape)
    return law.reshape(-1)


def tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Unhalved l1 distance, the convention used for every distance in this package."""
    return float(np.abs(np.asarray(p) - np.asarray(q)).sum())
