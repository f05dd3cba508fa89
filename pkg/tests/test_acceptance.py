"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` and read the "acceptance criteria"
section of the terminal summary.
"""

import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from naive import I2, PAULI, naive_pauli_coeffs, naive_simulate, pauli_matrix
from noisyloc.analysis import (
    check_decay_bound,
    check_entropy_production,
    check_ie_norm_bound,
    check_markov_chain_accumulation,
    check_observable_decay,
    check_sublattice_decay,
    percolated_constant,
    sparse_constant,
    truncation_error,
)
from noisyloc.circuit import circuit_from_layers, random_local_circuit
from noisyloc.cli import main
from noisyloc.dense import HermitianOperator, MarginalOracle, random_state, simulate
from noisyloc.lattice import build_lattice, coarse_grain, critical_depth, default_width
from noisyloc.pauli import (
    PauliString,
    apply_inclusion_exclusion,
    inclusion_exclusion_map,
    inclusion_exclusion_reconstruct,
    percolated_approximation,
    sparse_approximation,
)
from noisyloc.samplers import exact_law, patching_law, sample_trajectory, sparse_law, tv_distance
from noisyloc.suite import SuiteConfig, applicability_probe, pauli_strings_up_to, projectors_up_to

SUITE6 = dict(n=6, width=2, d=3, p=0.3, seeds=10)
SUITE8 = dict(n=8, depths=(1, 2, 3, 4), ps=(0.1, 0.3, 0.5), seeds=10)


@pytest.fixture(scope="module")
def suite6():
    lat = build_lattice([SUITE6["n"]])
    grid = coarse_grain(lat, SUITE6["width"])
    out = []
    for seed in range(SUITE6["seeds"]):
        c = random_local_circuit(lat, SUITE6["d"], seed=seed, p=SUITE6["p"])
        out.append((c, grid, simulate(c)))
    return out


@pytest.fixture(scope="module")
def suite8():
    lat = build_lattice([SUITE8["n"]])
    out = []
    for d in SUITE8["depths"]:
        for p in SUITE8["ps"]:
            for seed in range(SUITE8["seeds"]):
                c = random_local_circuit(lat, d, seed=seed, p=p)
                out.append((c, simulate(c)))
    return out


def worst(reports):
    return min(r.slack for r in reports)


# -- independent oracles ------------------------------------------------------------

def twirl(mat, q, n):
    """Complete depolarization of qubit q as the Pauli twirl (1/4) sum_P P_q X P_q."""
    out = np.zeros_like(mat)
    for P in PAULI.values():
        full = pauli_matrix_embed(P, q, n)
        out += full @ mat @ full.conj().T
    return out / 4


def pauli_matrix_embed(P, q, n):
    mats = [P if i == q else I2 for i in range(n)]
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def dense_ie_map(mat, blocks, A, n):
    """(prod over j in A of (id - D_j)) composed with D on every other block."""
    out = mat
    for j, qs in enumerate(blocks):
        dep = out
        for q in qs:
            dep = twirl(dep, q, n)
        out = out - dep if j in A else dep
    return out


def runs(sorted_blocks):
    """Connected components of a set of 1D blocks are maximal runs of consecutive indices."""
    comps, cur = [], []
    for b in sorted_blocks:
        if cur and b != cur[-1] + 1:
            comps.append(cur)
            cur = []
        cur.append(b)
    return comps + ([cur] if cur else [])


def scan_critical_depth(p, D, c):
    """Smallest d >= 1 with (1-p)^d (4d)^D < 1/c, in exact rational arithmetic."""
    q = 1 - Fraction(str(p))
    target = 1 / Fraction(c)
    d = 1
    while q ** d * (4 * d) ** D >= target:
        d += 1
    return d


# -- criteria -----------------------------------------------------------------------

def test_criterion_1_inclusion_exclusion_completeness(suite6, acceptance):
    t0 = time.perf_counter()
    dev = 0.0
    for _, grid, rho in suite6:
        rec = inclusion_exclusion_reconstruct(rho, grid)
        dev = max(dev, float(np.max(np.abs(rec.matrix - rho.matrix))))
    elapsed = time.perf_counter() - t0
    acceptance("1", dev <= 1e-9 and elapsed < 30,
               f"max deviation {dev:.2e} (tol 1e-9), {elapsed:.1f}s (limit 30s)")


def test_criterion_2_pauli_projection_identity(acceptance):
    n = 4
    grid = coarse_grain(build_lattice([n]), 1)
    blocks = grid.sublattices
    support_mismatch = 0
    dense_dev = 0.0
    cases = 0
    for code in range(4 ** n):
        P = PauliString(n, code)
        mat = pauli_matrix(P.label)
        supp = {q for q, ch in enumerate(P.label) if ch != "I"}
        op = HermitianOperator(tuple(range(n)), mat)
        for r in range(n + 1):
            for A in itertools.combinations(range(grid.m), r):
                cases += 1
                want = dense_ie_map(mat, blocks, set(A), n)
                got = apply_inclusion_exclusion(P, A, grid)
                survives = supp == set(A)
                if (got is not None) != survives:
                    support_mismatch += 1
                projected = mat if got is not None else np.zeros_like(mat)
                if not np.allclose(want, projected, atol=1e-10, rtol=0):
                    support_mismatch += 1
                mapped = inclusion_exclusion_map(op, grid, A)
                dense_dev = max(dense_dev, float(np.max(np.abs(mapped.matrix - want))))
    acceptance("2", support_mismatch == 0 and dense_dev <= 1e-10,
               f"{cases} (P, A) cases, {support_mismatch} support mismatches, "
               f"dense deviation {dense_dev:.2e} (tol 1e-10)")


def test_criterion_3_entropy_production(acceptance):
    ps = (0.1, 0.5, 0.9)
    checks = violations = 0
    slack = math.inf
    for s in range(100):
        rng = np.random.default_rng([3, s])
        n = 1 + s % 5
        rho = random_state(n, rng, rank=None if s % 3 else 1 + s % (2 ** n))
        for r in range(1, n + 1):
            for A in itertools.combinations(range(n), r):
                for p in ps:
                    rep = check_entropy_production(rho, A, p)
                    checks += 1
                    violations += rep.slack < -1e-9
                    slack = min(slack, rep.slack)
    acceptance("3", violations == 0, f"{checks} checks, {violations} violations, worst slack {slack:.2e}")


def test_criterion_4_circuit_and_sublattice_decay(suite8, acceptance):
    reports = []
    for c, rho in suite8:
        for r in (1, 2):
            for A in itertools.combinations(range(c.n), r):
                reports.append(check_decay_bound(c, A, rho))
        reports += check_sublattice_decay(c, coarse_grain(c.lattice, default_width(c.depth)), rho)
    bad = sum(not r.passed for r in reports)
    acceptance("4", bad == 0, f"{len(reports)} checks on {len(suite8)} circuits, {bad} violations, "
                              f"worst slack {worst(reports):.2e}")


def test_criterion_5_ie_norm_bound(suite8, acceptance):
    reports = []
    nontrivial = 0
    for c, rho in suite8:
        grid = coarse_grain(c.lattice, default_width(c.depth))
        for r in range(min(3, grid.m) + 1):
            for A in itertools.combinations(range(grid.m), r):
                rep = check_ie_norm_bound(c, grid, A, rho)
                # independent recomputation of min(2^|A|, (2 x^(1/(2*3^D)))^|A|)
                x = (1 - c.p) ** c.depth * (4 * c.depth) ** c.lattice.D
                want = 2.0 ** len(A)
                if x < 1:
                    want = min(want, (2 * x ** (1 / 6)) ** len(A))
                    nontrivial += want < 2.0 ** len(A)
                assert rep.bound == pytest.approx(want, rel=1e-12)
                reports.append(rep)
    bad = sum(not r.passed for r in reports)
    acceptance("5", bad == 0, f"{len(reports)} checks, {bad} violations, {nontrivial} with the "
                              f"non-trivial branch, worst slack {worst(reports):.2e}")


def test_criterion_6_truncation_pauli_equivalence(suite6, acceptance):
    dev = 0.0
    n = SUITE6["n"]
    labels = ["".join(t) for t in itertools.product("IXYZ", repeat=n)]
    mats = {lab: pauli_matrix(lab) for lab in labels}
    for _, grid, rho in suite6:
        coeffs = naive_pauli_coeffs(rho.matrix)
        blocks_of = {lab: sorted({q // SUITE6["width"] for q, ch in enumerate(lab) if ch != "I"})
                     for lab in labels}
        for v in range(grid.m + 1):
            sparse = sum(coeffs[lab] * mats[lab] for lab in labels if len(blocks_of[lab]) <= v) / 2 ** n
            perc = sum(coeffs[lab] * mats[lab] for lab in labels
                       if all(len(cc) <= v for cc in runs(blocks_of[lab]))) / 2 ** n
            dev = max(dev, float(np.max(np.abs(sparse_approximation(rho, grid, v).matrix - sparse))))
            dev = max(dev, float(np.max(np.abs(percolated_approximation(rho, grid, v).matrix - perc))))
    acceptance("6", dev <= 1e-9, f"max deviation {dev:.2e} over k, ell in 0..m (tol 1e-9)")


def test_criterion_7a_exact_sampler_law(suite6, acceptance):
    dev = 0.0
    for c, _, _ in suite6:
        want = np.real(np.diag(naive_simulate(c)))
        dev = max(dev, float(np.max(np.abs(exact_law(c) - want))))
    acceptance("7a", dev <= 1e-12, f"max deviation from the dense diagonal {dev:.2e} (tol 1e-12)")


def test_criterion_7b_patching_full_window(suite6, acceptance):
    tv = 0.0
    for c, grid, _ in suite6:
        P = np.real(np.diag(naive_simulate(c)))
        tv = max(tv, tv_distance(patching_law(c, grid, grid.m), P))
    acceptance("7b", tv <= 1e-12, f"max l1 distance with ell = m: {tv:.2e} (tol 1e-12)")


def test_criterion_7c_sparse_full_order(suite6, acceptance):
    tv = 0.0
    for c, grid, _ in suite6:
        P = np.real(np.diag(naive_simulate(c)))
        tv = max(tv, tv_distance(sparse_law(c, grid, grid.m).law, P))
    acceptance("7c", tv <= 1e-12, f"max l1 distance with k = m: {tv:.2e} (tol 1e-12)")


def test_criterion_7d_trajectory_statistics(acceptance):
    c = random_local_circuit(build_lattice([4]), 3, seed=0, p=0.3)
    P = np.real(np.diag(naive_simulate(c)))
    emp = sample_trajectory(c, seed=7, count=100_000).empirical()
    tv = tv_distance(emp, P)
    acceptance("7d", tv <= 0.02, f"empirical l1 distance {tv:.4f} from 1e5 shots (tol 0.02)")


def test_criterion_8_observable_decay(suite6, acceptance):
    paulis, projs = [], []
    for c, _, rho in suite6:
        paulis += [check_observable_decay(c, P, rho) for P in pauli_strings_up_to(c.n, 3) if P.weight]
        projs += [check_observable_decay(c, O, rho) for O in projectors_up_to(c.n, 3)]
    sat = []
    for p in (0.05, 0.2, 0.5, 0.9):
        c = circuit_from_layers([1], [[]], p=p)
        rep = check_observable_decay(c, PauliString.from_label("Z"))
        sat.append(abs(rep.measured - (1 - p)))
    bad_p = sum(not r.passed for r in paulis)
    bad_o = sum(not r.passed for r in projs)
    sat_dev = max(sat)
    acceptance("8", bad_p == 0 and bad_o == 0 and sat_dev <= 1e-12,
               f"{len(paulis)} Pauli checks ({bad_p} violations), {len(projs)} projector checks "
               f"({bad_o} violations, worst slack {worst(projs):.3f}), saturation deviation {sat_dev:.1e}")


def test_criterion_9_critical_depth(acceptance):
    cases = {(0.5, 1, 1): 5, (0.1, 1, 1): 51}
    got = {k: critical_depth(*k) for k in cases}
    scanned = {k: scan_critical_depth(*k) for k in cases}
    extra = [(p, D, c) for p in (0.05, 0.2, 0.3, 0.7) for D in (1, 2) for c in (1, 10, 1e3)]
    agree = all(critical_depth(*k) == scan_critical_depth(*k) for k in extra)
    ok = got == cases and scanned == cases and agree
    acceptance("9", ok, f"solver {got}, exact scan {scanned}, {len(extra)} further cases agree: {agree}")


def test_criterion_10_markov_accumulation(suite8, acceptance):
    reports = []
    for c, _ in suite8:
        grid = coarse_grain(c.lattice, 2)
        oracle = MarginalOracle(c, "dense")
        for ell in (1, 2):
            reports.append(check_markov_chain_accumulation(c, grid, ell, oracle))
    bad = sum(not r.passed for r in reports)
    acceptance("10", bad == 0, f"{len(reports)} checks, {bad} violations, worst slack {worst(reports):.2e}")


def test_criterion_11_theorem_bounds_flagged(suite8, acceptance):
    problems = []
    observations = 0
    # every suite instance: flag matches an independent applicability test
    for c, rho in suite8[::7]:
        grid = coarse_grain(c.lattice, default_width(c.depth))
        for scheme, c_thm in (("sparse", sparse_constant(grid.m, c.n, 1)), ("percolated", percolated_constant(1))):
            rep = truncation_error(c, grid, scheme, 1, rho)
            applicable = c.depth >= scan_critical_depth(c.p, 1, c_thm) and grid.width == 2 * c.depth
            if rep.flags["applicable"] != applicable or rep.asserted != applicable:
                problems.append(f"flag {scheme} d={c.depth} p={c.p}")
            observations += not rep.asserted
            if not (math.isfinite(rep.measured) and math.isfinite(rep.bound)):
                problems.append("missing measured/bound pair")
    # deep probe: the bounds apply and are asserted
    asserted = 0
    for item in applicability_probe(SuiteConfig()):
        for rep in item.reports:
            if rep.name.startswith("truncation"):
                if not rep.flags["applicable"]:
                    problems.append(f"probe at d={item.extra['probe_depth']} not applicable")
                asserted += rep.asserted
                if not rep.passed:
                    problems.append(f"{rep.name} violated at p={rep.params['p']}")
    ok = not problems and asserted > 0 and observations > 0
    acceptance("11", ok, f"{asserted} asserted probe bounds, {observations} suite observations, "
                         f"problems: {problems or 'none'}")


def test_criterion_12_full_verify_runtime(tmp_path, acceptance):
    out = tmp_path / "verify.jsonl"
    t0 = time.perf_counter()
    code = main(["verify", "--out", str(out)])
    elapsed = time.perf_counter() - t0
    lines = out.read_text().splitlines()
    acceptance("12", code == 0 and elapsed < 600,
               f"default verify exit {code}, {len(lines)} records in {elapsed:.0f}s (limit 600s)")
