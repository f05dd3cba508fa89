"""Slow reference implementations used as test oracles.

Nothing here imports the package's simulation code: operators are built as
full 2^n x 2^n matrices with Kronecker products, noise is applied through
its Kraus operators, and Pauli coefficients are traces against explicit
Pauli matrices.
"""

from __future__ import annotations

import itertools
from functools import reduce

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}


def kron_all(mats):
    return reduce(np.kron, mats, np.ones((1, 1), dtype=complex))


def embed_single(u, q, n):
    return kron_all([u if i == q else I2 for i in range(n)])


def embed_two(u, a, b, n):
    """Full-register matrix of a 4x4 gate with ``a`` as the most significant target."""
    dim = 2 ** n
    out = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        bits = [(col >> (n - 1 - i)) & 1 for i in range(n)]
        sub = 2 * bits[a] + bits[b]
        for r in range(4):
            amp = u[r, sub]
            if amp == 0:
                continue
            nb = list(bits)
            nb[a], nb[b] = r >> 1, r & 1
            row = int("".join(map(str, nb)), 2)
            out[row, col] += amp
    return out


def gate_matrix(gate, n):
    if len(gate.targets) == 1:
        return embed_single(gate.matrix, gate.targets[0], n)
    return embed_two(gate.matrix, gate.targets[0], gate.targets[1], n)


def depolarize_kraus(rho, q, p, n):
    ks = [np.sqrt(1 - 0.75 * p) * I2] + [np.sqrt(p / 4) * P for P in (X, Y, Z)]
    out = np.zeros_like(rho)
    for k in ks:
        K = embed_single(k, q, n)
        out += K @ rho @ K.conj().T
    return out


def naive_simulate(circuit):
    n = circuit.n
    rho = np.zeros((2 ** n, 2 ** n), dtype=complex)
    rho[0, 0] = 1
    for layer in circuit.layers:
        for g in layer:
            U = gate_matrix(g, n)
            rho = U @ rho @ U.conj().T
        for q in range(n):
            rho = depolarize_kraus(rho, q, circuit.p, n)
    return rho


def naive_statevector(circuit):
    n = circuit.n
    psi = np.zeros(2 ** n, dtype=complex)
    psi[0] = 1
    for layer in circuit.layers:
        for g in layer:
            psi = gate_matrix(g, n) @ psi
    return psi


def naive_partial_trace(rho, keep, n):
    """Reduced matrix on ``keep`` (sorted order) by summing over the other bits."""
    keep = sorted(keep)
    rest = [q for q in range(n) if q not in keep]
    k = len(keep)
    out = np.zeros((2 ** k, 2 ** k), dtype=complex)
    for r in range(2 ** k):
        for c in range(2 ** k):
            for e in range(2 ** len(rest)):
                def full(x):
                    bits = [0] * n
                    for i, q in enumerate(keep):
                        bits[q] = (x >> (k - 1 - i)) & 1
                    for i, q in enumerate(rest):
                        bits[q] = (e >> (len(rest) - 1 - i)) & 1
                    return int("".join(map(str, bits)), 2) if n else 0
                out[r, c] += rho[full(r), full(c)]
    return out


def pauli_matrix(label):
    return kron_all([PAULI[ch] for ch in label])


def naive_pauli_coeffs(rho):
    n = int(np.log2(rho.shape[0]))
    return {"".join(lab): float(np.real(np.trace(rho @ pauli_matrix("".join(lab)))))
            for lab in itertools.product("IXYZ", repeat=n)}


def entropy_bits(mat):
    w = np.linalg.eigvalsh(mat)
    w = w[w > 1e-15]
    return float(-(w * np.log2(w)).sum())


def naive_lightcone(circuit, region):
    """L_0 by iterating every layer to a fixed point, without relying on disjoint gates."""
    cur = set(region)
    for layer in reversed(circuit.layers):
        changed = True
        while changed:
            changed = False
            for g in layer:
                if len(g.targets) == 2 and (set(g.targets) & cur) and not set(g.targets) <= cur:
                    cur |= set(g.targets)
                    changed = True
    return cur
