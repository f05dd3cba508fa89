"""Pure-state simulation, batched over independent trajectories."""

from __future__ import annotations

import numpy as np

from .circuit import Circuit
from .dense import GuardError, STATEVECTOR_ENV, max_statevector_qubits

_PAULIS = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def check_statevector_guard(n: int) -> None:
    limit = max_statevector_qubits()
    if n > limit:
        raise GuardError(f"state-vector simulation needs {n} qubits; limit is {limit} (set {STATEVECTOR_ENV} to raise it)")


def zero_batch(n: int, batch: int) -> np.ndarray:
    psi = np.zeros((batch,) + (2,) * n, dtype=complex)
    psi[(slice(None),) + (0,) * n] = 1.0
    return psi


def apply_gate_batch(psi: np.ndarray, u: np.ndarray, targets) -> np.ndarray:
    """Apply the same k-qubit unitary to every state in the batch (axis 0)."""
    k = len(targets)
    axes = [1 + q for q in targets]
    ut = u.reshape((2,) * (2 * k))
    out = np.tensordot(ut, psi, axes=(list(range(k, 2 * k)), axes))
    # tensordot puts the gate outputs first; move them back into place
    return np.moveaxis(out, list(range(k)), axes)


def apply_pauli_masks(psi: np.ndarray, q: int, which: np.ndarray) -> np.ndarray:
    """Apply Pauli ``which[b]`` (0..3) on qubit q to trajectory b."""
    ax = 1 + q
    out = psi.copy()
    for code in (1, 2, 3):
        sel = which == code
        if not sel.any():
            continue
        sub = np.tensordot(_PAULIS[code], psi[sel], axes=([1], [ax]))
        out[sel] = np.moveaxis(sub, 0, ax)
    return out


def simulate_statevector(circuit: Circuit) -> np.ndarray:
    """Noiseless output state vector, big-endian, shape (2^n,)."""
    n = circuit.n
    check_statevector_guard(n)
    psi = zero_batch(n, 1)
    for layer in circuit.layers:
        for gate in layer:
            psi = apply_gate_batch(psi, gate.matrix, gate.targets)
    return psi.reshape(-1)


def run_trajectory_states(circuit: Circuit, errors: np.ndarray) -> np.ndarray:
    """Evolve one state per row of ``errors``.

    ``errors`` has shape (batch, depth, n) with entries 0..3: the Pauli applied
    to each qubit after each layer. Returns state tensors, shape (batch, 2, ..., 2).
    """
    n = circuit.n
    check_statevector_guard(n)
    errors = np.asarray(errors)
    psi = zero_batch(n, errors.shape[0])
    for t, layer in enumerate(circuit.layers):
        for gate in layer:
            psi = apply_gate_batch(psi, gate.matrix, gate.targets)
        for q in range(n):
            if errors[:, t, q].any():
                psi = apply_pauli_masks(psi, q, errors[:, t, q])
    return psi


def run_trajectories(circuit: Circuit, errors: np.ndarray) -> np.ndarray:
    """Born probabilities of each trajectory, shape (batch, 2^n)."""
    psi = run_trajectory_states(circuit, errors)
    return np.abs(psi.reshape(psi.shape[0], -1)) ** 2


def pauli_expectations(psi: np.ndarray, digits) -> np.ndarray:
    """<psi|P|psi> for each state in the batch; ``digits[q]`` in 0..3 names P's factor on q."""
    out = psi
    for q, dgt in enumerate(digits):
        if dgt:
            out = np.moveaxis(np.tensordot(_PAULIS[dgt], out, axes=([1], [1 + q])), 0, 1 + q)
    b = psi.shape[0]
    return np.real(np.sum(psi.reshape(b, -1).conj() * out.reshape(b, -1), axis=1))
