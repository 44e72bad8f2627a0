"""Dense statevector reference for small circuits (qubit 0 is the most significant bit)."""

from __future__ import annotations

import numpy as np

from repcat.core import GateKind

H1 = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def basis_bits(n: int) -> np.ndarray:
    idx = np.arange(2 ** n)
    return (idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1


def plus_state(n: int, signs=None) -> np.ndarray:
    psi = np.ones(2 ** n, complex) / np.sqrt(2 ** n)
    if signs is not None:
        bits = basis_bits(n)
        for q, s in enumerate(signs):
            if s:
                psi = psi * (1 - 2 * bits[:, q])
    return psi


def gate_matrix(kind: GateKind, qubits, n: int) -> np.ndarray:
    """Full ``2^n`` unitary of a Clifford or Toffoli gate."""
    bits = basis_bits(n)
    dim = 2 ** n
    if kind is GateKind.PAULI_Z:
        return np.diag(1 - 2 * bits[:, qubits[0]]).astype(complex)
    if kind is GateKind.CZ:
        a, b = qubits
        return np.diag(1 - 2 * (bits[:, a] & bits[:, b])).astype(complex)
    perm_src = np.arange(dim)
    if kind is GateKind.PAULI_X:
        flip = bits.copy()
        flip[:, qubits[0]] ^= 1
    elif kind is GateKind.CNOT:
        c, t = qubits
        flip = bits.copy()
        flip[:, t] ^= bits[:, c]
    elif kind is GateKind.CCX:
        a, b, t = qubits
        flip = bits.copy()
        flip[:, t] ^= bits[:, a] & bits[:, b]
    elif kind is GateKind.SWAP:
        a, b = qubits
        flip = bits.copy()
        flip[:, [a, b]] = flip[:, [b, a]]
    else:
        raise ValueError(kind)
    dst = flip @ (1 << (n - 1 - np.arange(n)))
    U = np.zeros((dim, dim), complex)
    U[dst, perm_src] = 1
    return U


def error_matrix(zs, czs, n: int) -> np.ndarray:
    U = np.eye(2 ** n, dtype=complex)
    for q in zs:
        U = gate_matrix(GateKind.PAULI_Z, (q,), n) @ U
    for a, b in czs:
        U = gate_matrix(GateKind.CZ, (a, b), n) @ U
    return U


def x_basis_probabilities(psi: np.ndarray, n: int) -> np.ndarray:
    """Probability of each X-basis outcome string (bit 1 = outcome -1)."""
    Hn = np.array([[1.0]])
    for _ in range(n):
        Hn = np.kron(Hn, H1)
    return np.abs(Hn @ psi) ** 2
