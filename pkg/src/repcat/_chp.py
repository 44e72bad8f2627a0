"""Numba kernels for an Aaronson-Gottesman (CHP) stabilizer tableau.

A tableau over ``n`` qubits is stored as three arrays with ``2n + 1`` rows:
``x[2n+1, n]``, ``z[2n+1, n]`` (uint8 bits) and ``r[2n+1]`` (sign bit).
Rows ``0..n-1`` are destabilizers, rows ``n..2n-1`` stabilizers and row
``2n`` is scratch space for deterministic measurements.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def init_plus(x, z, r, signs):
    """Reset to the product state with stabilizers ``(-1)^signs[q] X_q``."""
    n = x.shape[1]
    x[:, :] = 0
    z[:, :] = 0
    r[:] = 0
    for q in range(n):
        z[q, q] = 1
        x[n + q, q] = 1
        r[n + q] = signs[q]


@njit(cache=True)
def _g(x1, z1, x2, z2):
    # explicit signed casts: int() keeps uint8 unsigned under numba
    a, b, c, d = np.int64(x1), np.int64(z1), np.int64(x2), np.int64(z2)
    if a == 0 and b == 0:
        return np.int64(0)
    if a == 1 and b == 1:
        return d - c
    if a == 1 and b == 0:
        return d * (2 * c - 1)
    return c * (1 - 2 * d)


@njit(cache=True)
def rowsum(x, z, r, h, i):
    n = x.shape[1]
    acc = 2 * np.int64(r[h]) + 2 * np.int64(r[i])
    for j in range(n):
        acc += _g(x[i, j], z[i, j], x[h, j], z[h, j])
    r[h] = 1 if (acc % 4) == 2 else 0
    for j in range(n):
        x[h, j] ^= x[i, j]
        z[h, j] ^= z[i, j]


@njit(cache=True)
def apply_h(x, z, r, a):
    for i in range(x.shape[0] - 1):
        r[i] ^= x[i, a] & z[i, a]
        t = x[i, a]
        x[i, a] = z[i, a]
        z[i, a] = t


@njit(cache=True)
def apply_z(x, z, r, a):
    for i in range(x.shape[0] - 1):
        r[i] ^= x[i, a]


@njit(cache=True)
def apply_x(x, z, r, a):
    for i in range(x.shape[0] - 1):
        r[i] ^= z[i, a]


@njit(cache=True)
def apply_cnot(x, z, r, a, b):
    for i in range(x.shape[0] - 1):
        r[i] ^= x[i, a] & z[i, b] & (x[i, b] ^ z[i, a] ^ 1)
        x[i, b] ^= x[i, a]
        z[i, a] ^= z[i, b]


@njit(cache=True)
def apply_cz(x, z, r, a, b):
    # CZ = H_b CNOT(a, b) H_b
    apply_h(x, z, r, b)
    apply_cnot(x, z, r, a, b)
    apply_h(x, z, r, b)


@njit(cache=True)
def apply_swap(x, z, r, a, b):
    for i in range(x.shape[0] - 1):
        t = x[i, a]
        x[i, a] = x[i, b]
        x[i, b] = t
        t = z[i, a]
        z[i, a] = z[i, b]
        z[i, b] = t


@njit(cache=True)
def measure_x(x, z, r, a, coin):
    """Measure ``X_a``.

    ``coin`` (0 or 1) is used as the outcome bit when the result is random.
    Returns ``outcome_bit + 2 * deterministic``.
    """
    n = x.shape[1]
    p = -1
    for i in range(n, 2 * n):
        if z[i, a]:
            p = i
            break
    if p >= 0:
        for i in range(2 * n):
            if i != p and z[i, a]:
                rowsum(x, z, r, i, p)
        for j in range(n):
            x[p - n, j] = x[p, j]
            z[p - n, j] = z[p, j]
        r[p - n] = r[p]
        for j in range(n):
            x[p, j] = 0
            z[p, j] = 0
        x[p, a] = 1
        r[p] = coin
        return np.int64(coin)
    s = 2 * n
    for j in range(n):
        x[s, j] = 0
        z[s, j] = 0
    r[s] = 0
    for i in range(n):
        if z[i, a]:
            rowsum(x, z, r, s, i + n)
    return np.int64(r[s]) + 2


@njit(cache=True)
def peek_x(x, z, r, a):
    """Return the sign bit of ``X_a`` if it is deterministic, else -1.

    The tableau is left unchanged (only the scratch row is touched).
    """
    n = x.shape[1]
    for i in range(n, 2 * n):
        if z[i, a]:
            return -1
    s = 2 * n
    for j in range(n):
        x[s, j] = 0
        z[s, j] = 0
    r[s] = 0
    for i in range(n):
        if z[i, a]:
            rowsum(x, z, r, s, i + n)
    return r[s]


def empty(n):
    return (np.zeros((2 * n + 1, n), np.uint8),
            np.zeros((2 * n + 1, n), np.uint8),
            np.zeros(2 * n + 1, np.uint8))
