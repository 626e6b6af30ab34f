"""Independent reference implementations used only by the tests.

Each oracle is written from the defining formula, not from the package code
path it checks.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def contract_bruteforce(dense: np.ndarray, z) -> np.ndarray:
    """``(A z^{m-1})_i = sum over i2..im of A[i, i2, ..., im] z_i2 ... z_im``."""
    z = np.asarray(z, dtype=float)
    m, n = dense.ndim, dense.shape[0]
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for rest in itertools.product(range(n), repeat=m - 1):
            acc += dense[(i,) + rest] * math.prod(z[j] for j in rest)
        out[i] = acc
    return out


def two_value_dense(order: int, dim: int, diag: float, offdiag: float) -> np.ndarray:
    arr = np.full((dim,) * order, float(offdiag))
    for i in range(dim):
        arr[(i,) * order] = diag
    return arr


def field_from_dense(dense: np.ndarray, w, z) -> np.ndarray:
    """``z_i (1 + w_i + (A z^{t-1})_i)`` with the dense model tensor."""
    z = np.asarray(z, dtype=float)
    return z * (1.0 + np.asarray(w, dtype=float) + contract_bruteforce(dense, z))


def fd_jacobian(f, z, step: float = 1e-6) -> np.ndarray:
    """Plain central differences, independent of the package helper."""
    z = np.asarray(z, dtype=float)
    n = z.size
    J = np.zeros((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = step
        J[:, j] = (f(z + e) - f(z - e)) / (2 * step)
    return J


def tau_grid(b, a: float, s: float, p: int, points: int = 10**5):
    """Sign scan of ``F(tau) = H(tau) - tau`` on a uniform grid in ``(0, b_min)``.

    Returns ``(exists, approx_root)``; the root is the first grid point where
    ``F`` turns nonpositive.
    """
    b = np.asarray(b, dtype=float)
    grid = np.linspace(0.0, b.min(), points + 1)[1:]
    F = np.empty_like(grid)
    chunk = 20000
    for lo in range(0, grid.size, chunk):
        g = grid[lo:lo + chunk]
        F[lo:lo + chunk] = a / s * (np.clip(b[None, :] - g[:, None], 0, None) ** (1.0 / p)).sum(1) ** p - g
    idx = np.flatnonzero(F <= 0)
    if idx.size == 0:
        return False, None
    return True, float(grid[idx[0]])


def newton_restricted(b, k: float, p: int, x0, iters: int = 200) -> np.ndarray:
    """Newton on ``k (sum x)^p + (1 - k) x^p = b`` (winner block only)."""
    x = np.asarray(x0, dtype=float).copy()
    b = np.asarray(b, dtype=float)
    for _ in range(iters):
        S = x.sum()
        g = k * S ** p + (1 - k) * x ** p - b
        J = k * p * S ** (p - 1) * np.ones((x.size, x.size)) + np.diag((1 - k) * p * x ** (p - 1))
        dx = np.linalg.solve(J, g)
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    return x


W0 = (1.9557, 2.8322, 3.8317, 2.2795, 1.3796, 7.1796, 8.0, 2.4356, 3.8469, 1.7953)
Z0 = (0.1234, 0.1678, 0.1101, 0.1345, 0.1789, 0.6256, 0.1890, 0.1567, 0.1910, 0.1346)


def pairwise_rk4(w, k: float, z0, h: float = 1e-3, t_max: float = 2000.0, tol: float = 1e-10):
    """Classical competitive LV ``z_i (1 + w_i - z_i - k sum_{j != i} z_j)`` by plain RK4."""
    w = np.asarray(w, dtype=float)
    z = np.asarray(z0, dtype=float).copy()

    def f(y):
        return y * (1.0 + w - y - k * (y.sum() - y))

    t = 0.0
    while t < t_max:
        k1 = f(z)
        if np.max(np.abs(k1)) < tol:
            break
        k2 = f(z + 0.5 * h * k1)
        k3 = f(z + 0.5 * h * k2)
        k4 = f(z + h * k3)
        z = z + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return z


def contract_dense_numpy(dense: np.ndarray, z) -> np.ndarray:
    """Same sum as :func:`contract_bruteforce`, vectorized by repeated tensordot."""
    out = np.asarray(dense, dtype=float)
    z = np.asarray(z, dtype=float)
    while out.ndim > 1:
        out = np.tensordot(out, z, axes=([out.ndim - 1], [0]))
    return out
