"""Central finite-difference derivatives used as test oracles and fallbacks."""

from __future__ import annotations

import numpy as np


def _steps(x: np.ndarray, h, scale: float) -> np.ndarray:
    if h is not None:
        if h <= 0:
            raise ValueError(f"finite-difference step must be positive, got {h}")
        return np.full(x.shape, float(h))
    return scale * np.maximum(1.0, np.abs(x))


def finite_diff_gradient(f, x, h=None) -> np.ndarray:
    """Central-difference gradient of a scalar function.

    ``h`` may be a fixed step; by default each coordinate uses
    ``1e-5 * max(1, |x_i|)``.  Error is O(h^2) for thrice-differentiable f.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    hs = _steps(x, h, 1e-5)
    grad = np.empty(x.shape)
    for i in range(x.size):
        e = np.zeros(x.shape)
        e[i] = hs[i]
        grad[i] = (f(x + e) - f(x - e)) / (2.0 * hs[i])
    return grad


def finite_diff_hessian(f, x, h=None) -> np.ndarray:
    """Symmetric central-difference Hessian, default step ``1e-4 * max(1, |x_i|)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = x.size
    hs = _steps(x, h, 1e-4)
    hess = np.empty((n, n))
    f0 = f(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = hs[i]
        hess[i, i] = (f(x + ei) - 2.0 * f0 + f(x - ei)) / hs[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = hs[j]
            hess[i, j] = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            ) / (4.0 * hs[i] * hs[j])
            hess[j, i] = hess[i, j]
    return hess


def finite_diff_jacobian(f, x, h=None) -> np.ndarray:
    """Central-difference Jacobian of a vector-valued function."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    hs = _steps(x, h, 1e-6)
    f0 = np.atleast_1d(np.asarray(f(x), dtype=float))
    jac = np.empty((f0.size, x.size))
    for j in range(x.size):
        e = np.zeros(x.shape)
        e[j] = hs[j]
        jac[:, j] = (np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2.0 * hs[j])
    return jac
