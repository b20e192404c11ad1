"""From-scratch regularized logistic models.

Two variants share the logistic loss: a ridge-penalized model fit by damped
Newton steps, and an elastic-net model fit by proximal gradient (FISTA).
Intercepts are never penalized.  Objectives:

- logreg:      sum_i ce_i + (l2 / 2) * ||w||^2
- elasticnet:  mean_i ce_i + alpha * (l1_ratio * ||w||_1
                                      + (1 - l1_ratio) / 2 * ||w||^2)

where ce_i is the cross entropy at row i.  The elastic-net penalty is
per-sample: it weights the mean loss, not the sum.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "sigmoid",
    "logreg_value",
    "logreg_value_grad",
    "fit_logreg",
    "elasticnet_value",
    "elasticnet_grad",
    "fit_elasticnet",
]


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _cross_entropy_sum(z: np.ndarray, y: np.ndarray) -> float:
    # ce_i = log(1 + exp(z_i)) - y_i * z_i, computed without overflow
    return float(np.sum(np.logaddexp(0.0, z) - y * z))


# -- ridge logistic regression ---------------------------------------------------


def logreg_value(params: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float) -> float:
    z = params[0] + X @ params[1:]
    return _cross_entropy_sum(z, y) + 0.5 * l2 * float(params[1:] @ params[1:])


def logreg_value_grad(
    params: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float
) -> tuple[float, np.ndarray]:
    w = params[1:]
    z = params[0] + X @ w
    value = _cross_entropy_sum(z, y) + 0.5 * l2 * float(w @ w)
    gz = sigmoid(z) - y
    grad = np.concatenate(([float(np.sum(gz))], X.T @ gz + l2 * w))
    return value, grad


def fit_logreg(
    X: np.ndarray,
    y: np.ndarray,
    l2: float = 1.0,
    tol: float = 1e-6,
    max_iter: int = 1000,
) -> tuple[np.ndarray, int, bool]:
    """Damped Newton on the penalized log-likelihood.

    Returns (params, iterations, converged) with params[0] the intercept.
    Convergence is an infinity-norm gradient test against tol.
    """
    n, p = X.shape
    params = np.zeros(p + 1)
    eye = np.eye(p)
    for it in range(1, max_iter + 1):
        value, grad = logreg_value_grad(params, X, y, l2)
        if float(np.max(np.abs(grad))) < tol:
            return params, it - 1, True
        z = params[0] + X @ params[1:]
        prob = sigmoid(z)
        s = np.maximum(prob * (1.0 - prob), 1e-12)
        sx = X * s[:, None]
        hess = np.empty((p + 1, p + 1))
        hess[0, 0] = float(np.sum(s))
        hess[0, 1:] = np.sum(sx, axis=0)
        hess[1:, 0] = hess[0, 1:]
        hess[1:, 1:] = X.T @ sx + l2 * eye
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.solve(hess + 1e-8 * np.eye(p + 1), grad)
        # Backtracking keeps the Newton step a descent step even when far
        # from the optimum (e.g. near-separable data).
        slope = float(grad @ step)
        t = 1.0
        for _ in range(60):
            trial = params - t * step
            if logreg_value(trial, X, y, l2) <= value - 1e-4 * t * slope:
                break
            t *= 0.5
        params = params - t * step
    return params, max_iter, False


# -- elastic-net logistic regression ----------------------------------------------


def elasticnet_value(
    params: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    alpha: float = 1e-4,
    l1_ratio: float = 0.5,
) -> float:
    n = X.shape[0]
    w = params[1:]
    z = params[0] + X @ w
    smooth = _cross_entropy_sum(z, y) / n + 0.5 * (1.0 - l1_ratio) * alpha * float(w @ w)
    return smooth + alpha * l1_ratio * float(np.sum(np.abs(w)))


def elasticnet_grad(
    params: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    alpha: float = 1e-4,
    l1_ratio: float = 0.5,
) -> np.ndarray:
    """Gradient of the full objective; valid where no coefficient is zero."""
    n = X.shape[0]
    w = params[1:]
    z = params[0] + X @ w
    gz = sigmoid(z) - y
    smooth = np.concatenate(
        ([float(np.sum(gz)) / n], X.T @ gz / n + (1.0 - l1_ratio) * alpha * w)
    )
    l1 = np.concatenate(([0.0], alpha * l1_ratio * np.sign(w)))
    return smooth + l1


def _smooth_grad(params, X, y, alpha, l1_ratio):
    n = X.shape[0]
    w = params[1:]
    z = params[0] + X @ w
    gz = sigmoid(z) - y
    return np.concatenate(
        ([float(np.sum(gz)) / n], X.T @ gz / n + (1.0 - l1_ratio) * alpha * w)
    )


def _spectral_norm_with_intercept(X: np.ndarray) -> float:
    # Largest singular value of [1 | X] by power iteration on a fixed start.
    n, p = X.shape
    v = np.ones(p + 1) / np.sqrt(p + 1)
    smax = 0.0
    for _ in range(100):
        u = v[0] + X @ v[1:]
        v_new = np.concatenate(([float(np.sum(u))], X.T @ u))
        norm = float(np.linalg.norm(v_new))
        if norm == 0.0:
            return 0.0
        v = v_new / norm
        smax = np.sqrt(norm)
    return smax


def fit_elasticnet(
    X: np.ndarray,
    y: np.ndarray,
    alpha: float = 1e-4,
    l1_ratio: float = 0.5,
    tol: float = 1e-6,
    max_iter: int = 10000,
) -> tuple[np.ndarray, int, bool]:
    """FISTA with soft-threshold prox for the L1 part (intercept excluded)."""
    n, p = X.shape
    smax = _spectral_norm_with_intercept(X)
    lipschitz = smax * smax / (4.0 * n) + (1.0 - l1_ratio) * alpha
    step = 1.0 / max(lipschitz, 1e-12)
    shrink = step * alpha * l1_ratio

    x_cur = np.zeros(p + 1)
    y_cur = x_cur.copy()
    t_cur = 1.0
    for it in range(1, max_iter + 1):
        grad = _smooth_grad(y_cur, X, y, alpha, l1_ratio)
        x_new = y_cur - step * grad
        w = x_new[1:]
        x_new[1:] = np.sign(w) * np.maximum(np.abs(w) - shrink, 0.0)
        if float(np.max(np.abs(x_new - x_cur))) < tol:
            return x_new, it, True
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_cur * t_cur))
        y_cur = x_new + ((t_cur - 1.0) / t_new) * (x_new - x_cur)
        x_cur = x_new
        t_cur = t_new
    return x_cur, max_iter, False
