"""Closed-form ridge regression and damped-Newton logistic regression.

Both models carry an unpenalized intercept, so predictions are
equivariant to shifting the target (ridge) and the fits are exact on
data the model class can represent.
"""

import numpy as np
from scipy.special import expit

from ..exceptions import DataError

GRAD_TOL = 1e-8
MAX_HALVINGS = 30


def _with_intercept(x: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(x.shape[0]), x])


def fit_ridge(x: np.ndarray, y: np.ndarray, ridge_lambda: float) -> np.ndarray:
    """Solve the penalized normal equations; the intercept is unpenalized.

    Returns the coefficient vector ``[intercept, slopes...]``. A singular
    system (possible only at ``ridge_lambda=0``) falls back to the
    minimum-norm least-squares solution.
    """
    d = _with_intercept(x)
    gram = d.T @ d
    pen = np.full(d.shape[1], ridge_lambda)
    pen[0] = 0.0
    gram = gram + np.diag(pen)
    rhs = d.T @ y
    try:
        return np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(d, y, rcond=None)[0]


def predict_ridge(beta: np.ndarray, x: np.ndarray) -> np.ndarray:
    return _with_intercept(x) @ beta


def ridge_objective(beta: np.ndarray, x, y, ridge_lambda: float) -> float:
    """Penalized residual sum of squares; used by optimality checks."""
    r = y - predict_ridge(beta, x)
    return float(r @ r + ridge_lambda * (beta[1:] @ beta[1:]))


def logistic_nll(w: np.ndarray, d: np.ndarray, y: np.ndarray, l2: float) -> float:
    """Penalized negative log-likelihood, computed without overflow."""
    z = d @ w
    nll = float(np.sum(np.logaddexp(0.0, z) - y * z))
    return nll + 0.5 * l2 * float(w[1:] @ w[1:])


def logistic_gradient(w: np.ndarray, d: np.ndarray, y: np.ndarray, l2: float) -> np.ndarray:
    p = expit(d @ w)
    g = d.T @ (p - y)
    g[1:] += l2 * w[1:]
    return g


def fit_logistic(x: np.ndarray, y: np.ndarray, l2: float, max_iter: int) -> np.ndarray:
    """Maximize the L2-penalized log-likelihood by damped Newton steps.

    Iterates until the gradient norm drops to ``GRAD_TOL`` or ``max_iter``
    steps; each step is halved (up to ``MAX_HALVINGS`` times) while it
    fails to decrease the penalized objective. Complete separation is not
    an error: with a positive penalty the optimum stays finite, and
    without one the damped iteration simply stops improving.
    """
    if not np.isin(y, (0.0, 1.0)).all():
        raise DataError("logistic targets must take values in {0, 1}")
    d = _with_intercept(x)
    w = np.zeros(d.shape[1])
    obj = logistic_nll(w, d, y, l2)
    for _ in range(max_iter):
        p = expit(d @ w)
        g = logistic_gradient(w, d, y, l2)
        if np.linalg.norm(g) <= GRAD_TOL:
            break
        weights = p * (1.0 - p)
        hess = (d * weights[:, None]).T @ d
        idx = np.arange(1, d.shape[1])
        hess[idx, idx] += l2
        try:
            step = np.linalg.solve(hess, g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, g, rcond=None)[0]
        alpha = 1.0
        improved = False
        for _ in range(MAX_HALVINGS + 1):
            candidate = w - alpha * step
            cand_obj = logistic_nll(candidate, d, y, l2)
            if cand_obj < obj:
                w, obj = candidate, cand_obj
                improved = True
                break
            alpha *= 0.5
        if not improved:
            break
    return w


def predict_logistic(w: np.ndarray, x: np.ndarray) -> np.ndarray:
    return expit(_with_intercept(x) @ w)
