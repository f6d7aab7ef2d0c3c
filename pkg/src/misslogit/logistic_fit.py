"""Ridge-stabilized logistic regression by iteratively reweighted least squares."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import DegenerateFitError
from .gaussian_core import sigmoid

log = logging.getLogger(__name__)

DEFAULT_RIDGE = 1e-8
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 100
SEPARATION_NORM = 1e3
PROB_CLIP = 1e-12
# every fitted probability this close to its label means the classes are separated
SEPARATION_RESIDUAL = 1e-6


@dataclass(frozen=True, eq=False)
class LogisticModel:
    intercept: float
    coefs: np.ndarray
    converged: bool = True
    iterations: int = 0
    separation_flag: bool = False

    @property
    def p(self) -> int:
        return self.coefs.shape[0]

    @property
    def params(self) -> np.ndarray:
        """Intercept followed by the coefficients."""
        return np.concatenate([[self.intercept], self.coefs])

    def decision(self, design: np.ndarray) -> np.ndarray:
        design = np.asarray(design, dtype=float)
        if design.ndim != 2 or design.shape[1] != self.p:
            raise ValueError(f"design must have {self.p} columns, got shape {design.shape}")
        return self.intercept + design @ self.coefs

    def predict_proba(self, design: np.ndarray) -> np.ndarray:
        return np.clip(sigmoid(self.decision(design)), PROB_CLIP, 1.0 - PROB_CLIP)


def predict_proba(model: LogisticModel, design: np.ndarray) -> np.ndarray:
    return model.predict_proba(design)


def penalized_loglik(params: np.ndarray, design1: np.ndarray, y: np.ndarray, ridge: float) -> float:
    """Log-likelihood minus ``ridge/2 * ||beta||^2`` (intercept unpenalized)."""
    eta = design1 @ params
    ll = np.sum(y * eta - np.logaddexp(0.0, eta))
    return float(ll - 0.5 * ridge * np.sum(params[1:] ** 2))


def _canonical_order(design: np.ndarray, y: np.ndarray) -> np.ndarray:
    keys = np.column_stack([design, y]).T[::-1]
    return np.lexsort(keys)


def irls_step(params: np.ndarray, design1: np.ndarray, y: np.ndarray, ridge: float) -> np.ndarray:
    """One undamped Newton step for the penalized log-likelihood."""
    p = sigmoid(design1 @ params)
    w = p * (1.0 - p)
    pen = np.full(params.shape[0], ridge)
    pen[0] = 0.0
    grad = design1.T @ (y - p) - pen * params
    hess = (design1.T * w) @ design1 + np.diag(pen)
    return params + _solve_psd(hess, grad)


def _solve_psd(hess: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return linalg.solve(hess, rhs, assume_a="pos")
    except (linalg.LinAlgError, ValueError):
        return np.linalg.lstsq(hess, rhs, rcond=None)[0]


def fit_logistic(
    design: np.ndarray,
    y: np.ndarray,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    ridge: float = DEFAULT_RIDGE,
) -> LogisticModel:
    """Fit ``P(y=1|x) = sigmoid(b0 + x.b)`` with an always-included intercept.

    Newton/IRLS with step halving. Convergence: ``max|score|/n < tol``.
    If the coefficient norm would exceed 1e3, or the fit reproduces every label
    to within 1e-6, the data are treated as separated: the last bounded
    iterate is kept and ``separation_flag`` is set.
    """
    design = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if design.ndim == 1:
        design = design[:, None]
    n, p = design.shape
    if n == 0:
        raise DegenerateFitError("no rows to fit")
    if y.shape[0] != n:
        raise ValueError("design and y have different numbers of rows")
    if not np.all(np.isfinite(design)):
        raise ValueError("design contains non-finite values")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    if np.all(y == y[0]):
        raise DegenerateFitError(f"all {n} labels equal {int(y[0])}: no interior maximum")

    order = _canonical_order(design, y)
    x1 = np.column_stack([np.ones(n), design[order]])
    y = y[order]
    pen = np.full(p + 1, ridge)
    pen[0] = 0.0

    params = np.zeros(p + 1)
    params[0] = np.log(y.mean() / (1.0 - y.mean()))
    current = penalized_loglik(params, x1, y, ridge)
    converged = separated = False
    it = 0
    for it in range(1, max_iter + 1):
        prob = sigmoid(x1 @ params)
        grad = x1.T @ (y - prob) - pen * params
        if np.max(np.abs(grad)) / n < tol:
            converged = True
            it -= 1
            break
        w = prob * (1.0 - prob)
        hess = (x1.T * w) @ x1 + np.diag(pen)
        step = _solve_psd(hess, grad)
        t = 1.0
        for _ in range(40):
            cand = params + t * step
            val = penalized_loglik(cand, x1, y, ridge)
            if val >= current - 1e-12 * abs(current):
                break
            t *= 0.5
        if np.linalg.norm(cand[1:]) > SEPARATION_NORM:
            separated = True
            break
        params, current = cand, val

    prob = sigmoid(x1 @ params)
    if not separated and np.max(np.abs(y - prob)) < SEPARATION_RESIDUAL:
        separated = True
    if separated:
        log.debug("separation detected after %d iterations", it)
    return LogisticModel(
        intercept=float(params[0]),
        coefs=params[1:].copy(),
        converged=converged and not separated,
        iterations=it,
        separation_flag=separated,
    )
