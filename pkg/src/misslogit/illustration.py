"""Two-feature example: X1 observed, X2 always missing, Y | X ~ sigmoid(X1 + X2).

With Gaussian X2 the Bayes curve E[sigmoid(x1 + X2)] is close to a logistic
curve in x1; with a centered exponential X2 it is visibly not.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

from .gaussian_core import GaussianParams, Pattern, sigmoid
from .oracle import Link, bayes_prob_mc, row_stream

S2_GAUSS = 3.83
LAMBDA_EXP = 7.63
X1_MEAN = 1.5
X1_VAR = 5.0


@dataclass
class Curve:
    bayes: np.ndarray
    se: np.ndarray
    fit: np.ndarray
    plugin: np.ndarray
    intercept: float
    slope: float

    @property
    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.fit - self.bayes)))


def best_logistic_fit(x1: np.ndarray, probs: np.ndarray) -> tuple[float, float]:
    """Least-squares fit of ``sigmoid(a + b x1)`` to a probability curve."""
    res = least_squares(lambda c: sigmoid(c[0] + c[1] * x1) - probs, x0=[0.0, 1.0], xtol=1e-12, ftol=1e-12)
    return float(res.x[0]), float(res.x[1])


def _curve(x1, bayes, se, plugin) -> Curve:
    a, b = best_logistic_fit(x1, bayes)
    return Curve(bayes, se, sigmoid(a + b * x1), plugin, a, b)


def gaussian_curve(x1: np.ndarray, s2: float = S2_GAUSS, k: int = 200_000, seed: int = 0) -> Curve:
    params = GaussianParams(np.array([X1_MEAN, 0.0]), np.diag([X1_VAR, s2]))
    pattern = Pattern((False, True))
    est = [bayes_prob_mc(np.array([v]), pattern, params, 0.0, np.ones(2), k, Link.LOGISTIC, rng=row_stream(seed, 0)) for v in x1]
    bayes = np.array([e.value for e in est])
    se = np.array([e.se for e in est])
    return _curve(x1, bayes, se, sigmoid(x1))


def exponential_curve(x1: np.ndarray, lam: float = LAMBDA_EXP, k: int = 200_000, seed: int = 0) -> Curve:
    """X2 = E - lam with E exponential of mean lam (so X2 has mean 0, variance lam**2)."""
    u = row_stream(seed, 1).random(k)
    x2 = -lam * np.log1p(-u) - lam
    vals = sigmoid(x1[:, None] + x2[None, :])
    bayes = vals.mean(axis=1)
    se = vals.std(axis=1, ddof=1) / np.sqrt(k)
    return _curve(x1, bayes, se, sigmoid(x1))


def illustrate_2d(x1: np.ndarray | None = None, k: int = 200_000, seed: int = 0) -> tuple[np.ndarray, Curve, Curve]:
    x1 = np.linspace(-8.0, 8.0, 161) if x1 is None else np.asarray(x1, dtype=float)
    return x1, gaussian_curve(x1, k=k, seed=seed), exponential_curve(x1, k=min(k, 50_000), seed=seed)


def write_illustration_csv(path: str | Path, x1: np.ndarray, gauss: Curve, expo: Curve) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["x1", "bayes_gauss", "se_gauss", "logistic_fit_gauss", "plugin_gauss",
             "bayes_exp", "se_exp", "logistic_fit_exp", "plugin_exp"]
        )
        for i, v in enumerate(x1):
            w.writerow([repr(float(v))] + [repr(float(c[i])) for c in (
                gauss.bayes, gauss.se, gauss.fit, gauss.plugin, expo.bayes, expo.se, expo.fit, expo.plugin)])
