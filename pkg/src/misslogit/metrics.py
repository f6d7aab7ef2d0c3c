"""Evaluation metrics: excess misclassification, distance to Bayes probabilities,
PAV-based miscalibration, and coefficient error."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import isotonic_regression

from .datagen import group_by_pattern

NOT_APPLICABLE = math.nan


def _vectors(*arrays) -> list[np.ndarray]:
    out = [np.asarray(a, dtype=float).reshape(-1) for a in arrays]
    if len({a.shape[0] for a in out}) != 1:
        raise ValueError(f"length mismatch: {[a.shape[0] for a in out]}")
    return out


def classify(probs: np.ndarray) -> np.ndarray:
    """Threshold at 0.5; a tie goes to class 1."""
    return (np.asarray(probs) >= 0.5).astype(np.int8)


def excess_misclassification(pred_probs, bayes_probs, y) -> float:
    p, b, y = _vectors(pred_probs, bayes_probs, y)
    return float(np.mean(classify(p) != y) - np.mean(classify(b) != y))


def mae_bayes(pred_probs, bayes_probs) -> float:
    p, b = _vectors(pred_probs, bayes_probs)
    return float(np.mean(np.abs(p - b)))


def brier(probs, y) -> float:
    p, y = _vectors(probs, y)
    return float(np.mean((p - y) ** 2))


def pav_recalibrate(probs, y) -> np.ndarray:
    """Isotonic least-squares fit of y on probs; tied probabilities share one value."""
    p, y = _vectors(probs, y)
    if p.shape[0] == 0:
        raise ValueError("cannot recalibrate an empty forecast")
    _, inverse, counts = np.unique(p, return_inverse=True, return_counts=True)
    block_means = np.bincount(inverse, weights=y) / counts
    fitted = isotonic_regression(block_means, weights=counts.astype(float), increasing=True).x
    out = fitted[inverse]
    # cheap guard: the fit must be non-decreasing along the sorted forecasts
    assert np.all(np.diff(fitted) >= -1e-12), "PAV output not monotone"
    return out


def mcb(probs, y) -> float:
    """Miscalibration: Brier score lost relative to the PAV-recalibrated forecast."""
    p, y = _vectors(probs, y)
    return brier(p, y) - brier(pav_recalibrate(p, y), y)


def mcb_delta(probs, bayes_probs, y) -> float:
    return mcb(probs, y) - mcb(bayes_probs, y)


def coef_mse(coefs, beta_star) -> float:
    """Mean squared error over the d feature coefficients; NaN when no coefficients exist."""
    if coefs is None:
        return NOT_APPLICABLE
    beta_star = np.asarray(beta_star, dtype=float)
    est = np.asarray(coefs, dtype=float)[: beta_star.shape[0]]
    if est.shape != beta_star.shape:
        raise ValueError(f"expected {beta_star.shape[0]} coefficients, got {est.shape[0]}")
    return float(np.mean((est - beta_star) ** 2))


@dataclass
class PatternScores:
    count: int
    mae_bayes: float
    excess_misclassification: float


@dataclass
class EvalReport:
    excess_misclassification: float
    mae_bayes: float
    mcb_delta: float
    coef_mse: float  # NaN when not applicable
    per_pattern: dict[str, PatternScores] = field(default_factory=dict)
    runtime_fit_seconds: float = 0.0
    runtime_predict_seconds: float = 0.0

    def aggregate_check(self) -> tuple[float, float]:
        """Frequency-weighted per-pattern values; equal the overall scores up to rounding."""
        n = sum(s.count for s in self.per_pattern.values())
        mae = sum(s.count * s.mae_bayes for s in self.per_pattern.values()) / n
        exc = sum(s.count * s.excess_misclassification for s in self.per_pattern.values()) / n
        return exc, mae


def evaluate(
    pred_probs,
    bayes_probs,
    y,
    mask: np.ndarray,
    coefs=None,
    beta_star=None,
    runtime_fit_seconds: float = 0.0,
    runtime_predict_seconds: float = 0.0,
) -> EvalReport:
    p, b, y = _vectors(pred_probs, bayes_probs, y)
    per_pattern = {
        pattern.key: PatternScores(
            count=len(rows),
            mae_bayes=mae_bayes(p[rows], b[rows]),
            excess_misclassification=excess_misclassification(p[rows], b[rows], y[rows]),
        )
        for pattern, rows in group_by_pattern(mask).items()
    }
    return EvalReport(
        excess_misclassification=excess_misclassification(p, b, y),
        mae_bayes=mae_bayes(p, b),
        mcb_delta=mcb_delta(p, b, y),
        coef_mse=NOT_APPLICABLE if coefs is None or beta_star is None else coef_mse(coefs, beta_star),
        per_pattern=per_pattern,
        runtime_fit_seconds=runtime_fit_seconds,
        runtime_predict_seconds=runtime_predict_seconds,
    )
