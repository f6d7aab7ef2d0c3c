"""Shared pieces of the fitted predictors: coefficient reports and design helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateFitError
from ..logistic_fit import LogisticModel
from .spec import MethodSpec


@dataclass(frozen=True, eq=False)
class CoefReport:
    """Intercept and feature coefficients; ``mask_coefs`` when the mask is in the design."""

    intercept: float
    coefs: np.ndarray
    mask_coefs: np.ndarray | None = None

    @classmethod
    def from_model(cls, model: LogisticModel, d: int) -> "CoefReport":
        extra = model.coefs[d:] if model.p > d else None
        return cls(model.intercept, model.coefs[:d].copy(), None if extra is None else extra.copy())

    def to_dict(self) -> dict:
        return {
            "intercept": self.intercept,
            "coefs": self.coefs.tolist(),
            "mask_coefs": None if self.mask_coefs is None else self.mask_coefs.tolist(),
        }


def rubin_pool(values) -> np.ndarray:
    """Point-estimate pooling across imputations: the plain average.

    Averages deviations from the first estimate, so pooling identical
    estimates returns that estimate bit for bit (a sum-then-divide mean
    can be off by an ulp).
    """
    stack = np.asarray(values, dtype=float)
    if stack.shape[0] == 0:
        raise ValueError("rubin_pool needs at least one estimate")
    anchor = stack[0]
    return anchor + (stack - anchor).mean(axis=0)


def check_inputs(z: np.ndarray, mask: np.ndarray, d: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    z = np.asarray(z, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if z.ndim != 2 or mask.shape != z.shape:
        raise ValueError(f"z and mask must be matching 2-D arrays, got {z.shape} and {mask.shape}")
    if d is not None and z.shape[1] != d:
        raise ValueError(f"predictor was fitted with {d} features, got {z.shape[1]}")
    if not np.all(np.isfinite(z[~mask])):
        raise ValueError("observed cells must be finite")
    return z, mask


def fill(z: np.ndarray, mask: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Replace masked cells of each column with ``values[j]``."""
    out = z.copy()
    rows, cols = np.nonzero(mask)
    out[rows, cols] = values[cols]
    return out


def design(completed: np.ndarray, mask: np.ndarray, use_mask: bool) -> np.ndarray:
    if use_mask:
        return np.hstack([completed, mask.astype(float)])
    return completed


def observed_means(z: np.ndarray, mask: np.ndarray) -> np.ndarray:
    counts = (~mask).sum(axis=0)
    if np.any(counts == 0):
        empty = np.flatnonzero(counts == 0).tolist()
        raise DegenerateFitError(f"columns {empty} have no observed values")
    return np.where(mask, 0.0, z).sum(axis=0) / counts


class FittedPredictor:
    """Common interface: ``predict(z, mask)`` returns probabilities in (0, 1)."""

    spec: MethodSpec
    coef_report: CoefReport | None
    d: int

    def predict(self, z: np.ndarray, mask: np.ndarray) -> np.ndarray:
        z, mask = check_inputs(z, mask, self.d)
        if z.shape[0] == 0:
            return np.zeros(0)
        return self._predict(z, mask)

    def _predict(self, z: np.ndarray, mask: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def diagnostics(self) -> dict:
        return {}
