"""Complete case, constant/mean imputation, and pattern-by-pattern predictors."""

from __future__ import annotations

import logging

import numpy as np

from ..datagen import group_by_pattern
from ..errors import DegenerateFitError, UnsupportedPredictionError
from ..logistic_fit import LogisticModel, fit_logistic
from .base import CoefReport, FittedPredictor, check_inputs, design, fill, observed_means
from .spec import Fallback, Family, MethodSpec

log = logging.getLogger(__name__)


class CompleteCasePredictor(FittedPredictor):
    def __init__(self, spec: MethodSpec, model: LogisticModel):
        self.spec, self.model, self.d = spec, model, model.p
        self.coef_report = CoefReport.from_model(model, self.d)

    def _predict(self, z, mask):
        if mask.any():
            bad = int(np.any(mask, axis=1).sum())
            raise UnsupportedPredictionError(f"complete case cannot predict {bad} incomplete rows")
        return self.model.predict_proba(z)


def fit_complete_case(z: np.ndarray, mask: np.ndarray, y: np.ndarray, spec: MethodSpec | None = None) -> CompleteCasePredictor:
    z, mask = check_inputs(z, mask)
    d = z.shape[1]
    keep = ~mask.any(axis=1)
    if keep.sum() < d + 2:
        raise DegenerateFitError(f"only {int(keep.sum())} complete rows for {d} features")
    return CompleteCasePredictor(spec or MethodSpec(Family.CC), fit_logistic(z[keep], y[keep]))


class ImputePredictor(FittedPredictor):
    """Fill every missing cell of column j with a frozen value, then one logistic model."""

    def __init__(self, spec: MethodSpec, values: np.ndarray, model: LogisticModel):
        self.spec, self.values, self.model = spec, values, model
        self.d = values.shape[0]
        self.coef_report = CoefReport.from_model(model, self.d)

    def _predict(self, z, mask):
        return self.model.predict_proba(design(fill(z, mask, self.values), mask, self.spec.use_mask_feature))


def fit_constant_impute(
    z: np.ndarray,
    mask: np.ndarray,
    y: np.ndarray,
    c: float | None = 0.5,
    use_mask_feature: bool = False,
    spec: MethodSpec | None = None,
) -> ImputePredictor:
    """Constant imputation; ``c=None`` means per-column training means (Mean.IMP)."""
    z, mask = check_inputs(z, mask)
    if spec is None:
        if c is None:
            spec = MethodSpec(Family.MEAN_IMP, use_mask_feature=use_mask_feature)
        else:
            spec = MethodSpec(Family.CONST_IMP, const_value=c, use_mask_feature=use_mask_feature)
    if spec.family is Family.MEAN_IMP:
        values = observed_means(z, mask)
    else:
        values = np.full(z.shape[1], float(spec.const_value))
    model = fit_logistic(design(fill(z, mask, values), mask, spec.use_mask_feature), y)
    return ImputePredictor(spec, values, model)


class PatternPredictor(FittedPredictor):
    """One logistic model per training pattern on that pattern's observed columns."""

    coef_report = None

    def __init__(self, spec: MethodSpec, d: int, models: dict, fallback: ImputePredictor | None):
        self.spec, self.d, self.models, self.fallback = spec, d, models, fallback

    def _predict(self, z, mask):
        out = np.empty(z.shape[0])
        for pattern, rows in group_by_pattern(mask).items():
            model = self.models.get(pattern.key)
            if model is not None:
                out[rows] = model.predict_proba(z[np.ix_(rows, list(pattern.obs))])
            elif self.fallback is not None:
                out[rows] = self.fallback.predict(z[rows], mask[rows])
            else:
                raise UnsupportedPredictionError(f"no model for pattern {pattern.key} ({len(rows)} rows)")
        return out

    @property
    def diagnostics(self) -> dict:
        return {"patterns_fitted": sorted(self.models)}


def fit_pbp(
    z: np.ndarray,
    mask: np.ndarray,
    y: np.ndarray,
    fallback: Fallback | str = Fallback.MEAN_IMPUTE_GLOBAL,
    spec: MethodSpec | None = None,
) -> PatternPredictor:
    z, mask = check_inputs(z, mask)
    y = np.asarray(y, dtype=float)
    spec = spec or MethodSpec(Family.PBP, pbp_fallback=fallback)
    models: dict[str, LogisticModel] = {}
    for pattern, rows in group_by_pattern(mask).items():
        obs = list(pattern.obs)
        if not obs or len(rows) < len(obs) + 2:
            continue
        try:
            models[pattern.key] = fit_logistic(z[np.ix_(rows, obs)], y[rows])
        except DegenerateFitError as exc:
            log.info("pattern %s routed to fallback: %s", pattern.key, exc)
    backstop = None
    if spec.pbp_fallback is Fallback.MEAN_IMPUTE_GLOBAL:
        backstop = fit_constant_impute(z, mask, y, spec=MethodSpec(Family.MEAN_IMP))
    return PatternPredictor(spec, z.shape[1], models, backstop)
