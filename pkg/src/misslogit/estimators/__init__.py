"""Missing-data prediction procedures and their common ``fit``/``predict`` entry points."""

from __future__ import annotations

import numpy as np

from .base import CoefReport, FittedPredictor, rubin_pool
from .mice import MicePredictor, fit_mice
from .saem import SaemPredictor, fit_saem, run_saem
from .simple import (
    CompleteCasePredictor,
    ImputePredictor,
    PatternPredictor,
    fit_complete_case,
    fit_constant_impute,
    fit_pbp,
)
from .spec import Fallback, Family, MethodSpec, method_from_config, parse_method


def fit(spec: MethodSpec | str, z: np.ndarray, mask: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> FittedPredictor:
    """Fit the method described by ``spec`` on observed data only."""
    if isinstance(spec, str):
        spec = parse_method(spec)
    if spec.family is Family.CC:
        return fit_complete_case(z, mask, y, spec)
    if spec.family in (Family.CONST_IMP, Family.MEAN_IMP):
        return fit_constant_impute(z, mask, y, spec=spec)
    if spec.family is Family.PBP:
        return fit_pbp(z, mask, y, spec=spec)
    if spec.family is Family.MICE:
        return fit_mice(z, mask, y, spec, rng)
    return fit_saem(z, mask, y, spec, rng)


def predict(pred: FittedPredictor, z_test: np.ndarray, mask_test: np.ndarray) -> np.ndarray:
    return pred.predict(z_test, mask_test)


__all__ = [
    "CoefReport",
    "CompleteCasePredictor",
    "Fallback",
    "Family",
    "FittedPredictor",
    "ImputePredictor",
    "MethodSpec",
    "MicePredictor",
    "PatternPredictor",
    "SaemPredictor",
    "fit",
    "fit_complete_case",
    "fit_constant_impute",
    "fit_mice",
    "fit_pbp",
    "fit_saem",
    "method_from_config",
    "parse_method",
    "predict",
    "rubin_pool",
    "run_saem",
]
