"""Chained-equations multiple imputation with predictive mean matching.

Each imputed dataset starts from column means and cycles through the columns
in index order. A column's missing cells are refreshed by a Bayesian linear
regression draw on the other columns (optionally Y and the mask), followed by
matching against the donors' predicted values. A logistic model is fitted on
every completed dataset and the K fits are averaged.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ..errors import ImputationError
from ..logistic_fit import LogisticModel, fit_logistic
from .base import CoefReport, FittedPredictor, check_inputs, design, fill, observed_means, rubin_pool
from .spec import Family, MethodSpec

log = logging.getLogger(__name__)

# relative ridge on X'X, as in the usual normal-draw imputation routine
REGRESSION_RIDGE = 1e-5


def _predictors(x: np.ndarray, j: int, y: np.ndarray | None, mask: np.ndarray | None) -> np.ndarray:
    """Columns [1, x_{-j}, y?, mask_{-j}?] for the model of column j."""
    parts = [np.ones((x.shape[0], 1)), np.delete(x, j, axis=1)]
    if y is not None:
        parts.append(y[:, None])
    if mask is not None:
        parts.append(np.delete(mask, j, axis=1).astype(float))
    return np.hstack(parts)


@dataclass
class _Regression:
    coef: np.ndarray  # full length; zero for predictors dropped as constant
    upper: np.ndarray  # Cholesky factor of the penalized cross-product of kept columns
    sse: float
    df: int
    keep: np.ndarray


def _regress(p: np.ndarray, target: np.ndarray) -> _Regression:
    keep = np.ptp(p, axis=0) > 0
    keep[0] = True
    pk = p[:, keep]
    xtx = pk.T @ pk
    xtx += np.diag(REGRESSION_RIDGE * np.diag(xtx))
    upper = linalg.cholesky(xtx, lower=False)
    coef = np.zeros(p.shape[1])
    coef[keep] = linalg.cho_solve((upper, False), pk.T @ target)
    resid = target - p @ coef
    return _Regression(coef, upper, float(resid @ resid), max(pk.shape[0] - pk.shape[1], 1), keep)


def _draw_coef(reg: _Regression, rng: np.random.Generator) -> np.ndarray:
    """Posterior draw of the coefficients under a flat prior with a drawn residual scale."""
    sigma = np.sqrt(reg.sse / rng.chisquare(reg.df))
    noise = linalg.solve_triangular(reg.upper, rng.standard_normal(reg.upper.shape[0]), lower=False)
    out = reg.coef.copy()
    out[reg.keep] += sigma * noise
    return out


def _match(donor_pred: np.ndarray, donor_vals: np.ndarray, target_pred: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """For each target, one of the k donors with the closest predicted value, chosen uniformly.

    ``donor_pred`` must be sorted ascending and ``donor_vals`` aligned with it.
    """
    n_d = donor_pred.shape[0]
    width = min(2 * k, n_d)
    pos = np.searchsorted(donor_pred, target_pred)
    start = np.clip(pos - k, 0, n_d - width)
    window = start[:, None] + np.arange(width)
    dist = np.abs(donor_pred[window] - target_pred[:, None])
    nearest = np.argsort(dist, axis=1, kind="stable")[:, :k]
    pick = nearest[np.arange(len(target_pred)), rng.integers(0, k, len(target_pred))]
    return donor_vals[window[np.arange(len(target_pred)), pick]]


def _impute_column(pred_obs, vals_obs, pred_mis, k, rng, column):
    if pred_obs.shape[0] < k:
        log.info("column %d has %d donors (< %d); using regression predictions", column, pred_obs.shape[0], k)
        return pred_mis
    order = np.argsort(pred_obs, kind="stable")
    return _match(pred_obs[order], vals_obs[order], pred_mis, k, rng)


@dataclass(frozen=True, eq=False)
class ColumnModel:
    """Test-time imputation model for one column: no response term."""

    column: int
    coef: np.ndarray
    donor_pred: np.ndarray  # sorted
    donor_vals: np.ndarray


@dataclass(frozen=True, eq=False)
class ImputationChain:
    """One imputed training set's logistic model and its frozen column models."""

    model: LogisticModel
    columns: tuple[ColumnModel, ...]


def _final_column_model(x, mask, y, j, spec) -> ColumnModel:
    rows = ~mask[:, j]
    m = mask if spec.use_mask_in_imputation else None
    target = x[rows, j]
    p_test = _predictors(x, j, None, m)[rows]
    if spec.use_y_in_imputation:
        coef = np.delete(_regress(_predictors(x, j, y, m)[rows], target).coef, x.shape[1])
        # the response is unknown at test time: drop its term and refit the intercept
        coef[0] += np.mean(target - p_test @ coef)
    else:
        coef = _regress(p_test, target).coef
    pred = p_test @ coef
    order = np.argsort(pred, kind="stable")
    return ColumnModel(j, coef, pred[order], target[order])


def _run_chain(z, mask, y, means, spec, rng) -> ImputationChain:
    x = fill(z, mask, means)
    d = x.shape[1]
    y_pred = y if spec.use_y_in_imputation else None
    m_pred = mask if spec.use_mask_in_imputation else None
    targets = [j for j in range(d) if mask[:, j].any()]
    for _ in range(spec.chain_cycles):
        for j in targets:
            p = _predictors(x, j, y_pred, m_pred)
            rows = ~mask[:, j]
            reg = _regress(p[rows], x[rows, j])
            drawn = _draw_coef(reg, rng)
            x[~rows, j] = _impute_column(p[rows] @ reg.coef, x[rows, j], p[~rows] @ drawn, spec.pmm_donors, rng, j)
    model = fit_logistic(design(x, mask, spec.use_mask_feature), y)
    columns = tuple(_final_column_model(x, mask, y, j, spec) for j in range(d))
    return ImputationChain(model, columns)


class MicePredictor(FittedPredictor):
    def __init__(self, spec: MethodSpec, means: np.ndarray, chains: tuple[ImputationChain, ...], seed: int):
        self.spec, self.means, self.chains, self.seed = spec, means, chains, seed
        self.d = means.shape[0]
        pooled = rubin_pool([c.model.params for c in chains])
        self.coef_report = CoefReport.from_model(LogisticModel(float(pooled[0]), pooled[1:]), self.d)

    def impute(self, z: np.ndarray, mask: np.ndarray, k: int) -> np.ndarray:
        """Complete test rows by chaining against imputation ``k``'s column models."""
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, k, 1]))
        x = fill(z, mask, self.means)
        m_pred = mask if self.spec.use_mask_in_imputation else None
        targets = [j for j in range(self.d) if mask[:, j].any()]
        for _ in range(self.spec.chain_cycles if targets else 0):
            for j in targets:
                col = self.chains[k].columns[j]
                miss = mask[:, j]
                pred = _predictors(x[miss], j, None, None if m_pred is None else m_pred[miss]) @ col.coef
                if len(col.donor_pred) >= self.spec.pmm_donors:
                    x[miss, j] = _match(col.donor_pred, col.donor_vals, pred, self.spec.pmm_donors, rng)
                else:
                    x[miss, j] = pred
        return x

    def per_imputation(self, z: np.ndarray, mask: np.ndarray) -> np.ndarray:
        """(K, n) matrix of per-imputation probabilities."""
        z, mask = check_inputs(z, mask, self.d)
        out = np.empty((len(self.chains), z.shape[0]))
        for k, chain in enumerate(self.chains):
            out[k] = chain.model.predict_proba(design(self.impute(z, mask, k), mask, self.spec.use_mask_feature))
        return out

    def _predict(self, z, mask):
        return rubin_pool(self.per_imputation(z, mask))


def fit_mice(z: np.ndarray, mask: np.ndarray, y: np.ndarray, spec: MethodSpec, rng: np.random.Generator) -> MicePredictor:
    z, mask = check_inputs(z, mask)
    y = np.asarray(y, dtype=float)
    if spec.family is not Family.MICE:
        raise ValueError(f"fit_mice needs a MICE spec, got {spec.family.value}")
    empty = np.flatnonzero(mask.all(axis=0))
    if empty.size:
        raise ImputationError(f"columns {empty.tolist()} are entirely missing")
    means = observed_means(z, mask)
    seed = int(rng.integers(2**63))
    chains = tuple(
        _run_chain(z, mask, y, means, spec, np.random.default_rng(np.random.SeedSequence([seed, k, 0])))
        for k in range(spec.K)
    )
    return MicePredictor(spec, means, chains, seed)
