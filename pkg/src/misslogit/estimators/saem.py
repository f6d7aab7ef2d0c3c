"""Stochastic-approximation EM for logistic regression with Gaussian covariates.

The covariates are modelled as N(mu, Sigma) and Y | X as logistic. Each
iteration refreshes the missing cells by Metropolis-within-Gibbs (proposal:
the conditional Gaussian of the missing block given the observed one, so the
acceptance ratio is the likelihood ratio of Y), then moves the running
sufficient statistics and the coefficients toward the new completed data with
step size gamma_t.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..datagen import group_by_pattern
from ..errors import MissLogitError
from ..gaussian_core import GaussianParams, condition, sigmoid
from ..logistic_fit import DEFAULT_RIDGE, PROB_CLIP, LogisticModel, fit_logistic, irls_step
from .base import CoefReport, FittedPredictor, check_inputs, fill, observed_means
from .spec import Family, MethodSpec

log = logging.getLogger(__name__)

# convergence check: coefficient drift over the last tenth of the averaging phase
DRIFT_TOL = 1e-2


@dataclass(frozen=True, eq=False)
class SaemResult:
    mu: np.ndarray
    sigma: np.ndarray
    params: np.ndarray  # intercept followed by coefficients
    converged: bool
    iterations: int
    drift: float
    acceptance: float
    trace: np.ndarray = field(repr=False)
    message: str = ""


def step_size(t: int, burn: int) -> float:
    """gamma_t: 1 during burn-in, then 1/(t - burn)."""
    return 1.0 if t <= burn else 1.0 / (t - burn)


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def run_saem(
    z: np.ndarray,
    mask: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator,
    iterations: int = 500,
    burn: int = 100,
    sweeps: int = 5,
    ridge: float = DEFAULT_RIDGE,
) -> SaemResult:
    z, mask = check_inputs(z, mask)
    y = np.asarray(y, dtype=float)
    n, d = z.shape
    x = fill(z, mask, observed_means(z, mask))
    x1 = np.column_stack([np.ones(n), x])
    groups = [(p, rows) for p, rows in group_by_pattern(mask).items() if p.mis]

    params = fit_logistic(x, y, ridge=ridge).params
    s1 = x.mean(axis=0)
    s2 = x.T @ x / n
    mu, sigma = s1.copy(), _sym(s2 - np.outer(s1, s1))
    trace = np.empty((iterations, d + 1))
    accepted = proposed = 0
    message = ""
    t = 0
    try:
        for t in range(1, iterations + 1):
            if groups:
                gauss = GaussianParams(mu, sigma)
                eta = x1 @ params
                for pattern, rows in groups:
                    obs, mis = list(pattern.obs), list(pattern.mis)
                    cond = condition(gauss, pattern)
                    cmean = cond.mean(x[np.ix_(rows, obs)])
                    lower = cond.chol
                    b_mis = params[1:][mis]
                    cur = x[np.ix_(rows, mis)]
                    eta_r = eta[rows]
                    y_r = y[rows]
                    for _ in range(sweeps):
                        prop = cmean + rng.standard_normal(cur.shape) @ lower.T
                        eta_new = eta_r + (prop - cur) @ b_mis
                        log_ratio = y_r * (eta_new - eta_r) - np.logaddexp(0.0, eta_new) + np.logaddexp(0.0, eta_r)
                        ok = np.log(rng.random(len(rows))) < log_ratio
                        cur[ok] = prop[ok]
                        eta_r = np.where(ok, eta_new, eta_r)
                        accepted += int(ok.sum())
                        proposed += len(rows)
                    x[np.ix_(rows, mis)] = cur
                x1[:, 1:] = x
            gamma = step_size(t, burn)
            params = params + gamma * (irls_step(params, x1, y, ridge) - params)
            s1 = s1 + gamma * (x.mean(axis=0) - s1)
            s2 = s2 + gamma * (x.T @ x / n - s2)
            mu, sigma = s1, _sym(s2 - np.outer(s1, s1))
            if not np.all(np.isfinite(params)):
                raise MissLogitError(f"non-finite coefficients at iteration {t}")
            trace[t - 1] = params
    except (MissLogitError, np.linalg.LinAlgError) as exc:
        message = str(exc)
        log.warning("SAEM stopped early: %s", exc)
        t -= 1
        if t == 0:
            raise
        params = trace[t - 1]

    trace = trace[:t]
    window = max(1, (iterations - burn) // 10)
    drift = float(np.max(np.abs(trace[-1] - trace[max(0, t - 1 - window)])))
    converged = not message and t == iterations and drift < DRIFT_TOL
    return SaemResult(
        mu=mu.copy(),
        sigma=sigma.copy(),
        params=params.copy(),
        converged=converged,
        iterations=t,
        drift=drift,
        acceptance=accepted / proposed if proposed else 1.0,
        trace=trace,
        message=message,
    )


class SaemPredictor(FittedPredictor):
    def __init__(self, spec: MethodSpec, result: SaemResult, seed: int):
        self.spec, self.result, self.seed = spec, result, seed
        self.d = result.mu.shape[0]
        self.model = LogisticModel(float(result.params[0]), result.params[1:].copy(), converged=result.converged)
        self.gauss = GaussianParams(result.mu, result.sigma)
        self.coef_report = CoefReport.from_model(self.model, self.d)

    def _predict(self, z, mask):
        out = np.empty(z.shape[0])
        beta = self.model.coefs
        for pattern, rows in group_by_pattern(mask).items():
            if not pattern.mis:
                out[rows] = self.model.predict_proba(z[rows])
                continue
            obs, mis = list(pattern.obs), list(pattern.mis)
            rng = np.random.default_rng(np.random.SeedSequence([self.seed, pattern.code]))
            cond = condition(self.gauss, pattern)
            x_obs = z[np.ix_(rows, obs)]
            draws = cond.mean(x_obs)[:, None, :] + rng.standard_normal((len(rows), self.spec.K, len(mis))) @ cond.chol.T
            eta = (self.model.intercept + x_obs @ beta[obs])[:, None] + draws @ beta[mis]
            out[rows] = np.clip(sigmoid(eta), PROB_CLIP, 1.0 - PROB_CLIP).mean(axis=1)
        return out

    @property
    def diagnostics(self) -> dict:
        r = self.result
        return {
            "converged": r.converged,
            "iterations": r.iterations,
            "drift": r.drift,
            "acceptance": r.acceptance,
            "message": r.message,
        }


def fit_saem(z: np.ndarray, mask: np.ndarray, y: np.ndarray, spec: MethodSpec, rng: np.random.Generator) -> SaemPredictor:
    if spec.family is not Family.SAEM:
        raise ValueError(f"fit_saem needs a SAEM spec, got {spec.family.value}")
    seed = int(rng.integers(2**63))
    result = run_saem(
        z,
        mask,
        y,
        np.random.default_rng(np.random.SeedSequence([seed, 0])),
        iterations=spec.saem_iterations,
        burn=spec.saem_burn,
        sweeps=spec.mh_sweeps,
    )
    if not result.converged:
        log.warning("SAEM did not converge (drift %.3g after %d iterations)", result.drift, result.iterations)
    return SaemPredictor(spec, result, seed)
