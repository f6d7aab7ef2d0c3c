"""Bayes probabilities on a missingness pattern.

Three routes are provided:

* exact Probit probabilities for Gaussian pattern mixtures,
  ``Phi((a0 + a.x) / sqrt(1 + s2))``;
* the rescaled-logistic approximation for logistic outcomes,
  ``sigmoid((a0 + a.x) / sqrt(1 + pi/8 * s2))``, within ``2 * eps_sup``;
* Monte Carlo over the conditional law of the missing block, optionally
  through an invertible feature map on top of latent Gaussians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

from .datagen import PatternMixture, group_by_pattern
from .gaussian_core import GaussianParams, Pattern, condition, sigmoid, std_normal_cdf

PI_OVER_8 = math.pi / 8.0


class Link(str, Enum):
    LOGISTIC = "LOGISTIC"
    PROBIT = "PROBIT"

    def __call__(self, t):
        return sigmoid(t) if self is Link.LOGISTIC else std_normal_cdf(t)


class Scale(str, Enum):
    PROBIT = "PROBIT"
    LOGISTIC_PI8 = "LOGISTIC_PI8"


@dataclass(frozen=True, eq=False)
class PatternProbit:
    alpha0: float
    alpha: np.ndarray
    sigma_tilde2: float
    scale: Scale = Scale.PROBIT

    def __post_init__(self) -> None:
        if self.sigma_tilde2 < 0:
            raise ValueError("sigma_tilde2 must be non-negative")

    def linear_predictor(self, x_obs) -> np.ndarray:
        x_obs = np.asarray(x_obs, dtype=float)
        if x_obs.shape[-1] != self.alpha.shape[0]:
            raise ValueError(f"x_obs has {x_obs.shape[-1]} coordinates, expected {self.alpha.shape[0]}")
        return self.alpha0 + x_obs @ self.alpha


class MCEstimate(NamedTuple):
    value: float
    se: float


def pattern_probit_params(
    beta0: float, beta: np.ndarray, params_m: GaussianParams, pattern: Pattern, scale: Scale = Scale.PROBIT
) -> PatternProbit:
    """Pattern-wise intercept, slopes and residual variance of the missing part."""
    beta = np.asarray(beta, dtype=float)
    obs, mis = list(pattern.obs), list(pattern.mis)
    if not mis:
        return PatternProbit(float(beta0), beta.copy(), 0.0, scale)
    cg = condition(params_m, pattern)
    b_mis = beta[mis]
    alpha0 = float(beta0 + b_mis @ cg.offset)
    alpha = beta[obs] + cg.coef.T @ b_mis
    s2 = float(b_mis @ cg.cond_cov @ b_mis)
    return PatternProbit(alpha0, alpha, max(s2, 0.0), scale)


def bayes_prob_probit(x_obs, pp: PatternProbit):
    return std_normal_cdf(pp.linear_predictor(x_obs) / math.sqrt(1.0 + pp.sigma_tilde2))


def bayes_prob_logistic(x_obs, pp: PatternProbit):
    return sigmoid(pp.linear_predictor(x_obs) / math.sqrt(1.0 + PI_OVER_8 * pp.sigma_tilde2))


def bayes_prob_mc(
    z_obs,
    pattern: Pattern,
    params_m: GaussianParams,
    beta0: float,
    beta,
    k: int,
    link: Link | str = Link.LOGISTIC,
    transform=None,
    rng: np.random.Generator | None = None,
) -> MCEstimate:
    """Monte Carlo average of ``link(beta0 + beta.z)`` over completions of a row.

    Without ``transform`` the missing block is drawn from its conditional
    Gaussian law. With one, ``z_obs`` is in transformed coordinates: it is
    mapped back to the latent scale, the latent missing block is drawn, and
    the completions are pushed through the transform before the link.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    link = Link(link)
    rng = np.random.default_rng() if rng is None else rng
    beta = np.asarray(beta, dtype=float)
    z_obs = np.asarray(z_obs, dtype=float)
    obs, mis = list(pattern.obs), list(pattern.mis)
    if z_obs.shape != (len(obs),):
        raise ValueError(f"z_obs must have {len(obs)} entries")
    if not mis:
        return MCEstimate(float(link(beta0 + beta[obs] @ z_obs)), 0.0)

    x_obs = z_obs if transform is None else transform.inverse(z_obs, obs)
    cg = condition(params_m, pattern)
    draws = cg.mean(x_obs) + rng.standard_normal((k, len(mis))) @ cg.chol.T
    if transform is not None:
        draws = transform.forward(draws, mis)
    eta = beta0 + beta[obs] @ z_obs + draws @ beta[mis]
    vals = link(eta)
    se = float(vals.std(ddof=1) / math.sqrt(k)) if k > 1 else float("inf")
    return MCEstimate(float(vals.mean()), se)


def row_stream(seed: int, row: int) -> np.random.Generator:
    """Independent generator for one evaluation point."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(row,)))


def bayes_probs_mc(
    z_observed: np.ndarray,
    mask: np.ndarray,
    mixture: PatternMixture,
    beta0: float,
    beta,
    k: int,
    seed: int,
    link: Link | str = Link.LOGISTIC,
    transform=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-row MC Bayes probabilities and standard errors.

    Row i always uses the substream ``(seed, i)``, so results do not depend on
    how rows are batched.
    """
    n = mask.shape[0]
    probs = np.empty(n)
    ses = np.zeros(n)
    for pattern, rows in group_by_pattern(mask).items():
        params = mixture.params_for(pattern)
        obs = list(pattern.obs)
        for i in rows:
            est = bayes_prob_mc(z_observed[i, obs], pattern, params, beta0, beta, k, link, transform, row_stream(seed, int(i)))
            probs[i], ses[i] = est
    return probs, ses


def bayes_probs_closed(
    z_observed: np.ndarray, mask: np.ndarray, mixture: PatternMixture, beta0: float, beta, link: Link | str = Link.LOGISTIC
) -> np.ndarray:
    """Closed-form probabilities: exact for PROBIT, rescaled approximation for LOGISTIC."""
    link = Link(link)
    out = np.empty(mask.shape[0])
    for pattern, rows in group_by_pattern(mask).items():
        pp = pattern_probit_params(beta0, beta, mixture.params_for(pattern), pattern)
        x_obs = z_observed[np.ix_(rows, list(pattern.obs))]
        out[rows] = bayes_prob_probit(x_obs, pp) if link is Link.PROBIT else bayes_prob_logistic(x_obs, pp)
    return out


def epsilon(t):
    """Gap between the probit link and the rescaled sigmoid."""
    t = np.asarray(t, dtype=float)
    return std_normal_cdf(t) - sigmoid(t * math.sqrt(8.0 / math.pi))


def epsilon_sup(lo: float = -10.0, hi: float = 10.0, step: float = 1e-3) -> tuple[float, float]:
    """``sup |epsilon|`` on [lo, hi]: coarse grid, then golden-section refinement.

    Returns (value, argmax).
    """
    grid = np.arange(lo, hi + step / 2, step)
    vals = np.abs(epsilon(grid))
    i = int(np.argmax(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = minimize_scalar(lambda t: -abs(float(epsilon(t))), bracket=(a, grid[i], b), method="golden", tol=1e-10)
    if -res.fun >= vals[i]:
        return float(-res.fun), float(res.x)
    return float(vals[i]), float(grid[i])
