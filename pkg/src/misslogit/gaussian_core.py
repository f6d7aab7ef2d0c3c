"""Multivariate Gaussian primitives.

Covariance construction, conditioning on a missingness pattern through
Schur complements, sampling, and the two scalar links (standard normal CDF
and logistic sigmoid) used throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg
from scipy.special import erfc, expit

from .errors import CholeskyError, ConditioningError

JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6)
_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class GaussianParams:
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        sigma = np.asarray(self.sigma, dtype=float)
        d = mu.shape[0]
        if sigma.shape != (d, d):
            raise ValueError(f"sigma must be {d}x{d}, got {sigma.shape}")
        scale = max(np.abs(sigma).max(initial=0.0), 1.0)
        if np.abs(sigma - sigma.T).max(initial=0.0) > 1e-12 * scale:
            raise ValueError("sigma is not symmetric")
        if d:
            cholesky_jittered(sigma)
        mu.setflags(write=False)
        sigma = sigma.copy()
        sigma.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def dim(self) -> int:
        return self.mu.shape[0]

    @cached_property
    def chol(self) -> np.ndarray:
        # zero-variance coordinates are deterministic: keep them out of the factorization
        live = np.flatnonzero(np.diag(self.sigma) > 0)
        out = np.zeros_like(self.sigma)
        if live.size:
            out[np.ix_(live, live)] = cholesky_jittered(self.sigma[np.ix_(live, live)])
        return out

    def to_dict(self) -> dict:
        return {"mu": self.mu.tolist(), "sigma": self.sigma.tolist()}

    @classmethod
    def from_dict(cls, payload: dict) -> "GaussianParams":
        return cls(np.array(payload["mu"], dtype=float), np.array(payload["sigma"], dtype=float))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GaussianParams):
            return NotImplemented
        return np.array_equal(self.mu, other.mu) and np.array_equal(self.sigma, other.sigma)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Pattern:
    """Missingness indicator; ``bits[j]`` is True when coordinate j is missing."""

    bits: tuple[bool, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "bits", tuple(bool(b) for b in self.bits))

    @classmethod
    def from_mask(cls, row: Iterable) -> "Pattern":
        return cls(tuple(bool(b) for b in row))

    @classmethod
    def from_key(cls, key: str) -> "Pattern":
        if not key or set(key) - {"0", "1"}:
            raise ValueError(f"invalid pattern key {key!r}")
        return cls(tuple(c == "1" for c in key))

    @classmethod
    def complete(cls, d: int) -> "Pattern":
        return cls((False,) * d)

    @property
    def d(self) -> int:
        return len(self.bits)

    @property
    def obs(self) -> tuple[int, ...]:
        return tuple(j for j, b in enumerate(self.bits) if not b)

    @property
    def mis(self) -> tuple[int, ...]:
        return tuple(j for j, b in enumerate(self.bits) if b)

    @property
    def key(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    @property
    def code(self) -> int:
        """Integer with bit j set when coordinate j is missing."""
        return sum(1 << j for j, b in enumerate(self.bits) if b)

    def __str__(self) -> str:
        return self.key


@dataclass(frozen=True, eq=False)
class ConditionalGaussian:
    """Law of X_mis given X_obs = x: N(offset + coef @ x, cond_cov)."""

    coef: np.ndarray
    offset: np.ndarray
    cond_cov: np.ndarray
    pattern: Pattern

    def mean(self, x_obs: np.ndarray) -> np.ndarray:
        """Conditional mean; ``x_obs`` may be a vector or an (n, |obs|) matrix."""
        x_obs = np.asarray(x_obs, dtype=float)
        return self.offset + x_obs @ self.coef.T

    @cached_property
    def chol(self) -> np.ndarray:
        if self.cond_cov.shape[0] == 0:
            return self.cond_cov
        return cholesky_jittered(self.cond_cov)


def cholesky_jittered(a: np.ndarray, jitters: Sequence[float] = JITTER_LADDER) -> np.ndarray:
    """Lower Cholesky factor, retrying with growing diagonal jitter.

    Raises CholeskyError if the matrix is still not factorizable after the
    largest jitter.
    """
    a = np.asarray(a, dtype=float)
    eye = np.eye(a.shape[0])
    for eps in jitters:
        try:
            return linalg.cholesky(a + eps * eye, lower=True, check_finite=True)
        except (linalg.LinAlgError, ValueError):
            continue
    raise CholeskyError(f"matrix of shape {a.shape} is not positive semi-definite")


def toeplitz_cov(rho: float, d: int, scale: float = 1.0) -> np.ndarray:
    """``scale * [rho**|i-j|]``, the AR(1) correlation structure."""
    if not -1.0 < rho < 1.0:
        raise ValueError(f"|rho| must be < 1 for an AR(1) covariance, got {rho}")
    if d < 1:
        raise ValueError("d must be positive")
    if scale <= 0:
        raise ValueError("scale must be positive")
    idx = np.arange(d)
    lag = np.abs(idx[:, None] - idx[None, :])
    return scale * np.power(float(rho), lag)


def condition(params: GaussianParams, pattern: Pattern) -> ConditionalGaussian:
    """Distribution of the missing block given the observed block."""
    if pattern.d != params.dim:
        raise ValueError(f"pattern has d={pattern.d}, params have d={params.dim}")
    obs = list(pattern.obs)
    mis = list(pattern.mis)
    mu, sig = params.mu, params.sigma
    if not mis:
        return ConditionalGaussian(
            coef=np.zeros((0, len(obs))), offset=np.zeros(0), cond_cov=np.zeros((0, 0)), pattern=pattern
        )
    s_mm = sig[np.ix_(mis, mis)]
    if not obs:
        return ConditionalGaussian(
            coef=np.zeros((len(mis), 0)), offset=mu[mis].copy(), cond_cov=s_mm.copy(), pattern=pattern
        )
    s_oo = sig[np.ix_(obs, obs)]
    s_om = sig[np.ix_(obs, mis)]
    try:
        low = cholesky_jittered(s_oo)
    except CholeskyError as exc:
        raise ConditioningError(f"observed block is singular for pattern {pattern.key}") from exc
    # W = L^{-1} S_om, so S_mo S_oo^{-1} S_om = W^T W
    w = linalg.solve_triangular(low, s_om, lower=True)
    coef = linalg.solve_triangular(low, w, lower=True, trans="T").T
    cond_cov = s_mm - w.T @ w
    cond_cov = 0.5 * (cond_cov + cond_cov.T)
    offset = mu[mis] - coef @ mu[obs]
    return ConditionalGaussian(coef=coef, offset=offset, cond_cov=cond_cov, pattern=pattern)


def sample_mvn(params: GaussianParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. rows from N(mu, sigma) as ``mu + z @ L.T``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    z = rng.standard_normal((n, params.dim))
    return params.mu + z @ params.chol.T


def std_normal_cdf(t):
    """Standard normal CDF through erfc; accurate in both tails."""
    return 0.5 * erfc(-np.asarray(t, dtype=float) / _SQRT2)


def sigmoid(t):
    return expit(np.asarray(t, dtype=float))


def probit_gaussian_integral(t, a, mu, var):
    """E[Phi(t + a X)] for X ~ N(mu, var), in closed form."""
    return std_normal_cdf((t + a * mu) / np.sqrt(1.0 + a * a * var))
