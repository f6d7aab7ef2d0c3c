"""Simulated (X, M, Z, Y) data for the four missing-data scenarios.

MCAR: Gaussian covariates with a shared Toeplitz covariance, Bernoulli masks.
MAR: the first two features are always observed and only their block of
(mu, Sigma) changes with the pattern of the remaining features.
MNAR: every pattern has its own randomly drawn (mu, Sigma).
NONLINEAR: MCAR with rho = 0.95 followed by invertible per-feature maps;
labels depend on the transformed features.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import CholeskyError, ConfigError, TransformDomainError
from .gaussian_core import GaussianParams, Pattern, sample_mvn, sigmoid, toeplitz_cov

C3 = -1.67
C5 = 2.0
DEFAULT_D = 5
MAX_PARAM_REDRAWS = 100
# The default coefficient draw. Seed 0 happens to give ||beta|| = 0.75, far below the
# typical ~2.1 of a 5-d standard normal, which makes every method look alike; seed 4
# gives a typical draw (||beta|| = 2.17).
DEFAULT_BETA_SEED = 4


class Scenario(str, Enum):
    MCAR = "MCAR"
    MAR = "MAR"
    MNAR = "MNAR"
    NONLINEAR = "NONLINEAR"


DEFAULT_RHO = {Scenario.MCAR: 0.65, Scenario.MAR: 0.65, Scenario.MNAR: 0.65, Scenario.NONLINEAR: 0.95}


@dataclass(frozen=True)
class ScenarioConfig:
    kind: Scenario = Scenario.MCAR
    d: int = DEFAULT_D
    rho: float | None = None
    miss_prob: float = 0.25
    beta_star: tuple[float, ...] | None = None
    seed: int = DEFAULT_BETA_SEED

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", Scenario(self.kind))
        if self.rho is None:
            object.__setattr__(self, "rho", DEFAULT_RHO[self.kind])
        if self.beta_star is not None:
            beta = tuple(float(b) for b in self.beta_star)
            if len(beta) != self.d:
                raise ConfigError(f"beta_star has length {len(beta)}, expected d={self.d}")
            object.__setattr__(self, "beta_star", beta)
        if self.d < 1:
            raise ConfigError("d must be positive")
        if self.kind in (Scenario.NONLINEAR,) and self.d != DEFAULT_D:
            raise ConfigError("the non-linear scenario is defined for d = 5 only")
        if self.kind is Scenario.MAR and self.d < 3:
            raise ConfigError("the MAR scenario needs d >= 3")
        if not 0.0 <= self.miss_prob < 1.0:
            raise ConfigError("miss_prob must lie in [0, 1)")

    @property
    def default_shaped(self) -> bool:
        return self.d == DEFAULT_D

    @property
    def beta(self) -> np.ndarray:
        if self.beta_star is None:
            raise ConfigError("beta_star not resolved; call with_beta() first")
        return np.array(self.beta_star)

    def with_beta(self) -> "ScenarioConfig":
        """Fill ``beta_star`` with a N(0, I) draw seeded by ``seed`` if absent."""
        if self.beta_star is not None:
            return self
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0xBE7A]))
        return replace(self, beta_star=tuple(rng.standard_normal(self.d).tolist()))

    def missing_probs(self) -> np.ndarray:
        probs = np.full(self.d, self.miss_prob)
        if self.kind is Scenario.MAR:
            probs[:2] = 0.0
        return probs

    def to_dict(self) -> dict:
        out = asdict(self)
        out["kind"] = self.kind.value
        out["beta_star"] = None if self.beta_star is None else list(self.beta_star)
        return out

    @classmethod
    def from_dict(cls, payload: dict) -> "ScenarioConfig":
        known = {"kind", "d", "rho", "miss_prob", "beta_star", "seed"}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**payload)


@dataclass(frozen=True, eq=False)
class PatternMixture:
    """Per-pattern Gaussian parameters.

    ``shared`` is set for MCAR-like scenarios. For MAR, ``by_key`` is keyed by
    the sub-pattern over features 3..d only; for MNAR by the full pattern key.
    """

    kind: Scenario
    d: int
    shared: GaussianParams | None = None
    by_key: dict[str, GaussianParams] = field(default_factory=dict)

    def lookup_key(self, pattern: Pattern) -> str | None:
        if self.shared is not None:
            return None
        if self.kind is Scenario.MAR:
            return pattern.key[2:]
        return pattern.key

    def params_for(self, pattern: Pattern) -> GaussianParams:
        if pattern.d != self.d:
            raise ValueError(f"pattern dimension {pattern.d} != {self.d}")
        key = self.lookup_key(pattern)
        if key is None:
            return self.shared  # type: ignore[return-value]
        try:
            return self.by_key[key]
        except KeyError:
            raise KeyError(f"no parameters for pattern {pattern.key}") from None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "d": self.d,
            "shared": None if self.shared is None else self.shared.to_dict(),
            "by_key": {k: v.to_dict() for k, v in sorted(self.by_key.items())},
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "PatternMixture":
        shared = payload.get("shared")
        return cls(
            kind=Scenario(payload["kind"]),
            d=int(payload["d"]),
            shared=None if shared is None else GaussianParams.from_dict(shared),
            by_key={k: GaussianParams.from_dict(v) for k, v in payload.get("by_key", {}).items()},
        )


def admissible_patterns(d: int) -> Iterator[Pattern]:
    """Every pattern except all-missing, ordered by integer code."""
    for code in range((1 << d) - 1):
        yield Pattern(tuple(bool((code >> j) & 1) for j in range(d)))


def gen_mask(mechanism: Scenario | str, n: int, d: int, probs: Sequence[float], rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli(probs[j]) entries; all-missing rows are redrawn."""
    mechanism = Scenario(mechanism)
    probs = np.asarray(probs, dtype=float)
    if probs.shape != (d,):
        raise ValueError(f"probs must have length {d}")
    if np.any(probs < 0) or np.any(probs >= 1):
        raise ValueError("every missingness probability must lie in [0, 1)")
    if mechanism is Scenario.MAR and np.any(probs[:2] != 0):
        raise ValueError("MAR masks keep the first two features observed")
    mask = rng.random((n, d)) < probs
    bad = np.flatnonzero(mask.all(axis=1))
    while bad.size:
        mask[bad] = rng.random((bad.size, d)) < probs
        bad = bad[mask[bad].all(axis=1)]
    return mask


def _toeplitz_draw(rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
    rho = rng.uniform(-1.0, 1.0)
    scale = rng.uniform(0.0, 1.0)
    mu = rng.normal(0.0, math.sqrt(0.5), size=size)
    # U([-1,1]) can return exactly -1, which is not an AR(1) correlation
    rho = min(max(rho, -1.0 + 1e-12), 1.0 - 1e-12)
    scale = max(scale, 1e-12)
    return mu, toeplitz_cov(rho, size, scale)


def _draw_params(build, rng: np.random.Generator) -> GaussianParams:
    for _ in range(MAX_PARAM_REDRAWS):
        mu, sig = build(rng)
        try:
            return GaussianParams(mu, sig)
        except CholeskyError:
            continue
    raise CholeskyError(f"could not draw a valid covariance in {MAX_PARAM_REDRAWS} attempts")


def gen_mixture(config: ScenarioConfig, rng: np.random.Generator) -> PatternMixture:
    d = config.d
    if config.kind in (Scenario.MCAR, Scenario.NONLINEAR):
        return PatternMixture(config.kind, d, shared=GaussianParams(np.zeros(d), toeplitz_cov(config.rho, d)))
    if config.kind is Scenario.MNAR:
        by_key = {p.key: _draw_params(lambda r: _toeplitz_draw(r, d), rng) for p in admissible_patterns(d)}
        return PatternMixture(config.kind, d, by_key=by_key)

    tail = toeplitz_cov(config.rho, d - 2)

    def build(r):
        mu12, sig12 = _toeplitz_draw(r, 2)
        mu = np.concatenate([mu12, np.zeros(d - 2)])
        sig = np.zeros((d, d))
        sig[:2, :2] = sig12
        sig[2:, 2:] = tail
        return mu, sig

    by_key = {}
    for code in range(1 << (d - 2)):
        key = "".join("1" if (code >> j) & 1 else "0" for j in range(d - 2))
        by_key[key] = _draw_params(build, rng)
    return PatternMixture(config.kind, d, by_key=by_key)


def _as_2d(a):
    a = np.asarray(a, dtype=float)
    return a[None, :] if a.ndim == 1 else a


def nonlinear_transform(x: np.ndarray) -> np.ndarray:
    """Map latent Gaussian features to the observed non-linear features."""
    x = np.asarray(x, dtype=float)
    z = x.copy()
    z[..., 2] = np.exp(x[..., 2]) + C3
    z[..., 3] = x[..., 3] ** 3
    x5 = x[..., 4]
    with np.errstate(over="ignore"):
        z[..., 4] = C5 + np.where(x5 >= 0, x5 * x5, -10.0 * np.exp(np.minimum(x5, 0.0)))
    return z


def nonlinear_inverse(z: np.ndarray, coords: Sequence[int] | None = None) -> np.ndarray:
    """Invert ``nonlinear_transform`` on the columns listed in ``coords``.

    ``z`` holds the values of those coordinates (all five when coords is None).
    """
    z = np.asarray(z, dtype=float)
    coords = list(range(DEFAULT_D)) if coords is None else list(coords)
    if z.shape[-1] != len(coords):
        raise ValueError("z and coords disagree in length")
    x = z.copy()
    for pos, j in enumerate(coords):
        v = z[..., pos]
        if j == 2:
            if np.any(v <= C3):
                raise TransformDomainError("z_3 must exceed c_3")
            x[..., pos] = np.log(v - C3)
        elif j == 3:
            x[..., pos] = np.cbrt(v)
        elif j == 4:
            shifted = v - C5
            if np.any(shifted <= -10.0):
                raise TransformDomainError("z_5 - c_5 must exceed -10")
            with np.errstate(invalid="ignore", divide="ignore"):
                x[..., pos] = np.where(shifted >= 0, np.sqrt(np.maximum(shifted, 0.0)), np.log(-np.minimum(shifted, 0.0) / 10.0))
    return x


class IdentityTransform:
    """Coordinatewise identity, the linear special case of a feature map."""

    def forward(self, x: np.ndarray, coords: Sequence[int] | None = None) -> np.ndarray:
        return np.asarray(x, dtype=float)

    def inverse(self, z: np.ndarray, coords: Sequence[int] | None = None) -> np.ndarray:
        return np.asarray(z, dtype=float)


class NonlinearTransform:
    def forward(self, x: np.ndarray, coords: Sequence[int] | None = None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if coords is None:
            return nonlinear_transform(x)
        full = np.zeros(x.shape[:-1] + (DEFAULT_D,))
        full[..., list(coords)] = x
        return nonlinear_transform(full)[..., list(coords)]

    def inverse(self, z: np.ndarray, coords: Sequence[int] | None = None) -> np.ndarray:
        return nonlinear_inverse(z, coords)


@dataclass(eq=False)
class Dataset:
    x_complete: np.ndarray
    z_observed: np.ndarray
    mask: np.ndarray
    y: np.ndarray
    scenario: ScenarioConfig
    bayes_probs: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.mask.shape[1]

    def features(self) -> np.ndarray:
        """Fully observed feature matrix the labels were generated from."""
        if self.scenario.kind is Scenario.NONLINEAR:
            return nonlinear_transform(self.x_complete)
        return self.x_complete

    def subset(self, rows) -> "Dataset":
        return Dataset(
            self.x_complete[rows],
            self.z_observed[rows],
            self.mask[rows],
            self.y[rows],
            self.scenario,
            None if self.bayes_probs is None else self.bayes_probs[rows],
        )

    def pattern_groups(self) -> dict[Pattern, np.ndarray]:
        return group_by_pattern(self.mask)

    def save(self, csv_path: str | Path, mixture: PatternMixture | None = None) -> None:
        """Write the CSV and its JSON sidecar (``<csv>.json``)."""
        csv_path = Path(csv_path)
        d = self.d
        header = [f"x_{j + 1}" for j in range(d)] + [f"z_{j + 1}" for j in range(d)]
        header += [f"m_{j + 1}" for j in range(d)] + ["y"]
        if self.bayes_probs is not None:
            header.append("bayes")
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i in range(self.n):
                row = [repr(float(v)) for v in self.x_complete[i]]
                row += ["" if self.mask[i, j] else repr(float(self.z_observed[i, j])) for j in range(d)]
                row += [str(int(b)) for b in self.mask[i]] + [str(int(self.y[i]))]
                if self.bayes_probs is not None:
                    row.append(repr(float(self.bayes_probs[i])))
                w.writerow(row)
        sidecar = {"scenario": self.scenario.to_dict(), "mixture": None if mixture is None else mixture.to_dict()}
        Path(str(csv_path) + ".json").write_text(json.dumps(sidecar, indent=2), encoding="utf-8")

    @classmethod
    def load(cls, csv_path: str | Path) -> tuple["Dataset", PatternMixture | None]:
        csv_path = Path(csv_path)
        sidecar = json.loads(Path(str(csv_path) + ".json").read_text(encoding="utf-8"))
        scenario = ScenarioConfig.from_dict(sidecar["scenario"])
        mixture = None if sidecar["mixture"] is None else PatternMixture.from_dict(sidecar["mixture"])
        with open(csv_path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = list(reader)
        d = sum(1 for h in header if h.startswith("x_"))
        n = len(rows)
        x = np.empty((n, d))
        z = np.full((n, d), np.nan)
        m = np.zeros((n, d), dtype=bool)
        y = np.empty(n, dtype=np.int8)
        has_bayes = "bayes" in header
        bayes = np.empty(n) if has_bayes else None
        for i, row in enumerate(rows):
            x[i] = [float(v) for v in row[:d]]
            for j, v in enumerate(row[d : 2 * d]):
                if v != "":
                    z[i, j] = float(v)
            m[i] = [v == "1" for v in row[2 * d : 3 * d]]
            y[i] = int(row[3 * d])
            if has_bayes:
                bayes[i] = float(row[3 * d + 1])
        return cls(x, z, m, y, scenario, bayes), mixture


def group_by_pattern(mask: np.ndarray) -> dict[Pattern, np.ndarray]:
    """Row indices per distinct pattern, ordered by pattern code."""
    mask = np.asarray(mask, dtype=bool)
    codes = mask @ (1 << np.arange(mask.shape[1]))
    out = {}
    for code in np.unique(codes):
        rows = np.flatnonzero(codes == code)
        out[Pattern.from_mask(mask[rows[0]])] = rows
    return out


def gen_dataset(config: ScenarioConfig, mixture: PatternMixture, n: int, rng: np.random.Generator) -> Dataset:
    config = config.with_beta()
    d = config.d
    mask = gen_mask(config.kind, n, d, config.missing_probs(), rng)
    x = np.empty((n, d))
    for pattern, rows in group_by_pattern(mask).items():
        x[rows] = sample_mvn(mixture.params_for(pattern), rows.size, rng)
    feats = nonlinear_transform(x) if config.kind is Scenario.NONLINEAR else x
    y = (rng.random(n) < sigmoid(feats @ config.beta)).astype(np.int8)
    z = np.where(mask, np.nan, feats)
    return Dataset(x, z, mask, y, config)
