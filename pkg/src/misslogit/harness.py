"""Experiment orchestration: replicated (method x training size) grids and their summaries.

A grid cell is one (replicate, n) pair. Every random quantity in a cell is
seeded from (base_seed, replicate, n, purpose), so the output does not depend
on how cells are scheduled across worker processes.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .datagen import NonlinearTransform, Scenario, ScenarioConfig, admissible_patterns, gen_dataset, gen_mixture
from .errors import ConfigError, MissLogitError
from .estimators import MethodSpec, fit, method_from_config
from .metrics import evaluate
from .oracle import Link, bayes_probs_closed, bayes_probs_mc, epsilon_sup

log = logging.getLogger(__name__)

METRICS = ("excess_misclassification", "mae_bayes", "mcb_delta", "coef_mse")
KEY_FIELDS = ("scenario", "method", "n", "replicate")
TIMING_FIELDS = KEY_FIELDS + ("fit_seconds", "predict_seconds")
# purposes mixed into per-cell seeds
_TRAIN, _TEST, _ORACLE = 0, 1, 2
_MIXTURE = 0x5EED


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    methods: tuple[MethodSpec, ...] = ()
    train_sizes: tuple[int, ...] = (500, 5000, 20000)
    test_size: int = 10_000
    replicates: int = 5
    base_seed: int = 0
    oracle_mc_k: int = 10_000

    def __post_init__(self) -> None:
        scenario = self.scenario
        if isinstance(scenario, dict):
            scenario = ScenarioConfig.from_dict(scenario)
        object.__setattr__(self, "scenario", scenario.with_beta())
        object.__setattr__(self, "methods", tuple(method_from_config(m) if not isinstance(m, MethodSpec) else m for m in self.methods))
        object.__setattr__(self, "train_sizes", tuple(int(n) for n in self.train_sizes))
        if not self.methods:
            raise ConfigError("at least one method is required")
        names = [m.name for m in self.methods]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate method names: {names}")
        if not self.train_sizes or min(self.train_sizes) < 1:
            raise ConfigError("train_sizes must be a non-empty list of positive integers")
        if self.replicates < 1 or self.test_size < 1 or self.oracle_mc_k < 2:
            raise ConfigError("replicates and test_size must be positive, oracle_mc_k at least 2")
        if not 0 <= self.base_seed < 2**64:
            raise ConfigError("base_seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "methods": [m.to_dict() for m in self.methods],
            "train_sizes": list(self.train_sizes),
            "test_size": self.test_size,
            "replicates": self.replicates,
            "base_seed": self.base_seed,
            "oracle_mc_k": self.oracle_mc_k,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**payload)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    @property
    def pattern_columns(self) -> list[str]:
        return [f"mae_pattern_{p.key}" for p in admissible_patterns(self.scenario.d)]

    @property
    def result_fields(self) -> list[str]:
        return list(KEY_FIELDS) + ["status"] + list(METRICS) + self.pattern_columns


def cell_seed(base_seed: int, replicate: int, n: int, purpose: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([base_seed, replicate, n, purpose])


def method_seed(base_seed: int, replicate: int, n: int, name: str) -> np.random.SeedSequence:
    # crc32 rather than hash(): str hashes are salted per process
    return cell_seed(base_seed, replicate, n, 1000 + zlib.crc32(name.encode()))


def scenario_mixture(config: ExperimentConfig):
    """The population: drawn once per (scenario, base_seed), shared by every cell."""
    return gen_mixture(config.scenario, np.random.default_rng(cell_seed(config.base_seed, 0, 0, _MIXTURE)))


def _fmt(value) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def bayes_for_cell(config: ExperimentConfig, mixture, test, replicate: int, n: int) -> np.ndarray:
    """MC Bayes probabilities, cross-checked against the closed-form approximation when one exists."""
    scen = config.scenario
    transform = NonlinearTransform() if scen.kind is Scenario.NONLINEAR else None
    seed = int(cell_seed(config.base_seed, replicate, n, _ORACLE).generate_state(1, np.uint64)[0])
    probs, ses = bayes_probs_mc(test.z_observed, test.mask, mixture, 0.0, scen.beta, config.oracle_mc_k, seed, Link.LOGISTIC, transform)
    if transform is None:
        closed = bayes_probs_closed(test.z_observed, test.mask, mixture, 0.0, scen.beta)
        slack = 2 * epsilon_sup()[0] + 3 * ses
        bad = np.abs(closed - probs) > slack
        if bad.any():
            worst = int(np.argmax(np.abs(closed - probs) - slack))
            raise MissLogitError(
                f"oracle cross-check failed on {int(bad.sum())} rows (row {worst}: closed {closed[worst]:.5f}, MC {probs[worst]:.5f} +/- {ses[worst]:.5f})"
            )
    return probs


def run_cell(config: ExperimentConfig, replicate: int, n: int) -> tuple[list[dict], list[dict]]:
    """Fit and score every method on one (replicate, n) cell. Returns (result rows, timing rows)."""
    scen = config.scenario
    mixture = scenario_mixture(config)
    train = gen_dataset(scen, mixture, n, np.random.default_rng(cell_seed(config.base_seed, replicate, n, _TRAIN)))
    test = gen_dataset(scen, mixture, config.test_size, np.random.default_rng(cell_seed(config.base_seed, replicate, n, _TEST)))
    base = {"scenario": scen.kind.value, "n": n, "replicate": replicate}
    try:
        bayes = bayes_for_cell(config, mixture, test, replicate, n)
    except MissLogitError as exc:
        log.error("replicate %d, n=%d aborted: %s", replicate, n, exc)
        rows = [{**base, "method": m.name, "status": f"oracle_failed: {exc}"} for m in config.methods]
        return rows, [{**base, "method": m.name} for m in config.methods]

    rows, timings = [], []
    for spec in config.methods:
        row = {**base, "method": spec.name}
        timing = dict(row)
        try:
            t0 = time.perf_counter()
            pred = fit(spec, train.z_observed, train.mask, train.y, np.random.default_rng(method_seed(config.base_seed, replicate, n, spec.name)))
            t1 = time.perf_counter()
            probs = pred.predict(test.z_observed, test.mask)
            t2 = time.perf_counter()
        except (MissLogitError, np.linalg.LinAlgError, ValueError) as exc:
            log.warning("%s failed on replicate %d, n=%d: %s", spec.name, replicate, n, exc)
            row["status"] = f"error: {type(exc).__name__}: {exc}"
            rows.append(row)
            timings.append(timing)
            continue
        coefs = None if pred.coef_report is None else pred.coef_report.coefs
        report = evaluate(probs, bayes, test.y, test.mask, coefs, scen.beta, t1 - t0, t2 - t1)
        row["status"] = "ok" if pred.diagnostics.get("converged", True) else "not_converged"
        row.update({m: getattr(report, m) for m in METRICS})
        row.update({f"mae_pattern_{k}": s.mae_bayes for k, s in report.per_pattern.items()})
        timing.update(fit_seconds=report.runtime_fit_seconds, predict_seconds=report.runtime_predict_seconds)
        rows.append(row)
        timings.append(timing)
    return rows, timings


def _sort_key(row: dict) -> tuple:
    return (row["scenario"], row["method"], int(row["n"]), int(row["replicate"]))


def _write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in sorted(rows, key=_sort_key):
            writer.writerow({c: _fmt(row.get(c)) for c in columns})


def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _write_params(config: ExperimentConfig, out: Path) -> None:
    payload = {
        "version": __version__,
        "config": config.to_dict(),
        "beta_star": list(config.scenario.beta),
        "mixture": scenario_mixture(config).to_dict(),
        "method_labels": [m.name for m in config.methods],
    }
    with open(out / "params.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


def run_experiment(config: ExperimentConfig, out_dir: str | Path, workers: int = 1, resume: bool = False) -> list[dict]:
    """Run the grid, writing ``results.csv``, ``timings.csv`` and ``params.json`` to ``out_dir``.

    Finished cells are appended to ``cells.jsonl`` as they complete; with
    ``resume`` those cells are reused instead of recomputed.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_params(config, out)
    journal = out / "cells.jsonl"
    done: dict[tuple[int, int], dict] = {}
    if resume and journal.exists():
        for line in journal.read_text().splitlines():
            if line.strip():
                rec = json.loads(line)
                done[(rec["replicate"], rec["n"])] = rec
    elif journal.exists():
        journal.unlink()

    todo = [(r, n) for r in range(config.replicates) for n in config.train_sizes if (r, n) not in done]
    log.info("%d cells to run (%d reused)", len(todo), len(done))

    def record(rep, n, rows, timings):
        rec = {"replicate": rep, "n": n, "rows": rows, "timings": timings}
        done[(rep, n)] = rec
        with open(journal, "a") as fh:
            fh.write(json.dumps(rec) + "\n")

    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(run_cell, config, r, n): (r, n) for r, n in todo}
            for fut, (r, n) in futures.items():
                record(r, n, *fut.result())
    else:
        for r, n in todo:
            record(r, n, *run_cell(config, r, n))

    rows = [row for key in sorted(done) for row in done[key]["rows"]]
    timings = [t for key in sorted(done) for t in done[key]["timings"]]
    _write_csv(out / "results.csv", config.result_fields, rows)
    _write_csv(out / "timings.csv", list(TIMING_FIELDS), timings)
    return sorted(rows, key=_sort_key)


def _mean_se(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))


def _number(text) -> float | None:
    if text is None or text == "":
        return None
    value = float(text)
    return None if math.isnan(value) else value


def summarize(rows: list[dict], group_by: tuple[str, ...] = ("scenario", "method", "n")) -> tuple[list[dict], list[dict]]:
    """Mean and standard error per group: (overall rows, per-pattern rows).

    Rows whose status is not ``ok``/``not_converged`` carry no metrics and are
    counted under ``failed``. A single replicate reports SE 0.
    """
    if not rows:
        raise ValueError("no results to summarize")
    for g in group_by:
        if g not in rows[0]:
            raise ConfigError(f"unknown grouping field {g!r}")
    groups: dict[tuple, list[dict]] = {}
    for row in sorted(rows, key=_sort_key):
        groups.setdefault(tuple(row[g] for g in group_by), []).append(row)

    pattern_cols = sorted(c for c in rows[0] if c.startswith("mae_pattern_"))
    overall, patterns = [], []
    for key, members in groups.items():
        scored = [r for r in members if r.get("status") in ("ok", "not_converged")]
        if not scored:
            log.warning("group %s has no scored rows; omitted", dict(zip(group_by, key)))
            continue
        entry = dict(zip(group_by, key))
        entry.update(replicates=len(scored), failed=len(members) - len(scored))
        for metric in METRICS:
            vals = [v for v in (_number(r.get(metric)) for r in scored) if v is not None]
            entry[f"{metric}_mean"], entry[f"{metric}_se"] = _mean_se(vals) if vals else (None, None)
        overall.append(entry)
        for col in pattern_cols:
            vals = [v for v in (_number(r.get(col)) for r in scored) if v is not None]
            if vals:
                mean, se = _mean_se(vals)
                patterns.append({**dict(zip(group_by, key)), "pattern": col.removeprefix("mae_pattern_"), "count": len(vals), "mae_bayes_mean": mean, "mae_bayes_se": se})
    return overall, patterns


def summarize_dir(in_dir: str | Path, group_by: tuple[str, ...] = ("scenario", "method", "n")) -> tuple[Path, Path]:
    src = Path(in_dir)
    overall, patterns = summarize(_read_csv(src / "results.csv"), group_by)
    cols = list(group_by) + ["replicates", "failed"] + [f"{m}_{s}" for m in METRICS for s in ("mean", "se")]
    pcols = list(group_by) + ["pattern", "count", "mae_bayes_mean", "mae_bayes_se"]
    paths = src / "summary.csv", src / "summary_patterns.csv"
    for path, columns, data in ((paths[0], cols, overall), (paths[1], pcols, patterns)):
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
            writer.writeheader()
            for row in data:
                writer.writerow({c: _fmt(row.get(c)) for c in columns})
    return paths


# per-row z-score allowed between the exact closed form and its MC estimate
EXACT_CHECK_Z = 5.0


def oracle_check(config: ExperimentConfig, rows: int = 200) -> dict:
    """Cross-check closed-form oracles against MC on a fresh test sample of the scenario.

    Probit outcome: the closed form is exact, so deviations must stay within
    MC noise. Logistic outcome: the rescaled closed form may additionally be
    off by at most 2 * sup|epsilon|.
    """
    scen = config.scenario
    if scen.kind is Scenario.NONLINEAR:
        return {"scenario": scen.kind.value, "skipped": "no closed form under the non-linear transform", "passed": True}
    mixture = scenario_mixture(config)
    test = gen_dataset(scen, mixture, rows, np.random.default_rng(cell_seed(config.base_seed, 0, 0, _TEST)))
    eps = epsilon_sup()[0]
    report = {"scenario": scen.kind.value, "rows": rows, "k": config.oracle_mc_k, "epsilon_sup": eps}
    for link, slack in ((Link.PROBIT, 0.0), (Link.LOGISTIC, 2 * eps)):
        seed = int(cell_seed(config.base_seed, 0, 0, _ORACLE + (link is Link.PROBIT)).generate_state(1, np.uint64)[0])
        mc, se = bayes_probs_mc(test.z_observed, test.mask, mixture, 0.0, scen.beta, config.oracle_mc_k, seed, link)
        closed = bayes_probs_closed(test.z_observed, test.mask, mixture, 0.0, scen.beta, link)
        dev = np.abs(closed - mc)
        bound = slack + (EXACT_CHECK_Z if link is Link.PROBIT else 3.0) * se
        report[link.value.lower()] = {
            "max_abs_deviation": float(dev.max()),
            "violations": int(np.sum(dev > bound + 1e-15)),
        }
    report["passed"] = all(report[k]["violations"] == 0 for k in ("probit", "logistic"))
    return report
