"""Experiment harness: single runs, parameter sweeps and their outputs.

Seed scheme
-----------
Each run's data seed is derived with ``numpy.random.SeedSequence`` from the
base seed and a spawn key ``(key(mu_zt), key(mu_xy), run_index)`` where
``key(mu) = round(mu * 1e6)``. A grid point's streams therefore depend only
on its own coordinates, so adding grid points leaves existing points'
numbers unchanged. The ALS initialization seed is spawned from the data seed
on a separate stream, so switching levels on or off never changes the data
any level sees.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .baseline import (
    ate_error,
    cp_als,
    joint_tensor,
    joint_tensor_from_truth,
    mte_error,
    tv_distance,
)
from .domain import read_csv
from .errors import ConfigError, ConvergenceFailure, SpoError
from .moments import condition_diagnostic, estimate_bundle
from .spo import ate, recover_mte
from .synthetic import (
    ModelSpec,
    appendix_model,
    exact_bundle,
    exact_ground_truth,
    paper_model,
    sample,
)

LEVEL_METRIC = {2: "tv", 3: "mte", 4: "ate"}
# spawn-key coordinate used for models without a (mu_zt, mu_xy) grid
_NO_GRID = 10**7

CSV_HEADER = ["mu_zt", "mu_xy", "level", "metric", "mean", "sd", "runs", "failures"]

_MODEL_DEFAULTS = {
    "paper": {"n": 1000, "levels": [2, 3, 4]},
    "appendix1": {"n": 100_000, "levels": [4]},
    "appendix2": {"n": 500_000, "levels": [3]},
    "csv": {"n": 0, "levels": [3, 4]},
}


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "paper"
    mu_zt: tuple = (0.0,)
    mu_xy: tuple = (0.0,)
    path: Optional[str] = None
    n: int = 1000
    runs: int = 100
    seed: int = 0
    levels: tuple = (2, 3, 4)
    k: int = 2
    output: str = "out"
    restarts: int = 10
    method: str = "pencil"
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "mu_zt", tuple(float(v) for v in self.mu_zt))
        object.__setattr__(self, "mu_xy", tuple(float(v) for v in self.mu_xy))
        object.__setattr__(self, "levels", tuple(sorted({int(v) for v in self.levels})))
        if self.model not in _MODEL_DEFAULTS:
            raise ConfigError(f"unknown model {self.model!r}")
        if self.model == "csv":
            if not self.path:
                raise ConfigError("csv model needs a 'path'")
            if self.runs != 1:
                raise ConfigError("csv model is a single fixed dataset; use runs = 1")
        elif self.n < 0:
            raise ConfigError("n must be >= 1 (or 0 for exact population moments)")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if not self.levels:
            raise ConfigError("levels must be non-empty")
        if not set(self.levels) <= set(LEVEL_METRIC):
            raise ConfigError(f"levels must be a subset of {sorted(LEVEL_METRIC)}")
        if self.model == "paper":
            if not self.mu_zt or not self.mu_xy:
                raise ConfigError("paper model needs non-empty mu_zt and mu_xy grids")
            for v in self.mu_zt + self.mu_xy:
                if not 0.0 <= v <= 1.0:
                    raise ConfigError(f"grid value {v} outside [0, 1]")
        if self.k < 1 or self.restarts < 1 or self.workers < 1:
            raise ConfigError("k, restarts and workers must be >= 1")
        if self.method not in ("pencil", "prony"):
            raise ConfigError(f"unknown method {self.method!r}")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        model = doc.get("model", "paper")
        if model not in _MODEL_DEFAULTS:
            raise ConfigError(f"unknown model {model!r}")
        for key, value in _MODEL_DEFAULTS[model].items():
            doc.setdefault(key, value)
        for key in ("mu_zt", "mu_xy"):
            if key in doc and not isinstance(doc[key], (list, tuple)):
                doc[key] = [doc[key]]
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**doc)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("mu_zt", "mu_xy", "levels"):
            d[key] = list(d[key])
        return d

    def grid(self) -> list[tuple[Optional[float], Optional[float]]]:
        if self.model == "paper":
            return list(itertools.product(self.mu_zt, self.mu_xy))
        return [(None, None)]

    def spec_for(self, point) -> Optional[ModelSpec]:
        if self.model == "paper":
            return paper_model(*point)
        if self.model in ("appendix1", "appendix2"):
            return appendix_model()
        return None


@dataclass
class LevelResult:
    level: int
    metric: str
    value: Optional[float] = None
    error: Optional[str] = None


@dataclass
class RunRecord:
    mu_zt: Optional[float]
    mu_xy: Optional[float]
    seed: int
    run: int
    results: dict = field(default_factory=dict)
    estimates: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["results"] = {str(k): asdict(v) for k, v in self.results.items()}
        return d


def _grid_key(mu) -> int:
    return _NO_GRID if mu is None else int(round(mu * 1e6))


def derive_seed(base: int, point, run: int) -> int:
    """64-bit data seed for one run of one grid point (see module docstring)."""
    ss = np.random.SeedSequence(
        int(base), spawn_key=(_grid_key(point[0]), _grid_key(point[1]), int(run))
    )
    return int(ss.generate_state(1, np.uint64)[0])


def als_seed(data_seed: int) -> int:
    ss = np.random.SeedSequence(int(data_seed), spawn_key=(1,))
    return int(ss.generate_state(1, np.uint64)[0])


def _failure(exc: BaseException) -> str:
    return type(exc).__name__


def run_once(config: ExperimentConfig, point, seed: int, run: int = 0) -> RunRecord:
    """One replicate at one grid point: sample, estimate every level, score.

    ``config.n == 0`` uses exact population moments (and the exact joint
    tensor for level 2) instead of a sample. Estimator failures are captured
    per level as the exception class name; they never propagate.
    """
    start = time.perf_counter()
    rec = RunRecord(mu_zt=point[0], mu_xy=point[1], seed=int(seed), run=run)
    spec = config.spec_for(point)
    truth = exact_ground_truth(spec) if spec is not None else None
    exact = spec is not None and config.n == 0

    dataset = None
    if config.model == "csv":
        try:
            dataset = read_csv(config.path)
        except SpoError as exc:
            raise ConfigError(str(exc)) from exc
    elif not exact:
        dataset = sample(spec, config.n, seed)

    bundle = bundle_error = None
    if {3, 4} & set(config.levels):
        try:
            bundle = exact_bundle(spec, truth) if exact else estimate_bundle(dataset)
            arms = condition_diagnostic(bundle)
            rec.diagnostics["sigma_min"] = [a.sigma_min for a in arms]
            rec.diagnostics["condition"] = [a.condition for a in arms]
        except (SpoError, np.linalg.LinAlgError) as exc:
            bundle_error = _failure(exc)

    for level in config.levels:
        res = LevelResult(level, LEVEL_METRIC[level])
        try:
            if level in (3, 4) and bundle is None:
                res.error = bundle_error
            elif level == 4:
                est = ate(bundle)
                rec.estimates["ate"] = est
                if truth is not None:
                    res.value = ate_error(truth.ate, est)
            elif level == 3:
                mix, diag = recover_mte(bundle, config.k, method=config.method)
                rec.estimates["mte"] = mix.to_dict()
                if diag is not None:
                    rec.diagnostics["pencil"] = asdict(diag)
                if truth is not None:
                    res.value = mte_error(truth.mte, mix)
            elif level == 2:
                if exact:
                    tensor = joint_tensor_from_truth(truth)
                elif spec is not None:
                    tensor = joint_tensor(dataset, spec.z_encoding, spec.x_encoding)
                else:
                    tensor = joint_tensor(dataset)
                # non-convergence is recorded in the diagnostics below
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", ConvergenceFailure)
                    fac = cp_als(tensor, config.k, restarts=config.restarts, seed=als_seed(seed))
                rec.estimates["mixture"] = {
                    "weights": fac.weights.tolist(),
                    "f_z": fac.f_z.tolist(),
                    "f_x": fac.f_x.tolist(),
                    "f_s": fac.f_s.tolist(),
                }
                rec.diagnostics["als"] = {"residual": fac.residual, "converged": fac.converged}
                if truth is not None:
                    res.value = tv_distance(truth, fac)
        except (SpoError, np.linalg.LinAlgError) as exc:
            res.value = None
            res.error = _failure(exc)
        rec.results[level] = res
    rec.wall_time = time.perf_counter() - start
    return rec


@dataclass(frozen=True)
class SweepRow:
    mu_zt: Optional[float]
    mu_xy: Optional[float]
    level: int
    metric: str
    mean: float
    sd: float
    runs: int
    failures: int


@dataclass
class SweepResult:
    config: ExperimentConfig
    rows: list
    grand_mean: dict
    records: list

    def row(self, mu_zt, mu_xy, level) -> SweepRow:
        for r in self.rows:
            if r.mu_zt == mu_zt and r.mu_xy == mu_xy and r.level == level:
                return r
        raise KeyError((mu_zt, mu_xy, level))


def _job(args):
    config, point, seed, run = args
    return run_once(config, point, seed, run)


def aggregate(config: ExperimentConfig, records: list) -> tuple[list, dict]:
    rows = []
    for point in config.grid():
        recs = [r for r in records if (r.mu_zt, r.mu_xy) == point]
        for level in config.levels:
            vals = [r.results[level].value for r in recs]
            ok = np.array([v for v in vals if v is not None], dtype=float)
            failures = sum(r.results[level].error is not None for r in recs)
            mean = float(ok.mean()) if ok.size else math.nan
            sd = float(ok.std()) if ok.size else math.nan
            rows.append(
                SweepRow(point[0], point[1], level, LEVEL_METRIC[level], mean, sd, len(recs), failures)
            )
    grand = {}
    for level in config.levels:
        means = [r.mean for r in rows if r.level == level and not math.isnan(r.mean)]
        grand[LEVEL_METRIC[level]] = float(np.mean(means)) if means else math.nan
    return rows, grand


def sweep(config: ExperimentConfig) -> SweepResult:
    """Run every grid point ``config.runs`` times and aggregate per level.

    Standard deviations are population (ddof=0) over the successful runs, so
    a single run reports sd = 0. Failed runs are counted, not averaged.
    Results come back in grid-then-run order whatever the worker count.
    """
    jobs = [
        (config, point, derive_seed(config.seed, point, run), run)
        for point in config.grid()
        for run in range(config.runs)
    ]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(_job, jobs, chunksize=max(1, len(jobs) // (4 * config.workers))))
    else:
        records = [_job(j) for j in jobs]
    rows, grand = aggregate(config, records)
    return SweepResult(config=config, rows=rows, grand_mean=grand, records=records)


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def emit(result: SweepResult, outdir=None) -> tuple[Path, Path]:
    """Write ``sweep.csv`` (long format) and ``sweep.json`` into ``outdir``."""
    if not result.rows:
        raise ConfigError("nothing to emit: empty sweep table")
    out = Path(outdir if outdir is not None else result.config.output)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = out / "sweep.csv", out / "sweep.json"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in result.rows:
            w.writerow([_cell(getattr(r, h)) for h in CSV_HEADER])
    doc = {
        "version": __version__,
        "config": result.config.to_dict(),
        "seeds": [rec.seed for rec in result.records],
        "rows": [asdict(r) for r in result.rows],
        "grand_mean": result.grand_mean,
        "records": [rec.to_dict() for rec in result.records],
    }
    with open(json_path, "w") as fh:
        json.dump(doc, fh, indent=1, allow_nan=True)
    return csv_path, json_path


def load_rows(json_path) -> list:
    with open(json_path) as fh:
        doc = json.load(fh)
    return [SweepRow(**r) for r in doc["rows"]]
