"""Synthetic data, seeded noise and global-weight sweeps."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from splinefit.basis import FloatArray, KnotVector, ParamGrid, uniform_params
from splinefit.errors import DivergenceError
from splinefit.fitting import FitConfig, FitReport, Method, run_fit

# (center_x, center_y, amplitude, width) of the Gaussian bumps in "peaks"
PEAKS = (
    (0.30, 0.30, 1.00, 0.10),
    (0.70, 0.40, -0.60, 0.15),
    (0.45, 0.75, 0.80, 0.12),
)
# "ridge": gentle base plus a tanh step along a wavy curve
RIDGE_BASE = 0.15
RIDGE_STEP = 0.20
RIDGE_WIDTH = 0.10

DEFAULT_RANGES = {Method.LSPIA: (0.0, 0.02), Method.ADAGRAD: (0.0, 20.0)}
DEFAULT_SAMPLES = 200


def plane(x, y):
    return x + y


def peaks(x, y):
    z = np.zeros(np.broadcast(x, y).shape)
    for cx, cy, amp, width in PEAKS:
        z += amp * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2.0 * width**2))
    return z


def ridge(x, y):
    base = RIDGE_BASE * np.sin(np.pi * x) * np.cos(0.5 * np.pi * y)
    front = 0.55 + 0.1 * np.sin(2.0 * np.pi * x)
    return base + RIDGE_STEP * np.tanh((y - front) / RIDGE_WIDTH)


GENERATORS = {"plane": plane, "peaks": peaks, "ridge": ridge}


def generate_synthetic(name: str, rows: int, cols: int) -> FloatArray:
    """Points ``(x, y, f(x, y))`` on a uniform rows x cols grid over the unit square.

    ``x`` runs along the rows (first axis) and ``y`` along the columns.
    """
    try:
        func = GENERATORS[name]
    except KeyError:
        raise ValueError(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}") from None
    x, y = np.meshgrid(uniform_params(rows), uniform_params(cols), indexing="ij")
    return np.stack([x, y, func(x, y)], axis=-1)


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise ValueError(f"sigma must be a nonnegative finite number, got {self.sigma!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")


def gaussian_draws(count: int, seed: int) -> FloatArray:
    """Standard normal draws: Philox uniforms pushed through Box-Muller."""
    rng = np.random.Generator(np.random.Philox(int(seed)))
    pairs = (count + 1) // 2
    u1 = 1.0 - rng.random(pairs)  # (0, 1], keeps the log finite
    u2 = rng.random(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    out = np.empty(2 * pairs)
    out[0::2] = radius * np.cos(2.0 * np.pi * u2)
    out[1::2] = radius * np.sin(2.0 * np.pi * u2)
    return out[:count]


def add_noise(data, spec: NoiseSpec) -> FloatArray:
    data = np.array(data, dtype=np.float64)
    if spec.sigma == 0:
        return data
    return data + spec.sigma * gaussian_draws(data.size, spec.seed).reshape(data.shape)


@dataclass(frozen=True)
class SweepSpec:
    method: Method
    weight_min: float
    weight_max: float
    sample_count: int = DEFAULT_SAMPLES
    epsilon: float = 1e-8
    tolerance: float = 1e-7
    max_iterations: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "method", Method.parse(self.method))
        if not 0 <= self.weight_min < self.weight_max:
            raise ValueError(f"need 0 <= weight_min < weight_max, got ({self.weight_min}, {self.weight_max}]")
        if int(self.sample_count) != self.sample_count or self.sample_count < 1:
            raise ValueError(f"sample_count must be a positive integer, got {self.sample_count!r}")

    @classmethod
    def default(cls, method, **kwargs) -> SweepSpec:
        method = Method.parse(method)
        lo, hi = DEFAULT_RANGES[method]
        return cls(method, lo, hi, **kwargs)

    def weights(self) -> FloatArray:
        """Uniform samples over ``(weight_min, weight_max]``."""
        k = np.arange(1, self.sample_count + 1)
        return self.weight_min + (self.weight_max - self.weight_min) * k / self.sample_count

    def config(self, weight: float) -> FitConfig:
        return FitConfig(self.method, float(weight), self.epsilon, self.tolerance, self.max_iterations)


@dataclass(frozen=True)
class SweepRecord:
    weight: float
    final_error: float
    wall_time_seconds: float
    iterations: int
    converged: bool
    diverged: bool = False


@dataclass(frozen=True)
class SweepResult:
    records: tuple[SweepRecord, ...]
    best_error: SweepRecord | None
    best_time: SweepRecord | None
    best_iterations: SweepRecord | None

    @property
    def empty_summaries(self) -> bool:
        return self.best_error is None


def summarize(records) -> SweepResult:
    """Sort records by weight and pick the argmins over converged runs (ties go to the smaller weight)."""
    records = tuple(sorted(records, key=lambda r: r.weight))
    good = [r for r in records if r.converged]
    if not good:
        return SweepResult(records, None, None, None)
    return SweepResult(
        records,
        best_error=min(good, key=lambda r: (r.final_error, r.weight)),
        best_time=min(good, key=lambda r: (r.wall_time_seconds, r.weight)),
        best_iterations=min(good, key=lambda r: (r.iterations, r.weight)),
    )


def record_from_report(weight: float, report: FitReport) -> SweepRecord:
    return SweepRecord(
        weight=float(weight),
        final_error=report.final_error,
        wall_time_seconds=report.wall_time_seconds,
        iterations=report.iterations,
        converged=report.converged,
        diverged=report.diverged,
    )


def _fit_one(args) -> SweepRecord:
    data, grid, kv_u, kv_v, net, config = args
    try:
        report = run_fit(data, grid, kv_u, kv_v, net, config)
    except DivergenceError as exc:
        report = exc.report
    return record_from_report(config.mu, report)


def run_sweep(
    data,
    grid: ParamGrid,
    kv_u: KnotVector,
    kv_v: KnotVector,
    initial_net,
    spec: SweepSpec,
    jobs: int = 1,
) -> SweepResult:
    """One fit per sampled weight. Diverged runs are kept as non-converged records."""
    tasks = [(data, grid, kv_u, kv_v, initial_net, spec.config(w)) for w in spec.weights()]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_fit_one, tasks))
    else:
        records = [_fit_one(t) for t in tasks]
    return summarize(records)


TRACE_HEADER = ("iteration", "error", "cumulative_seconds")
SWEEP_HEADER = ("weight", "error", "seconds", "iterations", "converged")


def _fmt(x: float) -> str:
    return f"{x:.16e}"


def _write_rows(path, header, rows) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def export_trace_csv(report: FitReport, path) -> None:
    times = report.time_history or [float("nan")] * len(report.error_history)
    rows = [(k, _fmt(e), _fmt(t)) for k, (e, t) in enumerate(zip(report.error_history, times))]
    _write_rows(path, TRACE_HEADER, rows)


def export_sweep_csv(result: SweepResult, path) -> None:
    rows = [
        (_fmt(r.weight), _fmt(r.final_error), _fmt(r.wall_time_seconds), r.iterations, str(r.converged).lower())
        for r in result.records
    ]
    _write_rows(path, SWEEP_HEADER, rows)


def read_trace_csv(path) -> list[tuple[int, float, float]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        if tuple(next(reader)) != TRACE_HEADER:
            raise ValueError(f"{path}: not a trace CSV")
        return [(int(k), float(e), float(t)) for k, e, t in reader]


def read_sweep_csv(path) -> list[SweepRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        if tuple(next(reader)) != SWEEP_HEADER:
            raise ValueError(f"{path}: not a sweep CSV")
        return [
            SweepRecord(float(w), float(e), float(s), int(it), conv == "true")
            for w, e, s, it, conv in reader
        ]
