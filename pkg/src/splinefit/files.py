"""Readers and writers for grid files, OBJ meshes, run configs and JSON reports.

Grid file layout::

    rows cols dim
    x y z          # rows*cols lines, row-major
    ...
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from splinefit.basis import FloatArray
from splinefit.fitting import FitConfig, FitReport, Method
from splinefit.harness import NoiseSpec, SweepResult


def _num(x: float) -> str:
    return format(float(x), ".17g")


def write_grid(points, path) -> None:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 3:
        raise ValueError(f"grid must have shape (rows, cols, dim), got {points.shape}")
    rows, cols, dim = points.shape
    lines = [f"{rows} {cols} {dim}"]
    lines.extend(" ".join(_num(c) for c in p) for p in points.reshape(-1, dim))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_grid(path) -> FloatArray:
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty grid file")
    try:
        rows, cols, dim = (int(t) for t in lines[0].split())
    except ValueError:
        raise ValueError(f"{path}: header must be 'rows cols dim'") from None
    if rows < 1 or cols < 1 or dim < 1:
        raise ValueError(f"{path}: header values must be positive")
    body = lines[1:]
    if len(body) != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} points, found {len(body)}")
    out = np.empty((rows * cols, dim))
    for k, line in enumerate(body):
        parts = line.split()
        if len(parts) != dim:
            raise ValueError(f"{path}: line {k + 2} has {len(parts)} values, expected {dim}")
        out[k] = [float(t) for t in parts]
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{path}: non-finite coordinate")
    return out.reshape(rows, cols, dim)


def write_obj(points, path) -> None:
    """Triangulated mesh of a sampled surface grid; 2-D points get ``z = 0``."""
    points = np.asarray(points, dtype=np.float64)
    rows, cols, dim = points.shape
    if dim > 3:
        raise ValueError("OBJ export supports at most 3 coordinates")
    verts = np.zeros((rows * cols, 3))
    verts[:, :dim] = points.reshape(-1, dim)
    lines = [f"v {_num(x)} {_num(y)} {_num(z)}" for x, y, z in verts]
    for r in range(rows - 1):
        for c in range(cols - 1):
            a = r * cols + c + 1  # OBJ indices are 1-based
            b, d, e = a + 1, a + cols, a + cols + 1
            lines.append(f"f {a} {b} {e}")
            lines.append(f"f {a} {e} {d}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def report_to_dict(report: FitReport) -> dict:
    return {
        "method": report.method,
        "mu": report.mu,
        "converged": report.converged,
        "diverged": report.diverged,
        "iterations": report.iterations,
        "final_error": report.final_error,
        "error_history": list(report.error_history),
        "wall_time_seconds": report.wall_time_seconds,
        "time_history": list(report.time_history),
        "final_net": np.asarray(report.final_net).tolist(),
    }


def report_from_dict(d: dict) -> FitReport:
    return FitReport(
        converged=d["converged"],
        iterations=d["iterations"],
        final_error=d["final_error"],
        error_history=list(d["error_history"]),
        wall_time_seconds=d["wall_time_seconds"],
        final_net=np.asarray(d["final_net"], dtype=np.float64),
        time_history=list(d.get("time_history", [])),
        diverged=d.get("diverged", False),
        method=d.get("method", ""),
        mu=d.get("mu", float("nan")),
    )


def sweep_summary_dict(result: SweepResult) -> dict:
    def entry(rec):
        if rec is None:
            return None
        return {
            "weight": rec.weight,
            "error": rec.final_error,
            "seconds": rec.wall_time_seconds,
            "iterations": rec.iterations,
        }

    return {
        "samples": len(result.records),
        "converged": sum(r.converged for r in result.records),
        "empty_summaries": result.empty_summaries,
        "minimal_error": entry(result.best_error),
        "minimal_time": entry(result.best_time),
        "minimal_iterations": entry(result.best_iterations),
    }


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


@dataclass(frozen=True)
class RunConfig:
    """Contents of a run configuration file (JSON, camelCase keys)."""

    method: Method = Method.ADAGRAD
    mu: float | None = None
    epsilon: float = 1e-8
    tolerance: float = 1e-7
    max_iterations: int = 1000
    degree_u: int = 3
    degree_v: int = 3
    ctrl_rows: int = 25
    ctrl_cols: int = 25
    init: str = "zero"
    noise: NoiseSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "method", Method.parse(self.method))
        if self.init not in ("zero", "subsample"):
            raise ValueError(f"init must be 'zero' or 'subsample', got {self.init!r}")
        for name in ("degree_u", "degree_v"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise ValueError(f"{name} must be a nonnegative integer, got {v!r}")
        for name in ("ctrl_rows", "ctrl_cols"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        # FitConfig enforces the remaining invariants; mu may still be supplied later
        FitConfig(self.method, 1.0 if self.mu is None else self.mu, self.epsilon, self.tolerance, self.max_iterations)

    def fit_config(self) -> FitConfig:
        if self.mu is None:
            raise ValueError("mu is required (set it in the config or pass --mu)")
        return FitConfig(self.method, self.mu, self.epsilon, self.tolerance, self.max_iterations)


_KEYS = {
    "method": "method",
    "mu": "mu",
    "epsilon": "epsilon",
    "tolerance": "tolerance",
    "maxIterations": "max_iterations",
    "degreeU": "degree_u",
    "degreeV": "degree_v",
    "ctrlRows": "ctrl_rows",
    "ctrlCols": "ctrl_cols",
    "init": "init",
    "noise": "noise",
}


def run_config_from_dict(d: dict) -> RunConfig:
    if not isinstance(d, dict):
        raise ValueError("run config must be a JSON object")
    unknown = sorted(set(d) - set(_KEYS))
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    kwargs = {_KEYS[k]: v for k, v in d.items()}
    noise = kwargs.get("noise")
    if noise is not None:
        if not isinstance(noise, dict) or set(noise) - {"sigma", "seed"} or "sigma" not in noise:
            raise ValueError("noise must be an object with 'sigma' and optional 'seed'")
        kwargs["noise"] = NoiseSpec(float(noise["sigma"]), int(noise.get("seed", 0)))
    for name in ("mu", "epsilon", "tolerance"):
        if name in kwargs and kwargs[name] is not None and not isinstance(kwargs[name], (int, float)):
            raise ValueError(f"{name} must be a number")
    return RunConfig(**kwargs)


def run_config_to_dict(cfg: RunConfig) -> dict:
    out = {}
    for key, attr in _KEYS.items():
        value = getattr(cfg, attr)
        if attr == "method":
            value = value.value
        elif attr == "noise":
            value = None if value is None else {"sigma": value.sigma, "seed": value.seed}
        if value is not None:
            out[key] = value
    return out


def load_run_config(path) -> RunConfig:
    return run_config_from_dict(read_json(path))

