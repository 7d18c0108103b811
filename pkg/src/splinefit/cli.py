"""Command-line entry point: ``splinefit {generate|fit|sweep|compare}``.

Exit codes: 0 success, 1 I/O or numerical failure, 2 usage error,
3 divergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from dataclasses import dataclass

import numpy as np

from splinefit import files
from splinefit.basis import KnotVector, ParamGrid, TensorBasis, collocation_matrix
from splinefit.errors import DivergenceError, RankDeficientError
from splinefit.fitting import FitReport, make_problem, run_fit, subsample_net, zero_net
from splinefit.harness import (
    DEFAULT_SAMPLES,
    NoiseSpec,
    SweepSpec,
    add_noise,
    export_sweep_csv,
    export_trace_csv,
    generate_synthetic,
    run_sweep,
)
from splinefit.oracle import cholesky, schoenberg_whitney_check

EXIT_OK, EXIT_FAILURE, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class ProblemError(Exception):
    """Input data and configuration do not define a well-posed fit."""


@dataclass
class Problem:
    data: np.ndarray
    grid: ParamGrid
    kv_u: KnotVector
    kv_v: KnotVector
    initial_net: np.ndarray


def _err(msg: str) -> None:
    print(f"splinefit: {msg}", file=sys.stderr)


def _load_config(path, args) -> files.RunConfig:
    try:
        cfg = files.load_run_config(path) if path else files.RunConfig()
    except ValueError as exc:  # includes malformed JSON
        raise UsageError(f"{path}: {exc}") from exc
    overrides = {}
    if getattr(args, "method", None) is not None:
        overrides["method"] = args.method
    if getattr(args, "mu", None) is not None:
        overrides["mu"] = args.mu
    if getattr(args, "epsilon", None) is not None:
        overrides["epsilon"] = args.epsilon
    if getattr(args, "tol", None) is not None:
        overrides["tolerance"] = args.tol
    if getattr(args, "max_iters", None) is not None:
        overrides["max_iterations"] = args.max_iters
    if getattr(args, "degree", None):
        du, dv = (args.degree * 2)[:2]
        overrides.update(degree_u=du, degree_v=dv)
    if getattr(args, "ctrl", None):
        cr, cc = (args.ctrl * 2)[:2]
        overrides.update(ctrl_rows=cr, ctrl_cols=cc)
    try:
        if getattr(args, "sigma", None) is not None:
            overrides["noise"] = NoiseSpec(args.sigma, args.seed if args.seed is not None else 0)
        return dataclasses.replace(cfg, **overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _gram_definite(kv: KnotVector, params) -> bool:
    B = collocation_matrix(kv, params).toarray()
    try:
        cholesky(B.T @ B)
    except RankDeficientError:
        return False
    return True


def prepare_problem(data, cfg: files.RunConfig) -> Problem:
    """Noise, uniform parameters, averaging knots, well-posedness checks and the initial net."""
    if cfg.noise is not None:
        data = add_noise(data, cfg.noise)
    rows, cols = data.shape[:2]
    if cfg.ctrl_rows > rows or cfg.ctrl_cols > cols:
        raise ProblemError(
            f"dimension check failed: {cfg.ctrl_rows}x{cfg.ctrl_cols} controls exceed {rows}x{cols} data points"
        )
    if rows < 2 or cols < 2:
        raise ProblemError(f"dimension check failed: data grid {rows}x{cols} needs at least 2x2 points")
    try:
        grid, kv_u, kv_v = make_problem((rows, cols), (cfg.ctrl_rows, cfg.ctrl_cols), cfg.degree_u, cfg.degree_v)
    except ValueError as exc:
        raise ProblemError(f"knot construction failed: {exc}") from exc
    sw = schoenberg_whitney_check(kv_u, kv_v, grid)
    if not sw:
        raise ProblemError("rank check failed: schoenberg_whitney_check=false")
    # The Gram matrix is a Kronecker product, definite iff both factors are.
    if not (_gram_definite(kv_u, grid.u) and _gram_definite(kv_v, grid.v)):
        raise ProblemError("rank check failed: Gram matrix not positive definite (schoenberg_whitney_check=true)")
    if cfg.init == "subsample":
        net = subsample_net(data, cfg.ctrl_rows, cfg.ctrl_cols)
    else:
        net = zero_net(cfg.ctrl_rows, cfg.ctrl_cols, data.shape[2])
    return Problem(data, grid, kv_u, kv_v, net)


def _fit(problem: Problem, cfg: files.RunConfig) -> tuple[FitReport, bool]:
    try:
        fit_cfg = cfg.fit_config()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    try:
        return run_fit(problem.data, problem.grid, problem.kv_u, problem.kv_v, problem.initial_net, fit_cfg), False
    except DivergenceError as exc:
        _err(str(exc))
        return exc.report, True


def cmd_generate(args) -> int:
    try:
        data = generate_synthetic(args.name, args.rows, args.cols)
        noise = NoiseSpec(args.sigma, args.seed if args.seed is not None else 0) if args.sigma is not None else None
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if noise is not None:
        data = add_noise(data, noise)
    files.write_grid(data, args.out)
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = _load_config(args.config, args)
    if cfg.mu is None:
        raise UsageError("mu is required (set it in the config or pass --mu)")
    problem = prepare_problem(files.read_grid(args.data), cfg)
    report, diverged = _fit(problem, cfg)
    files.write_json(files.report_to_dict(report), args.report)
    export_trace_csv(report, args.trace)
    if args.net_out:
        files.write_grid(report.final_net, args.net_out)
    if args.obj_out:
        surface = TensorBasis(problem.kv_u, problem.kv_v, problem.grid).evaluate(report.final_net)
        files.write_obj(surface, args.obj_out)
    return EXIT_DIVERGED if diverged else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config, args)
    try:
        spec = SweepSpec.default(
            cfg.method,
            sample_count=args.weights_count,
            epsilon=cfg.epsilon,
            tolerance=cfg.tolerance,
            max_iterations=cfg.max_iterations,
        )
        if args.weights_min is not None or args.weights_max is not None:
            spec = dataclasses.replace(
                spec,
                weight_min=spec.weight_min if args.weights_min is None else args.weights_min,
                weight_max=spec.weight_max if args.weights_max is None else args.weights_max,
            )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    problem = prepare_problem(files.read_grid(args.data), cfg)
    result = run_sweep(
        problem.data, problem.grid, problem.kv_u, problem.kv_v, problem.initial_net, spec, jobs=args.jobs
    )
    export_sweep_csv(result, args.out)
    summary = files.sweep_summary_dict(result)
    summary = {"method": spec.method.value, "weight_min": spec.weight_min, "weight_max": spec.weight_max, **summary}
    files.write_json(summary, args.summary)
    return EXIT_OK


def _trace_dict(report: FitReport) -> dict:
    d = files.report_to_dict(report)
    d.pop("final_net")
    return d


def cmd_compare(args) -> int:
    cfg_a = _load_config(args.config_a, args)
    cfg_b = _load_config(args.config_b, args)
    for cfg in (cfg_a, cfg_b):
        if cfg.mu is None:
            raise UsageError("mu is required in both configs")
    data = files.read_grid(args.data)
    prob_a = prepare_problem(data, cfg_a)
    prob_b = prepare_problem(data, cfg_b)
    rep_a, div_a = _fit(prob_a, cfg_a)
    rep_b, div_b = _fit(prob_b, cfg_b)
    files.write_json(
        {
            "a": {"config": files.run_config_to_dict(cfg_a), **_trace_dict(rep_a)},
            "b": {"config": files.run_config_to_dict(cfg_b), **_trace_dict(rep_b)},
        },
        args.out,
    )
    return EXIT_DIVERGED if (div_a or div_b) else EXIT_OK


def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", help="LSPIA or AdagradLSPIA")
    p.add_argument("--mu", type=float, help="global weight")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--tol", type=float, help="stopping tolerance on consecutive errors")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--degree", type=int, nargs="+", metavar="D", help="degree (one value or u v)")
    p.add_argument("--ctrl", type=int, nargs="+", metavar="N", help="control net size (one value or rows cols)")
    p.add_argument("--sigma", type=float, help="add seeded Gaussian noise before fitting")
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splinefit", description="B-spline surface fitting with LSPIA / AdagradLSPIA")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic data grid")
    p.add_argument("name", help="plane, peaks or ridge")
    p.add_argument("rows", type=int)
    p.add_argument("cols", type=int)
    p.add_argument("out")
    p.add_argument("--sigma", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit", help="fit one surface")
    p.add_argument("data")
    p.add_argument("config", nargs="?", help="run config JSON (optional)")
    p.add_argument("--report", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--net-out")
    p.add_argument("--obj-out")
    _add_fit_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sweep", help="sweep the global weight")
    p.add_argument("data")
    p.add_argument("config", nargs="?")
    p.add_argument("--out", required=True, help="per-weight CSV")
    p.add_argument("--summary", required=True, help="argmin summary JSON")
    p.add_argument("--weights-min", type=float)
    p.add_argument("--weights-max", type=float)
    p.add_argument("--weights-count", type=int, default=DEFAULT_SAMPLES)
    p.add_argument("--jobs", type=int, default=1)
    _add_fit_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="run two configs on the same data")
    p.add_argument("data")
    p.add_argument("config_a")
    p.add_argument("config_b")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        _err(f"error: {exc}")
        return EXIT_USAGE
    except ProblemError as exc:
        _err(str(exc))
        return EXIT_FAILURE
    except OSError as exc:
        _err(f"I/O error: {exc}")
        return EXIT_FAILURE
    except (ValueError, ArithmeticError) as exc:
        _err(f"numerical failure: {exc}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
