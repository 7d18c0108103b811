"""Least squares surface fitting by progressive iterative approximation.

Two steppers share one loop: plain LSPIA moves every control point by a
fixed fraction ``mu`` of its adjusting vector, while the Adagrad variant
scales each control point's step by ``mu / sqrt(eps + v_i)``, where
``v_i`` accumulates the squared norms of that point's past adjusting
vectors.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from splinefit.basis import FloatArray, KnotVector, ParamGrid, TensorBasis, averaging_knots, stride_indices
from splinefit.errors import DivergenceError

DIVERGENCE_FACTOR = 1e12


class Method(str, enum.Enum):
    LSPIA = "LSPIA"
    ADAGRAD = "AdagradLSPIA"

    @classmethod
    def parse(cls, name) -> Method:
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower()
        aliases = {"lspia": cls.LSPIA, "adagradlspia": cls.ADAGRAD, "adagrad": cls.ADAGRAD}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown method {name!r}; expected LSPIA or AdagradLSPIA") from None


@dataclass(frozen=True)
class FitConfig:
    method: Method = Method.ADAGRAD
    mu: float = 1.0
    epsilon: float = 1e-8
    tolerance: float = 1e-7
    max_iterations: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "method", Method.parse(self.method))
        for name in ("mu", "epsilon", "tolerance"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
            object.__setattr__(self, name, float(value))
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError(f"max_iterations must be an integer >= 1, got {self.max_iterations!r}")
        object.__setattr__(self, "max_iterations", int(self.max_iterations))


@dataclass(frozen=True)
class FitState:
    """Snapshot of the iteration: control net ``p^(k)`` and accumulators ``v^(k)``.

    Error bookkeeping lives in :class:`FitReport`; steppers never need it.
    """

    net: FloatArray
    accumulators: FloatArray
    iteration: int = 0

    @classmethod
    def initial(cls, net) -> FitState:
        net = np.array(net, dtype=np.float64)
        return cls(net, np.zeros(net.shape[:2]), 0)


@dataclass
class FitReport:
    converged: bool
    iterations: int
    final_error: float
    error_history: list[float]
    wall_time_seconds: float
    final_net: FloatArray
    time_history: list[float] = field(default_factory=list)
    diverged: bool = False
    method: str = ""
    mu: float = float("nan")


def _check_data(data, basis: TensorBasis) -> FloatArray:
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 3 or data.shape[:2] != basis.data_shape:
        raise ValueError(f"data shape {data.shape} does not match parameter grid {basis.data_shape}")
    return data


def residuals(data, net, kv_u: KnotVector, kv_v: KnotVector, grid: ParamGrid) -> FloatArray:
    """Difference vectors ``q_j - c(t_j)`` on the data grid."""
    basis = TensorBasis(kv_u, kv_v, grid)
    data = _check_data(data, basis)
    surface = basis.evaluate(net)
    if surface.shape[2] != data.shape[2]:
        raise ValueError(f"net dimension {surface.shape[2]} != data dimension {data.shape[2]}")
    return data - surface


def fitting_error(data, net, kv_u: KnotVector, kv_v: KnotVector, grid: ParamGrid) -> float:
    """Sum of squared distances between data and surface (no 1/2 factor)."""
    r = residuals(data, net, kv_u, kv_v, grid)
    return float(np.einsum("ijk,ijk->", r, r))


def objective(data, net, kv_u: KnotVector, kv_v: KnotVector, grid: ParamGrid) -> float:
    """Least squares objective ``E(p)``, half the fitting error; its gradient is the adjusting field."""
    return 0.5 * fitting_error(data, net, kv_u, kv_v, grid)


def adjusting_vectors(resid, kv_u: KnotVector, kv_v: KnotVector, grid: ParamGrid) -> FloatArray:
    """Adjusting vectors ``-sum_j B_i(t_j) delta_j`` for every control index ``i``."""
    return -TensorBasis(kv_u, kv_v, grid).adjoint(resid)


def _check_field(state: FitState, fld) -> FloatArray:
    fld = np.asarray(fld, dtype=np.float64)
    if fld.shape != state.net.shape:
        raise ValueError(f"adjusting field shape {fld.shape} does not match net {state.net.shape}")
    return fld


def lspia_step(state: FitState, fld, mu: float) -> FitState:
    fld = _check_field(state, fld)
    return replace(state, net=state.net - mu * fld, iteration=state.iteration + 1)


def adaptive_weights(accumulators, mu: float, epsilon: float) -> FloatArray:
    return mu / np.sqrt(epsilon + np.asarray(accumulators))


def adagrad_step(state: FitState, fld, mu: float, epsilon: float) -> FitState:
    """One AdagradLSPIA update.

    The accumulator is updated first, so the weight applied at this step
    already includes the current adjusting vector.
    """
    fld = _check_field(state, fld)
    acc = state.accumulators + np.einsum("ijk,ijk->ij", fld, fld)
    weights = adaptive_weights(acc, mu, epsilon)
    net = state.net - weights[:, :, None] * fld
    return replace(state, net=net, accumulators=acc, iteration=state.iteration + 1)


def zero_net(rows: int, cols: int, dim: int) -> FloatArray:
    return np.zeros((rows, cols, dim))


def subsample_net(data, rows: int, cols: int) -> FloatArray:
    """Initial net made of data points picked with a uniform stride."""
    data = np.asarray(data, dtype=np.float64)
    iu = stride_indices(data.shape[0], rows)
    iv = stride_indices(data.shape[1], cols)
    return data[np.ix_(iu, iv)].copy()


def make_problem(
    data_shape: tuple[int, int],
    ctrl_shape: tuple[int, int],
    degree_u: int = 3,
    degree_v: int = 3,
) -> tuple[ParamGrid, KnotVector, KnotVector]:
    """Uniform parameters and averaging knots for a rows x cols data grid."""
    grid = ParamGrid.uniform(*data_shape)
    kv_u = averaging_knots(grid.u, degree_u, ctrl_shape[0])
    kv_v = averaging_knots(grid.v, degree_v, ctrl_shape[1])
    return grid, kv_u, kv_v


def run_fit(
    data,
    grid: ParamGrid,
    kv_u: KnotVector,
    kv_v: KnotVector,
    initial_net,
    config: FitConfig,
) -> FitReport:
    """Iterate until consecutive fitting errors differ by less than the tolerance.

    Each iteration computes residuals, adjusting vectors, one step of the
    configured method and the new fitting error. Entry 0 of the error
    history is the initial error. Raises :class:`DivergenceError` if the
    error becomes non-finite or exceeds ``1e12`` times its initial value.
    """
    t0 = time.perf_counter()
    basis = TensorBasis(kv_u, kv_v, grid)
    data = _check_data(data, basis)
    net = np.array(initial_net, dtype=np.float64)
    if net.ndim != 3 or net.shape[:2] != basis.net_shape or net.shape[2] != data.shape[2]:
        raise ValueError(
            f"initial net shape {net.shape} incompatible with {basis.net_shape} controls "
            f"of dimension {data.shape[2]}"
        )
    if config.method is Method.LSPIA:
        def step(s, f):
            return lspia_step(s, f, config.mu)
    else:
        def step(s, f):
            return adagrad_step(s, f, config.mu, config.epsilon)

    r = data - basis.evaluate(net)
    err = float(np.einsum("ijk,ijk->", r, r))
    history = [err]
    times = [time.perf_counter() - t0]
    state = FitState.initial(net)
    last_good = state
    initial = err
    converged = False

    while state.iteration < config.max_iterations:
        state = step(state, -basis.adjoint(r))
        r = data - basis.evaluate(state.net)
        new_err = float(np.einsum("ijk,ijk->", r, r))
        history.append(new_err)
        times.append(time.perf_counter() - t0)

        blown = initial > 0 and new_err > DIVERGENCE_FACTOR * initial
        if not math.isfinite(new_err) or blown:
            if math.isfinite(new_err):
                last_good = state
            else:
                history.pop()
                times.pop()
            report = FitReport(
                converged=False,
                iterations=last_good.iteration,
                final_error=history[-1],
                error_history=history,
                wall_time_seconds=times[-1],
                final_net=last_good.net,
                time_history=times,
                diverged=True,
                method=config.method.value,
                mu=config.mu,
            )
            raise DivergenceError(
                f"{config.method.value} diverged at iteration {state.iteration} (mu={config.mu:g})",
                report,
            )
        last_good = state
        if abs(err - new_err) < config.tolerance:
            converged = True
            break
        err = new_err

    return FitReport(
        converged=converged,
        iterations=state.iteration,
        final_error=history[-1],
        error_history=history,
        wall_time_seconds=time.perf_counter() - t0,
        final_net=state.net,
        time_history=times,
        method=config.method.value,
        mu=config.mu,
    )
