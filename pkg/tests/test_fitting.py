import math

import numpy as np
import pytest

from conftest import random_instance, smooth_surface
from splinefit.basis import KnotVector, ParamGrid, basis_row
from splinefit.errors import DivergenceError
from splinefit.fitting import (
    FitConfig,
    FitState,
    Method,
    adagrad_step,
    adaptive_weights,
    adjusting_vectors,
    fitting_error,
    lspia_step,
    make_problem,
    objective,
    residuals,
    run_fit,
    subsample_net,
    zero_net,
)
from splinefit.oracle import assemble_dense, gram_spectrum, normal_solve

BILINEAR = KnotVector(1, [0, 0, 1, 1])
# one control, one data point, B == 1
TOY_KV = KnotVector(0, [0, 1])
TOY_GRID = ParamGrid([0.0], [0.0])
TOY_DATA = np.array([[[5.0]]])


def dense_gradient(data, net, ku, kv, grid):
    A = assemble_dense(ku, kv, grid).matrix
    p = net.reshape(-1, net.shape[2])
    q = data.reshape(-1, data.shape[2])
    return (A.T @ (A @ p - q)).reshape(net.shape)


# --- error and residuals ---------------------------------------------------


def test_fitting_error_direct_sum():
    grid = ParamGrid.uniform(2, 2)
    data = np.broadcast_to([3.0, 4.0, 0.0], (2, 2, 3))
    assert fitting_error(data, np.zeros((2, 2, 3)), BILINEAR, BILINEAR, grid) == pytest.approx(100.0, abs=1e-12)
    assert objective(data, np.zeros((2, 2, 3)), BILINEAR, BILINEAR, grid) == pytest.approx(50.0, abs=1e-12)


def test_fitting_error_zero_when_interpolating():
    grid = ParamGrid.uniform(2, 2)
    net = np.random.default_rng(1).normal(size=(2, 2, 3))
    assert fitting_error(net, net, BILINEAR, BILINEAR, grid) == 0.0
    np.testing.assert_array_equal(residuals(net, net, BILINEAR, BILINEAR, grid), 0.0)


def test_residuals_zero_net_is_data(rng):
    data, _, grid, ku, kv = random_instance(rng, 7, 6, 4, 4, 2)
    np.testing.assert_array_equal(residuals(data, np.zeros((4, 4, 3)), ku, kv, grid), data)


def test_residuals_bilinear_oracle(rng):
    grid = ParamGrid.uniform(3, 3)
    net = rng.normal(size=(2, 2, 3))
    data = rng.normal(size=(3, 3, 3))
    r = residuals(data, net, BILINEAR, BILINEAR, grid)
    for a, u in enumerate(grid.u):
        for b, v in enumerate(grid.v):
            c = (1 - u) * (1 - v) * net[0, 0] + (1 - u) * v * net[0, 1] + u * (1 - v) * net[1, 0] + u * v * net[1, 1]
            np.testing.assert_allclose(r[a, b], data[a, b] - c, atol=1e-14)
    assert fitting_error(data, net, BILINEAR, BILINEAR, grid) == pytest.approx(float((r**2).sum()), rel=1e-14)


def test_residuals_shape_mismatch():
    grid = ParamGrid.uniform(3, 3)
    with pytest.raises(ValueError):
        residuals(np.zeros((3, 4, 3)), np.zeros((2, 2, 3)), BILINEAR, BILINEAR, grid)
    with pytest.raises(ValueError):
        residuals(np.zeros((3, 3, 3)), np.zeros((3, 2, 3)), BILINEAR, BILINEAR, grid)


# --- adjusting vectors -----------------------------------------------------


def test_adjusting_vectors_zero(rng):
    _, _, grid, ku, kv = random_instance(rng, 6, 6, 4, 4, 2)
    np.testing.assert_array_equal(adjusting_vectors(np.zeros((6, 6, 3)), ku, kv, grid), 0.0)


def test_adjusting_vectors_single_residual():
    grid, ku, kv = make_problem((9, 9), (6, 6), 3, 3)
    r = np.zeros((9, 9, 3))
    delta = np.array([1.0, -2.0, 0.5])
    a, b = 4, 3  # interior of one knot span in each direction
    r[a, b] = delta
    fld = adjusting_vectors(r, ku, kv, grid)
    nonzero = np.any(fld != 0, axis=2)
    assert nonzero.sum() == 16
    ru, rv = basis_row(ku, grid.u[a]), basis_row(kv, grid.v[b])
    for i, bu in enumerate(ru.values):
        for j, bv in enumerate(rv.values):
            np.testing.assert_allclose(fld[ru.first_index + i, rv.first_index + j], -bu * bv * delta, rtol=1e-15)


def test_adjusting_vectors_match_dense_oracle(rng):
    data, net, grid, ku, kv = random_instance(rng, 6, 6, 4, 4, 2)
    fld = adjusting_vectors(residuals(data, net, ku, kv, grid), ku, kv, grid)
    np.testing.assert_allclose(fld, dense_gradient(data, net, ku, kv, grid), rtol=0, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_adjusting_vectors_match_dense_oracle_large(seed):
    rng = np.random.default_rng(seed)
    rows, cols = (int(x) for x in rng.integers(9, 21, 2))
    m, n = (int(x) for x in rng.integers(4, 9, 2))
    data, net, grid, ku, kv = random_instance(rng, rows, cols, m, n, int(rng.integers(1, 4)))
    fld = adjusting_vectors(residuals(data, net, ku, kv, grid), ku, kv, grid)
    np.testing.assert_allclose(fld, dense_gradient(data, net, ku, kv, grid), rtol=0, atol=1e-12)


def test_adjusting_vectors_are_objective_gradient(rng):
    data, net, grid, ku, kv = random_instance(rng, 8, 7, 5, 4, 3)
    fld = adjusting_vectors(residuals(data, net, ku, kv, grid), ku, kv, grid)
    h = 1e-4
    fd = np.zeros_like(net)
    for idx in np.ndindex(net.shape):
        plus, minus = net.copy(), net.copy()
        plus[idx] += h
        minus[idx] -= h
        fd[idx] = (objective(data, plus, ku, kv, grid) - objective(data, minus, ku, kv, grid)) / (2 * h)
    np.testing.assert_allclose(fld, fd, rtol=1e-6, atol=1e-6 * np.abs(fld).max())


# --- steppers --------------------------------------------------------------


def test_lspia_step_zero_field():
    state = FitState.initial(np.ones((3, 3, 3)))
    out = lspia_step(state, np.zeros((3, 3, 3)), 0.7)
    np.testing.assert_array_equal(out.net, state.net)
    assert out.iteration == 1


def test_lspia_step_substitution():
    state = FitState.initial(np.array([[[1.0, 0.0, 0.0]]]))
    out = lspia_step(state, np.array([[[1.0, 0.0, 0.0]]]), 1.0)
    np.testing.assert_array_equal(out.net, [[[0.0, 0.0, 0.0]]])
    np.testing.assert_array_equal(out.accumulators, state.accumulators)


def test_lspia_step_rejects_bad_field():
    with pytest.raises(ValueError):
        lspia_step(FitState.initial(np.zeros((2, 2, 3))), np.zeros((2, 3, 3)), 1.0)


@pytest.mark.parametrize("mu", [0.3, 1.0, 1.7])
def test_lspia_toy_recurrence(mu):
    # closed form: p_k = 5 (1 - (1 - mu)^k)
    state = FitState.initial(np.zeros((1, 1, 1)))
    for k in range(1, 15):
        r = residuals(TOY_DATA, state.net, TOY_KV, TOY_KV, TOY_GRID)
        state = lspia_step(state, adjusting_vectors(r, TOY_KV, TOY_KV, TOY_GRID), mu)
        assert state.net[0, 0, 0] == pytest.approx(5 * (1 - (1 - mu) ** k), rel=1e-12, abs=1e-12)


def test_adagrad_step_zero_field():
    state = FitState(np.ones((2, 2, 3)), np.full((2, 2), 0.5), 3)
    out = adagrad_step(state, np.zeros((2, 2, 3)), 1.0, 1e-8)
    np.testing.assert_array_equal(out.net, state.net)
    np.testing.assert_array_equal(out.accumulators, state.accumulators)
    assert out.iteration == 4


def test_adagrad_step_fresh_state():
    state = FitState.initial(np.zeros((1, 1, 3)))
    delta = np.array([[[0.0, 2.0, 0.0]]])
    out = adagrad_step(state, delta, 1.0, 1e-8)
    w = 1 / math.sqrt(4 + 1e-8)
    assert out.accumulators[0, 0] == 4.0
    np.testing.assert_allclose(out.net, -w * delta, rtol=1e-15)
    assert w == pytest.approx(0.5, rel=1e-8)


def test_adagrad_two_steps_weights():
    eps = 1e-300  # epsilon -> 0 limit
    state = FitState.initial(np.zeros((1, 1, 2)))
    delta = np.array([[[0.6, 0.8]]])
    s1 = adagrad_step(state, delta, 1.0, eps)
    s2 = adagrad_step(s1, delta, 1.0, eps)
    assert s1.accumulators[0, 0] == pytest.approx(1.0)
    assert s2.accumulators[0, 0] == pytest.approx(2.0)
    np.testing.assert_allclose(s1.net, -delta, rtol=1e-15)
    np.testing.assert_allclose(s2.net - s1.net, -delta / math.sqrt(2), rtol=1e-15)


def test_adagrad_accumulators_monotone(rng):
    data, _, grid, ku, kv = random_instance(rng, 10, 10, 5, 5, 3)
    state = FitState.initial(np.zeros((5, 5, 3)))
    prev_acc, prev_w = state.accumulators, adaptive_weights(state.accumulators, 2.0, 1e-8)
    for _ in range(30):
        fld = adjusting_vectors(residuals(data, state.net, ku, kv, grid), ku, kv, grid)
        state = adagrad_step(state, fld, 2.0, 1e-8)
        w = adaptive_weights(state.accumulators, 2.0, 1e-8)
        assert np.all(state.accumulators >= prev_acc)
        assert np.all(w <= prev_w)
        prev_acc, prev_w = state.accumulators, w


def test_steppers_fixed_point_at_least_squares_solution():
    data = smooth_surface(12, 11)
    grid, ku, kv = make_problem((12, 11), (6, 5), 3, 3)
    pstar = normal_solve(assemble_dense(ku, kv, grid), data)
    fld = adjusting_vectors(residuals(data, pstar, ku, kv, grid), ku, kv, grid)
    scale = np.abs(adjusting_vectors(-data, ku, kv, grid)).max()
    assert np.abs(fld).max() <= 1e-9 * scale
    state = FitState.initial(pstar)
    np.testing.assert_allclose(lspia_step(state, fld, 0.1).net, pstar, atol=1e-9)
    np.testing.assert_allclose(adagrad_step(state, fld, 1.0, 1e-8).net, pstar, atol=1e-9)
    zero = np.zeros_like(fld)
    np.testing.assert_array_equal(lspia_step(state, zero, 0.1).net, pstar)
    np.testing.assert_array_equal(adagrad_step(state, zero, 1.0, 1e-8).net, pstar)


# --- config ----------------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(mu=0.0),
        dict(mu=-1.0),
        dict(epsilon=0.0),
        dict(tolerance=-1e-7),
        dict(max_iterations=0),
        dict(mu=math.inf),
        dict(method="adam"),
    ],
)
def test_fit_config_rejects(kwargs):
    with pytest.raises(ValueError):
        FitConfig(**kwargs)


def test_fit_config_defaults():
    cfg = FitConfig()
    assert cfg.epsilon == 1e-8
    assert cfg.tolerance == 1e-7
    assert cfg.max_iterations == 1000
    assert FitConfig("lspia").method is Method.LSPIA
    assert FitConfig("AdagradLSPIA").method is Method.ADAGRAD


# --- run_fit ---------------------------------------------------------------


@pytest.mark.parametrize("method", ["LSPIA", "AdagradLSPIA"])
def test_run_fit_already_interpolating(method):
    grid = ParamGrid.uniform(2, 2)
    net = np.random.default_rng(2).normal(size=(2, 2, 3))
    report = run_fit(net, grid, BILINEAR, BILINEAR, net, FitConfig(method, 0.5))
    assert report.converged
    assert report.iterations == 1
    assert report.error_history == [0.0, 0.0]
    np.testing.assert_array_equal(report.final_net, net)


def test_run_fit_toy_one_step():
    report = run_fit(TOY_DATA, TOY_GRID, TOY_KV, TOY_KV, np.zeros((1, 1, 1)), FitConfig("LSPIA", 1.0))
    # the iterate hits q after the first step; the stopping test needs one more to see it
    assert report.error_history[:2] == [25.0, 0.0]
    assert report.converged and report.final_error == 0.0
    np.testing.assert_array_equal(report.final_net, [[[5.0]]])


def test_run_fit_reaches_normal_equations_solution():
    data = smooth_surface(12, 12)
    grid, ku, kv = make_problem((12, 12), (6, 6), 3, 3)
    A = assemble_dense(ku, kv, grid)
    pstar = normal_solve(A, data)
    lam, definite = gram_spectrum(A)
    assert definite
    for cfg in (FitConfig("LSPIA", 1 / lam, tolerance=1e-12, max_iterations=20000),
                FitConfig("AdagradLSPIA", 1.0, tolerance=1e-12, max_iterations=20000)):
        report = run_fit(data, grid, ku, kv, zero_net(6, 6, 3), cfg)
        assert report.converged
        assert np.abs(report.final_net - pstar).max() < 1e-4


def test_run_fit_report_invariants(rng):
    data, _, grid, ku, kv = random_instance(rng, 10, 9, 5, 4, 2)
    report = run_fit(data, grid, ku, kv, zero_net(5, 4, 3), FitConfig("AdagradLSPIA", 1.0, max_iterations=25))
    assert len(report.error_history) == report.iterations + 1
    assert len(report.time_history) == len(report.error_history)
    assert report.final_error == report.error_history[-1]
    assert report.iterations <= 25
    assert report.wall_time_seconds >= 0
    assert report.error_history[0] == pytest.approx(float((data**2).sum()))
    assert report.final_error == pytest.approx(fitting_error(data, report.final_net, ku, kv, grid), rel=1e-12)


def test_run_fit_iteration_cap(rng):
    data, _, grid, ku, kv = random_instance(rng, 10, 10, 5, 5, 3)
    report = run_fit(data, grid, ku, kv, zero_net(5, 5, 3), FitConfig("LSPIA", 1e-4, tolerance=1e-14, max_iterations=3))
    assert report.iterations == 3
    assert not report.converged


def test_run_fit_divergence_carries_last_finite_state():
    data = smooth_surface(10, 10)
    grid, ku, kv = make_problem((10, 10), (5, 5), 3, 3)
    lam, _ = gram_spectrum(assemble_dense(ku, kv, grid))
    with pytest.raises(DivergenceError) as info:
        run_fit(data, grid, ku, kv, zero_net(5, 5, 3), FitConfig("LSPIA", 3 / lam, max_iterations=1000))
    report = info.value.report
    assert report.diverged and not report.converged
    assert math.isfinite(report.final_error)
    assert np.all(np.isfinite(report.final_net))
    assert report.final_error > 1e12 * report.error_history[0]
    assert report.final_error == pytest.approx(fitting_error(data, report.final_net, ku, kv, grid), rel=1e-9)


def test_run_fit_rejects_bad_initial_net():
    data = smooth_surface(6, 6)
    grid, ku, kv = make_problem((6, 6), (4, 4), 2, 2)
    with pytest.raises(ValueError):
        run_fit(data, grid, ku, kv, np.zeros((4, 5, 3)), FitConfig())
    with pytest.raises(ValueError):
        run_fit(data, grid, ku, kv, np.zeros((4, 4, 2)), FitConfig())


def test_subsample_initializer_speeds_up_fit():
    data = smooth_surface(30, 30)
    grid, ku, kv = make_problem((30, 30), (8, 8), 3, 3)
    net = subsample_net(data, 8, 8)
    np.testing.assert_array_equal(net[0, 0], data[0, 0])
    np.testing.assert_array_equal(net[-1, -1], data[-1, -1])
    cfg = FitConfig("AdagradLSPIA", 0.5)
    sub = run_fit(data, grid, ku, kv, net, cfg)
    zero = run_fit(data, grid, ku, kv, zero_net(8, 8, 3), cfg)
    assert sub.error_history[0] < zero.error_history[0]


def test_per_iteration_cost_is_linear_in_data():
    # 4x data: linear cost gives ~4x, quadratic ~16x; allow a 3x band around linear
    def per_iter(rows):
        data = smooth_surface(rows, rows)
        grid, ku, kv = make_problem((rows, rows), (15, 15), 3, 3)
        cfg = FitConfig("AdagradLSPIA", 1.0, tolerance=1e-300, max_iterations=50)
        times = []
        for _ in range(5):
            rep = run_fit(data, grid, ku, kv, zero_net(15, 15, 3), cfg)
            times.append((rep.time_history[-1] - rep.time_history[0]) / rep.iterations)
        return float(np.median(times))

    assert per_iter(202) / per_iter(101) <= 12
