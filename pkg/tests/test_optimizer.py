import math

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given
from oracles import sympy_path3_gradient

from csma.graph import ConflictGraph, NetworkConfig, gen_named
from csma.optimizer import (
    OptimizerConfig,
    UtilitySpec,
    gradient,
    objective,
    optimize,
    path3_jacobian,
    path3_throughput,
    region_boundary,
)

ALPHA = (0.6, 0.6, 0.3)
LINEAR = UtilitySpec("linear")


def test_objective_weight_selection(path3_cfg):
    opt = OptimizerConfig((1, 0, 0), LINEAR)
    assert objective([0.5] * 3, path3_cfg, opt) == pytest.approx(6 / 17, abs=1e-14)


def test_objective_log_path3(path3_cfg):
    # S = (6/17, 2/17, 6/17) at p = 1/2
    expected = 0.6 * math.log(6 / 17) + 0.6 * math.log(2 / 17) + 0.3 * math.log(6 / 17)
    assert objective([0.5] * 3, path3_cfg, OptimizerConfig(ALPHA)) == pytest.approx(expected, abs=1e-13)


def test_objective_zero_weights(path3_cfg, rng):
    assert objective(rng.uniform(0.1, 0.9, 3), path3_cfg, OptimizerConfig((0, 0, 0))) == 0.0


def test_path3_throughput_matches_rationals():
    np.testing.assert_allclose(path3_throughput([0.5] * 3), [6 / 17, 2 / 17, 6 / 17], atol=1e-15)


def test_analytic_gradient_matches_sympy(rng):
    for _ in range(5):
        p = rng.uniform(0.05, 0.95, 3)
        opt = OptimizerConfig(ALPHA, grad_mode="analytic-T2-3node")
        tpl = NetworkConfig(gen_named("path", 3), p, 2)
        np.testing.assert_allclose(gradient(p, tpl, opt), sympy_path3_gradient(ALPHA, p), atol=1e-12)


def test_jacobian_matches_central_differences(rng):
    p = rng.uniform(0.1, 0.9, 3)
    h = 1e-6
    num = np.column_stack(
        [(path3_throughput(p + h * e) - path3_throughput(p - h * e)) / (2 * h) for e in np.eye(3)]
    )
    np.testing.assert_allclose(path3_jacobian(p), num, atol=1e-8)


def test_analytic_vs_finite_difference(path3_cfg, rng):
    fd = OptimizerConfig(ALPHA, fd_h=1e-5)
    an = OptimizerConfig(ALPHA, grad_mode="analytic-T2-3node")
    worst = 0.0
    for _ in range(20):
        p = rng.uniform(0.05, 0.95, 3)
        worst = max(worst, np.max(np.abs(gradient(p, path3_cfg, fd) - gradient(p, path3_cfg, an))))
    assert worst <= 1e-6


def test_analytic_mode_rejects_other_graphs():
    tpl = NetworkConfig(gen_named("complete", 3), (0.5,) * 3, 2)
    with pytest.raises(ValueError):
        gradient([0.5] * 3, tpl, OptimizerConfig(ALPHA, grad_mode="analytic-T2-3node"))


@pytest.mark.parametrize("T", [2, 3, 5])
def test_single_node_gradient(T):
    p = 0.4
    tpl = NetworkConfig(ConflictGraph(1), (p,), T)
    g = gradient([p], tpl, OptimizerConfig((1,), LINEAR))
    assert g[0] == pytest.approx(T / (1 + (T - 1) * p) ** 2, abs=1e-8)


def test_projection_fixed_point_at_corner():
    tpl = NetworkConfig(ConflictGraph(1), (0.5,), 2)
    opt = OptimizerConfig((1,), LINEAR, step_rule="fixed", eta0=0.5)
    tr = optimize(tpl, opt, [1 - 1e-4])
    assert tr.converged
    assert all(it.p[0] == 1 - 1e-4 for it in tr.iterations)


def test_optimize_path3_log(path3_cfg):
    tr = optimize(path3_cfg, OptimizerConfig(ALPHA), [0.5] * 3)
    assert tr.converged
    assert np.all(np.diff(tr.J_values()) >= 0)
    x = np.linspace(0, 1, 41)
    grid = np.stack(np.meshgrid(x, x, x, indexing="ij"), -1)
    S = path3_throughput(grid)
    J = (np.array(ALPHA) * np.log(np.maximum(S, 1e-12))).sum(-1)
    assert tr.final.J >= J.max() - 1e-3


def test_local_optimality(path3_cfg):
    opt = OptimizerConfig(ALPHA)
    tr = optimize(path3_cfg, opt, [0.5] * 3)
    p = tr.final.p
    assert np.all((p > opt.p_bounds[0]) & (p < opt.p_bounds[1]))
    assert np.max(np.abs(gradient(p, path3_cfg, opt))) <= 10 * opt.tol


def test_single_node_linear_goes_to_upper_bound():
    tpl = NetworkConfig(ConflictGraph(1), (0.5,), 3)
    tr = optimize(tpl, OptimizerConfig((1,), LINEAR), [0.5])
    assert tr.converged
    assert tr.final.p[0] == pytest.approx(1 - 1e-4)


def test_zero_step_converges_immediately(path3_cfg):
    tr = optimize(path3_cfg, OptimizerConfig(ALPHA, eta0=0.0), [0.3, 0.4, 0.5])
    assert tr.converged and tr.final.k == 1
    assert np.array_equal(tr.iterations[0].p, tr.iterations[1].p)


def test_max_iters_one(path3_cfg):
    tr = optimize(path3_cfg, OptimizerConfig(ALPHA, max_iters=1), [0.5] * 3)
    assert len(tr.iterations) == 2 and not tr.converged


def test_fixed_step_rule_runs(path3_cfg):
    tr = optimize(path3_cfg, OptimizerConfig(ALPHA, step_rule="fixed", eta0=0.05, max_iters=50), [0.5] * 3)
    assert len(tr.iterations) == 51
    assert tr.final.J > tr.iterations[0].J


def test_trace_csv(path3_cfg):
    tr = optimize(path3_cfg, OptimizerConfig(ALPHA, max_iters=3), [0.5] * 3)
    lines = tr.to_csv().splitlines()
    assert lines[0] == "iter,p_0,p_1,p_2,S_0,S_1,S_2,J"
    assert len(lines) == 1 + len(tr.iterations)


@pytest.mark.parametrize(
    "kwargs",
    [dict(alpha=(-1, 0, 0)), dict(alpha=ALPHA, p_bounds=(0.5, 0.4)), dict(alpha=ALPHA, fd_h=0.1),
     dict(alpha=ALPHA, step_rule="armijo"), dict(alpha=ALPHA, fixed={0: 2.0})],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        OptimizerConfig(**kwargs)


@given(
    st.lists(st.floats(-5, 5), min_size=3, max_size=3),
    st.tuples(st.floats(0, 0.4), st.floats(0.6, 1)),
)
def test_projection_stays_in_box(x, box):
    opt = OptimizerConfig(ALPHA, p_bounds=box)
    y = opt.project(np.array(x))
    assert np.all((y >= box[0]) & (y <= box[1]))


def test_region_tradeoff(path3):
    tpl = NetworkConfig(path3, (0.5,) * 3, 2)
    grid = [(0, t, 1 - t) for t in np.linspace(0, 1, 11)]
    pts = region_boundary(tpl, grid, OptimizerConfig(grid[0], fixed={0: 0.0}))
    S1 = np.array([pt.S[1] for pt in pts])
    S2 = np.array([pt.S[2] for pt in pts])
    assert all(pt.converged and pt.S[0] == 0 for pt in pts)
    assert np.all(np.diff(S1) >= -1e-9) and np.all(np.diff(S2) <= 1e-9)
    assert S1[-1] == S1.max()


def test_region_records_failures(path3):
    tpl = NetworkConfig(path3, (0.5,) * 3, 2)
    pts = region_boundary(tpl, [(0, 1, 0), (1, 1)], OptimizerConfig((0, 1, 0)))
    assert pts[0].S is not None
    assert pts[1].S is None and pts[1].error
