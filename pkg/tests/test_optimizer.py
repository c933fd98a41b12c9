import numpy as np
import pytest

import mixopt as mx

from conftest import small_cellular_setup


def _problem(n=16, n_steps=10, dt=0.01, width=0.1):
    mesh, tables = small_cellular_setup(n)
    theta0 = mx.project_initial_data(
        mesh, lambda x, y: np.tanh((y - 0.5) / width))
    schedule0 = mx.ControlSchedule(dt, np.ones((2, n_steps)))
    return mesh, tables, theta0, schedule0


def test_config_validation():
    with pytest.raises(ValueError):
        mx.OptimizerConfig(c=1.5)
    with pytest.raises(ValueError):
        mx.OptimizerConfig(shrink=0.0)
    with pytest.raises(ValueError):
        mx.OptimizerConfig(eps_stop=0.0)
    with pytest.raises(ValueError):
        mx.OptimizerConfig(beta_rule="dai_yuan")


def test_rejects_nonfinite_initial_schedule():
    mesh, tables, theta0, schedule0 = _problem(n=4, n_steps=2)
    bad = mx.ControlSchedule(0.01, np.array([[np.nan, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        mx.optimize(mesh, theta0, bad, tables, 1e-6)


def test_frozen_state_quadratic_is_driven_to_zero():
    # constant initial data freezes the state, so the objective reduces
    # to the quadratic penalty and the minimum is the zero schedule
    mesh, tables = small_cellular_setup(8)
    theta0 = np.full(mesh.n_cells, 1.5)
    schedule0 = mx.ControlSchedule(0.02, np.ones((2, 6)))
    cfg = mx.OptimizerConfig(eps_stop=1e-12, max_outer=60)
    sched, report = mx.optimize(mesh, theta0, schedule0, tables, 1e-3,
                                cfg, tol=1e-12)
    assert report.objectives[-1] < 1e-3 * report.objectives[0]
    assert np.abs(sched.coeffs).max() < 0.1


def test_descent_is_monotone_and_recorded():
    mesh, tables, theta0, schedule0 = _problem()
    cfg = mx.OptimizerConfig(eps_stop=1e-6, max_outer=10)
    sched, report = mx.optimize(mesh, theta0, schedule0, tables, 1e-6,
                                cfg, tol=1e-11)
    objs = report.objectives
    assert len(objs) == len(report.grad_norms) == len(report.alphas)
    assert all(b <= a for a, b in zip(objs, objs[1:]))
    assert objs[-1] < objs[0]
    assert report.termination in ("converged", "max_outer", "stalled")
    assert all(bt >= 0 for bt in report.backtracks)
    assert sched.coeffs.shape == schedule0.coeffs.shape
    assert np.array_equal(report.final_coeffs, sched.coeffs)


def test_determinism_bit_for_bit():
    mesh, tables, theta0, schedule0 = _problem(n=8, n_steps=6)
    cfg = mx.OptimizerConfig(eps_stop=1e-5, max_outer=6)
    _, r1 = mx.optimize(mesh, theta0, schedule0, tables, 1e-6, cfg,
                        tol=1e-11)
    _, r2 = mx.optimize(mesh, theta0, schedule0, tables, 1e-6, cfg,
                        tol=1e-11)
    assert r1.objectives == r2.objectives
    assert r1.alphas == r2.alphas
    assert r1.grad_norms == r2.grad_norms
    assert r1.termination == r2.termination


@pytest.mark.parametrize("rule", ["norm_ratio", "fletcher_reeves"])
def test_beta_rules_both_descend(rule):
    mesh, tables, theta0, schedule0 = _problem(n=8, n_steps=6)
    cfg = mx.OptimizerConfig(eps_stop=1e-7, max_outer=8, beta_rule=rule)
    _, report = mx.optimize(mesh, theta0, schedule0, tables, 1e-6, cfg,
                            tol=1e-11)
    assert report.objectives[-1] < report.objectives[0]


def test_stalled_line_search_returns_best_iterate():
    mesh, tables, theta0, schedule0 = _problem(n=8, n_steps=4)
    cfg = mx.OptimizerConfig(max_backtracks=0, max_outer=5)
    sched, report = mx.optimize(mesh, theta0, schedule0, tables, 1e-6,
                                cfg, tol=1e-11)
    assert report.termination == "stalled"
    assert np.array_equal(sched.coeffs, schedule0.coeffs)
    assert len(report.objectives) == 1


def test_report_round_trips_to_dict():
    mesh, tables, theta0, schedule0 = _problem(n=8, n_steps=4)
    cfg = mx.OptimizerConfig(eps_stop=1e-4, max_outer=3)
    _, report = mx.optimize(mesh, theta0, schedule0, tables, 1e-6, cfg,
                            tol=1e-11)
    d = report.to_dict()
    assert d["n_iterations"] == report.n_iterations
    assert d["objectives"] == report.objectives
    assert isinstance(d["restarts"][0], bool)
