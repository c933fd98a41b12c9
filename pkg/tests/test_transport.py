import numpy as np
import pytest

import mixopt as mx
from mixopt.transport import gmres_weighted

from conftest import dense_divergence, small_cellular_setup


def test_divergence_of_constant_vanishes():
    mesh, tables = small_cellular_setup(16)
    out = mx.apply_divergence(mesh, tables, [1.0, -0.7],
                              np.ones(mesh.n_cells))
    scale = max(t.max_abs for t in tables) / mesh.volumes.min()
    assert np.abs(out).max() < 1e-13 * scale


def test_divergence_zero_coefficients():
    mesh, tables = small_cellular_setup(8)
    y = np.arange(mesh.n_cells, dtype=float)
    out = mx.apply_divergence(mesh, tables, [0.0, 0.0], y)
    assert np.all(out == 0.0)


def test_divergence_2x2_hand_values():
    # unit-square quad mesh, single-cell stirring mode, y = (1,0,0,0):
    # interior fluxes are +-1 by the stream endpoint differences, volumes
    # are 1/4, which gives D y = (0, -2, 2, 0) by direct summation
    mesh = mx.build_cartesian(2, 2)
    table = mx.assemble_flux_table(mesh, mx.cellular_basis(1))
    y = np.array([1.0, 0.0, 0.0, 0.0])
    out = mx.apply_divergence(mesh, [table], [1.0], y)
    assert np.allclose(out, [0.0, -2.0, 2.0, 0.0], atol=1e-14)


def test_divergence_matches_dense_oracle(rng):
    mesh, tables = small_cellular_setup(6)
    dense = [dense_divergence(mesh, t) for t in tables]
    coeffs = rng.uniform(-2, 2, 2)
    D = coeffs[0] * dense[0] + coeffs[1] * dense[1]
    for _ in range(5):
        y = rng.standard_normal(mesh.n_cells)
        assert np.allclose(mx.apply_divergence(mesh, tables, coeffs, y),
                           D @ y, atol=1e-13 * np.abs(D).max())


@pytest.mark.parametrize("mesh,flows", [
    (mx.build_cartesian(32, 32), [mx.cellular_basis(1),
                                  mx.cellular_basis(2)]),
    (mx.build_polar(24, 32, (0.5, 0.5), 0.5),
     [mx.doswell_basis((0.5, 0.5)),
      mx.five_cell_doswell_basis((0.5, 0.5), 0.5)]),
], ids=["cartesian", "polar"])
def test_skew_symmetry(mesh, flows, rng):
    tables = [mx.assemble_flux_table(mesh, f) for f in flows]
    op = mx.AdvectionOperator(mesh, tables)
    for _ in range(50):
        coeffs = rng.uniform(-2, 2, len(flows))
        y = rng.standard_normal(mesh.n_cells)
        z = rng.standard_normal(mesh.n_cells)
        lhs = mesh.inner(op.apply(coeffs, y), z)
        rhs = mesh.inner(y, op.apply(coeffs, z))
        assert abs(lhs + rhs) <= 1e-13 * mesh.norm(y) * mesh.norm(z)


def test_operator_requires_matching_mesh():
    mesh, tables = small_cellular_setup(4)
    other = mx.build_cartesian(4, 4)
    with pytest.raises(ValueError):
        mx.AdvectionOperator(other, tables)


def test_cn_step_zero_coefficients_short_circuits():
    mesh, tables = small_cellular_setup(8)
    op = mx.AdvectionOperator(mesh, tables)
    theta = np.sin(np.arange(mesh.n_cells, dtype=float))
    out = mx.cn_step(mesh, op, [0.0, 0.0], 1e-3, theta)
    assert np.all(out == theta)
    assert out is not theta


def test_cn_step_is_isometry(rng):
    mesh, tables = small_cellular_setup(16)
    op = mx.AdvectionOperator(mesh, tables)
    theta = rng.standard_normal(mesh.n_cells)
    for coeffs in ([1.0, 0.0], [0.4, -1.7], [2.0, 2.0]):
        out = mx.cn_step(mesh, op, coeffs, 1e-2, theta, tol=1e-13)
        assert abs(mesh.norm(out) - mesh.norm(theta)) \
            <= 1e-12 * mesh.norm(theta)


def test_cn_step_matches_dense_solve(rng):
    mesh, tables = small_cellular_setup(4)
    op = mx.AdvectionOperator(mesh, tables)
    dense = [dense_divergence(mesh, t) for t in tables]
    theta = rng.standard_normal(mesh.n_cells)
    coeffs = rng.uniform(-2, 2, 2)
    dt = 0.05
    D = 0.5 * dt * (coeffs[0] * dense[0] + coeffs[1] * dense[1])
    n = mesh.n_cells
    ref = np.linalg.solve(np.eye(n) + D, (np.eye(n) - D) @ theta)
    out = mx.cn_step(mesh, op, coeffs, dt, theta, tol=1e-13)
    assert np.abs(out - ref).max() < 1e-12 * np.abs(ref).max()


def test_cn_step_rejects_bad_arguments():
    mesh, tables = small_cellular_setup(4)
    op = mx.AdvectionOperator(mesh, tables)
    theta = np.zeros(mesh.n_cells)
    with pytest.raises(ValueError):
        mx.cn_step(mesh, op, [1.0, 1.0], 1e-3, theta, direction="sideways")
    with pytest.raises(ValueError):
        mx.cn_step(mesh, op, [1.0, 1.0], 1e-3, theta, tol=-1.0)
    with pytest.raises(ValueError):
        mx.cn_step(mesh, op, [1.0], 1e-3, theta)


def test_gmres_raises_with_achieved_residual(rng):
    mesh, tables = small_cellular_setup(8)
    op = mx.AdvectionOperator(mesh, tables)
    D = op.combined(np.array([2.0, 1.0]))
    b = rng.standard_normal(mesh.n_cells)
    with pytest.raises(mx.SolverError) as err:
        gmres_weighted(lambda v: v + D @ v, b, mesh.volumes, tol=1e-14,
                       restart=2, maxiter=2)
    assert err.value.residual is not None
    assert err.value.residual > 0


def test_solve_forward_zero_schedule():
    mesh, tables = small_cellular_setup(8)
    op = mx.AdvectionOperator(mesh, tables)
    theta0 = np.linspace(-1, 1, mesh.n_cells)
    schedule = mx.ControlSchedule(1e-2, np.zeros((2, 5)))
    traj = mx.solve_forward(mesh, op, theta0, schedule)
    for n in range(6):
        assert np.all(traj[n] == theta0)


def test_solve_adjoint_zero_schedule():
    mesh, tables = small_cellular_setup(8)
    op = mx.AdvectionOperator(mesh, tables)
    eta = np.linspace(0, 2, mesh.n_cells)
    schedule = mx.ControlSchedule(1e-2, np.zeros((2, 5)))
    rho = mx.solve_adjoint(mesh, op, eta, schedule)
    for n in range(6):
        assert np.all(rho[n] == eta)
    assert np.all(rho.final == eta)


def test_conservation_triple_random_coefficients(rng):
    # mass, energy and the state-adjoint pairing over 50 random steps
    mesh, tables = small_cellular_setup(16)
    op = mx.AdvectionOperator(mesh, tables)
    theta0 = mx.project_initial_data(
        mesh, lambda x, y: np.tanh((y - 0.5) / 0.1))
    schedule = mx.ControlSchedule(1e-3, rng.uniform(-2, 2, (2, 50)))
    tol = 1e-12
    traj = mx.solve_forward(mesh, op, theta0, schedule, tol=tol)
    rho_T = rng.standard_normal(mesh.n_cells)
    rho = mx.solve_adjoint(mesh, op, rho_T, schedule, tol=tol)

    m0 = mx.mass(mesh, theta0)
    e0 = mx.energy(mesh, theta0)
    p_ref = mx.pairing(mesh, traj.final, rho_T)
    p_scale = mesh.norm(theta0) * mesh.norm(rho_T)
    for n in range(51):
        assert abs(mx.mass(mesh, traj[n]) - m0) \
            <= 1e-12 * mesh.norm(theta0) * np.sqrt(mesh.domain_volume)
        assert abs(mx.energy(mesh, traj[n]) - e0) / e0 <= 1e-9
        assert abs(mx.pairing(mesh, traj[n], rho[n]) - p_ref) \
            <= 1e-9 * p_scale
        assert abs(mx.mass(mesh, rho[n]) - mx.mass(mesh, rho_T)) \
            <= 1e-12 * mesh.norm(rho_T) * np.sqrt(mesh.domain_volume)


def test_time_reversibility(rng):
    mesh, tables = small_cellular_setup(16)
    op = mx.AdvectionOperator(mesh, tables)
    theta0 = rng.standard_normal(mesh.n_cells)
    coeffs = rng.uniform(-2, 2, (2, 30))
    tol = 1e-13
    state = theta0.copy()
    for n in range(30):
        state = mx.cn_step(mesh, op, coeffs[:, n], 1e-3, state, tol=tol)
    for n in reversed(range(30)):
        state = mx.cn_step(mesh, op, coeffs[:, n], 1e-3, state,
                           direction="backward", tol=tol)
    assert mesh.norm(state - theta0) <= 10 * tol * 30 * mesh.norm(theta0)


def test_rotation_semidiscrete_reference():
    # a quarter turn of an offset bump returns close to its rotated image
    mesh = mx.build_polar(64, 64, (0.5, 0.5), 0.5)
    flow = mx.rigid_rotation_flow((0.5, 0.5), 1.0)
    table = mx.assemble_flux_table(mesh, flow)
    op = mx.AdvectionOperator(mesh, [table])
    bump = lambda x, y: np.exp(-((x - 0.65) ** 2 + (y - 0.5) ** 2)
                               / (2 * 0.07 ** 2))
    theta0 = mx.project_initial_data(mesh, bump)
    t_final = 0.5 * np.pi
    n_steps = 128
    schedule = mx.ControlSchedule(t_final / n_steps, np.ones((1, n_steps)))
    traj = mx.solve_forward(mesh, op, theta0, schedule, tol=1e-11)
    rotated = lambda x, y: bump(0.5 + (y - 0.5), 0.5 - (x - 0.5))
    ref = mx.project_initial_data(mesh, rotated)
    assert mesh.norm(traj.final - ref) < 0.1 * mesh.norm(ref)


def test_trajectory_checkpointing_matches_full_storage(rng):
    mesh, tables = small_cellular_setup(8)
    op = mx.AdvectionOperator(mesh, tables)
    theta0 = rng.standard_normal(mesh.n_cells)
    schedule = mx.ControlSchedule(1e-2, rng.uniform(-1, 1, (2, 17)))
    full = mx.solve_forward(mesh, op, theta0, schedule, tol=1e-13)
    lean = mx.solve_forward(mesh, op, theta0, schedule, tol=1e-13,
                            memory_budget=5 * mesh.n_cells * 8)
    assert lean.stride > 1
    for n in reversed(range(18)):
        assert np.allclose(lean[n], full[n], rtol=0, atol=1e-13)
    rho_full = mx.solve_adjoint(mesh, op, theta0, schedule, tol=1e-13)
    rho_lean = mx.solve_adjoint(mesh, op, theta0, schedule, tol=1e-13,
                                memory_budget=5 * mesh.n_cells * 8)
    for n in range(18):
        assert np.allclose(rho_lean[n], rho_full[n], rtol=0, atol=1e-13)


def test_trajectory_index_bounds():
    mesh, tables = small_cellular_setup(4)
    op = mx.AdvectionOperator(mesh, tables)
    schedule = mx.ControlSchedule(1e-2, np.zeros((2, 3)))
    traj = mx.solve_forward(mesh, op, np.zeros(mesh.n_cells), schedule)
    with pytest.raises(IndexError):
        traj.state(4)


def test_functionals_and_mismatch():
    mesh = mx.build_cartesian(8, 8)
    ones = np.ones(mesh.n_cells)
    assert mx.mass(mesh, ones) == pytest.approx(1.0)
    assert mx.energy(mesh, ones) == pytest.approx(1.0)
    assert mx.pairing(mesh, ones, 2 * ones) == pytest.approx(2.0)
    with pytest.raises(ValueError, match="does not match"):
        mx.mass(mesh, np.ones(7))
    fine = mx.build_cartesian(16, 16)
    theta = mx.project_initial_data(fine, lambda x, y: np.sin(2 * np.pi * y))
    assert mx.energy(fine, theta) == pytest.approx(0.5, abs=1e-2)


def test_energy_of_sine_refines_to_half():
    vals = []
    for n in (16, 32, 64):
        mesh = mx.build_cartesian(n, n)
        theta = mx.project_initial_data(
            mesh, lambda x, y: np.sin(2 * np.pi * y))
        vals.append(mx.energy(mesh, theta))
    errs = np.abs(np.array(vals) - 0.5)
    assert errs[2] < errs[1] < errs[0]
    assert errs[2] < 1e-3


def test_control_schedule_validation():
    with pytest.raises(ValueError):
        mx.ControlSchedule(-1e-3, np.ones((2, 4)))
    s = mx.ControlSchedule(0.5, np.ones((2, 4)))
    assert s.t_final == pytest.approx(2.0)
    assert s.m == 2 and s.n_steps == 4
