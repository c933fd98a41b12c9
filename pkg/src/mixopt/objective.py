"""Discrete mixing objective and its adjoint-based gradient.

The objective is half the squared mixedness of the final state plus a
quadratic penalty on the stirring coefficients.  Its exact gradient with
respect to the piecewise-constant coefficients pairs the interval
midpoints of the state and of the adjoint:

    g[i, n] = dt * (gamma * v[i, n]
                    + <(theta[n+1] + theta[n])/2,
                       D_i (rho[n] + rho[n+1])/2>)

The adjoint midpoint is forced by the discrete duality: telescoping the
pairing of the variational state equation against the backward sweep
produces (I - D)^{-1} rho[n+1], and the trapezoidal updates make that
vector identical to (rho[n] + rho[n+1])/2.  Sampling the adjoint at the
node instead leaves an O(dt) relative error, which the
central-difference oracle below exposes immediately.
"""

from __future__ import annotations

import numpy as np

from .elliptic import NeumannLaplacian, solve_poisson_zero_mean
from .transport import AdvectionOperator, ControlSchedule, solve_adjoint, \
    solve_forward

__all__ = [
    "evaluate_objective",
    "evaluate_gradient",
    "objective_and_gradient",
    "finite_difference_gradient",
]


def _context(mesh, tables, advection, laplacian):
    if advection is None:
        advection = AdvectionOperator(mesh, tables)
    if laplacian is None:
        laplacian = NeumannLaplacian(mesh)
    return advection, laplacian


def _eta_and_mix2(mesh, laplacian, theta_T, tol):
    corrected = laplacian.project_zero_mean(theta_T)
    eta = solve_poisson_zero_mean(laplacian, corrected, tol=tol)
    mix2 = mesh.inner(corrected, eta)
    if -10.0 * tol * max(mesh.inner(theta_T, theta_T), 1.0) <= mix2 < 0.0:
        mix2 = 0.0          # rounding guard, same budget as the mix-norm
    return eta, mix2


def _terminal_pieces(mesh, theta0, schedule, advection, laplacian, tol,
                     memory_budget=None):
    traj = solve_forward(mesh, advection, theta0, schedule, tol=tol,
                         memory_budget=memory_budget)
    eta, mix2 = _eta_and_mix2(mesh, laplacian, traj.final, tol)
    return traj, eta, mix2


def _penalty(schedule, gamma):
    return 0.5 * gamma * schedule.dt * float(np.sum(schedule.coeffs ** 2))


def evaluate_objective(mesh, theta0, schedule, tables, gamma, tol=1.0e-12,
                       advection=None, laplacian=None):
    """Value of the discrete objective for one coefficient schedule.

    ``0.5 * <theta_T, eta(theta_T)> + 0.5 * gamma * dt * sum v^2`` with
    ``theta_T`` the final state of the forward solve and ``eta`` the
    zero-mean Poisson solution it drives.  Always nonnegative.
    """
    if gamma < 0.0:
        raise ValueError("gamma must be nonnegative")
    advection, laplacian = _context(mesh, tables, advection, laplacian)
    _, _, mix2 = _terminal_pieces(mesh, theta0, schedule, advection,
                                  laplacian, tol)
    return 0.5 * mix2 + _penalty(schedule, gamma)


def evaluate_gradient(mesh, theta0, schedule, tables, gamma, tol=1.0e-12,
                      advection=None, laplacian=None):
    """Gradient of the objective, one entry per coefficient.

    Forward solve, Poisson solve for the terminal multiplier, backward
    adjoint solve, then the midpoint/nodal inner products above.  Shape
    matches ``schedule.coeffs``.
    """
    _, grad = objective_and_gradient(mesh, theta0, schedule, tables, gamma,
                                     tol=tol, advection=advection,
                                     laplacian=laplacian)
    return grad


def objective_and_gradient(mesh, theta0, schedule, tables, gamma,
                           tol=1.0e-12, advection=None, laplacian=None,
                           trajectory=None, memory_budget=None):
    """Objective and gradient from one state/adjoint sweep.

    ``trajectory`` may carry a previously computed forward solve for the
    same schedule (the line search already visited the accepted point);
    it is re-used instead of recomputing.
    """
    if gamma < 0.0:
        raise ValueError("gamma must be nonnegative")
    advection, laplacian = _context(mesh, tables, advection, laplacian)
    if trajectory is None:
        traj, eta, mix2 = _terminal_pieces(
            mesh, theta0, schedule, advection, laplacian, tol,
            memory_budget=memory_budget)
    else:
        traj = trajectory
        eta, mix2 = _eta_and_mix2(mesh, laplacian, traj.final, tol)
    value = 0.5 * mix2 + _penalty(schedule, gamma)

    rho = solve_adjoint(mesh, advection, eta, schedule, tol=tol,
                        memory_budget=memory_budget)
    dt = schedule.dt
    grad = np.empty_like(schedule.coeffs)
    singles = [advection.single(i) for i in range(advection.m)]
    w = mesh.volumes
    for n in range(schedule.n_steps):
        wmid = 0.5 * (traj[n + 1] + traj[n]) * w
        rho_mid = 0.5 * (rho[n] + rho[n + 1])
        for i in range(advection.m):
            adv = float(np.dot(wmid, singles[i] @ rho_mid))
            grad[i, n] = dt * (gamma * schedule.coeffs[i, n] + adv)
    return value, grad


def finite_difference_gradient(mesh, theta0, schedule, tables, gamma,
                               tol=1.0e-12, eps=1.0e-5, advection=None,
                               laplacian=None):
    """Central-difference probe of the objective, entry by entry.

    Costs two full objective evaluations per coefficient; intended as an
    independent oracle on small instances only.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    advection, laplacian = _context(mesh, tables, advection, laplacian)
    grad = np.empty_like(schedule.coeffs)
    for i in range(schedule.m):
        for n in range(schedule.n_steps):
            for sgn in (+1.0, -1.0):
                probed = schedule.coeffs.copy()
                probed[i, n] += sgn * eps
                val = evaluate_objective(
                    mesh, theta0, ControlSchedule(schedule.dt, probed),
                    tables, gamma, tol=tol, advection=advection,
                    laplacian=laplacian)
                if sgn > 0:
                    plus = val
                else:
                    grad[i, n] = (plus - val) / (2.0 * eps)
    return grad
