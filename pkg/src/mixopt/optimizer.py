"""Nonlinear conjugate-gradient descent on the stirring coefficients.

Each outer iteration runs the state solve, the terminal Poisson solve
and the adjoint solve to obtain the exact discrete gradient, then takes
an Armijo-backtracked step along a conjugate direction.  The direction
update uses ``beta = |g_new| / |g_old|`` by default (``norm_ratio``);
the squared variant (``fletcher_reeves``) is selectable.  Whenever the
updated direction fails to be a descent direction the iteration restarts
from steepest descent, which keeps the recorded objective sequence
non-increasing.  The trial step is warm-started from the previously
accepted one (first trial: ``1 / |g0|``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .objective import objective_and_gradient, _context, _terminal_pieces, \
    _penalty
from .transport import ControlSchedule

__all__ = ["OptimizerConfig", "OptimizationReport", "optimize"]


@dataclass
class OptimizerConfig:
    """Knobs of the descent loop.

    ``eps_stop`` is the relative-objective-change stopping tolerance;
    ``alpha0`` overrides the default first trial step when set.
    """

    c: float = 1.0e-4
    shrink: float = 0.5
    alpha0: float | None = None
    eps_stop: float = 1.0e-6
    max_outer: int = 100
    max_backtracks: int = 40
    beta_rule: str = "norm_ratio"

    def __post_init__(self):
        if not 0.0 < self.c < 1.0:
            raise ValueError("Armijo constant c must lie in (0, 1)")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink factor must lie in (0, 1)")
        if self.eps_stop <= 0.0:
            raise ValueError("eps_stop must be positive")
        if self.beta_rule not in ("norm_ratio", "fletcher_reeves"):
            raise ValueError(f"unknown beta_rule {self.beta_rule!r}")


@dataclass
class OptimizationReport:
    """Per-iteration record of the descent.

    Entry 0 describes the starting point (step and backtracks zero).
    ``objectives`` is non-increasing by construction; ``restarts[k]``
    flags iterations that fell back to steepest descent.
    """

    objectives: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    alphas: list = field(default_factory=list)
    backtracks: list = field(default_factory=list)
    restarts: list = field(default_factory=list)
    termination: str = ""
    final_coeffs: np.ndarray | None = None
    dt: float = 0.0

    @property
    def n_iterations(self):
        return len(self.objectives) - 1

    def to_dict(self):
        return {
            "objectives": [float(v) for v in self.objectives],
            "grad_norms": [float(v) for v in self.grad_norms],
            "alphas": [float(v) for v in self.alphas],
            "backtracks": [int(v) for v in self.backtracks],
            "restarts": [bool(v) for v in self.restarts],
            "termination": self.termination,
            "n_iterations": self.n_iterations,
        }


def optimize(mesh, theta0, schedule0, tables, gamma, config=None,
             tol=1.0e-12, memory_budget=None):
    """Minimize the mixing objective over piecewise-constant coefficients.

    Returns ``(schedule, report)``.  On a failed line search even along
    steepest descent the loop terminates with reason ``"stalled"`` and
    returns the best iterate seen (not an error); other terminations are
    ``"converged"`` (relative objective change below ``eps_stop``) and
    ``"max_outer"``.
    """
    config = OptimizerConfig() if config is None else config
    theta0 = np.asarray(theta0, dtype=float)
    if not np.all(np.isfinite(schedule0.coeffs)):
        raise ValueError("initial schedule contains non-finite entries")
    advection, laplacian = _context(mesh, tables, None, None)
    dt = schedule0.dt

    def sched(v):
        return ControlSchedule(dt, v)

    def objective_only(v):
        # forward + Poisson solve; returns the trajectory for reuse
        traj, _, mix2 = _terminal_pieces(
            mesh, theta0, sched(v), advection, laplacian, tol,
            memory_budget=memory_budget)
        return 0.5 * mix2 + _penalty(sched(v), gamma), traj

    v = schedule0.coeffs.copy()
    J, g = objective_and_gradient(
        mesh, theta0, sched(v), tables, gamma, tol=tol, advection=advection,
        laplacian=laplacian, memory_budget=memory_budget)
    gnorm = float(np.linalg.norm(g))

    report = OptimizationReport(dt=dt)
    report.objectives.append(J)
    report.grad_norms.append(gnorm)
    report.alphas.append(0.0)
    report.backtracks.append(0)
    report.restarts.append(False)

    best_J, best_v = J, v.copy()
    d = -g
    alpha_trial = config.alpha0 if config.alpha0 is not None else \
        1.0 / max(gnorm, np.finfo(float).tiny)
    termination = "max_outer"

    for _ in range(config.max_outer):
        restarted = False
        gd = float(np.vdot(g, d))
        if gd >= 0.0:
            d = -g
            gd = -float(np.vdot(g, g))
            restarted = True

        accepted = None
        while True:
            alpha = alpha_trial
            for bt in range(config.max_backtracks):
                trial = v + alpha * d
                J_trial, traj_trial = objective_only(trial)
                if J_trial <= J + config.c * alpha * gd:
                    accepted = (trial, J_trial, traj_trial, alpha, bt)
                    break
                alpha *= config.shrink
            if accepted is not None:
                break
            if restarted or not np.any(d + g):
                # already steepest descent: give up, keep the best point
                termination = "stalled"
                break
            d = -g
            gd = -float(np.vdot(g, g))
            restarted = True
        if accepted is None:
            break

        v, J, traj, alpha, bt = accepted
        alpha_trial = alpha
        J_prev = report.objectives[-1]
        _, g_new = objective_and_gradient(
            mesh, theta0, sched(v), tables, gamma, tol=tol,
            advection=advection, laplacian=laplacian, trajectory=traj,
            memory_budget=memory_budget)
        gnorm_new = float(np.linalg.norm(g_new))

        report.objectives.append(J)
        report.grad_norms.append(gnorm_new)
        report.alphas.append(alpha)
        report.backtracks.append(bt)
        report.restarts.append(restarted)
        if J < best_J:
            best_J, best_v = J, v.copy()

        if J_prev != 0.0 and abs(J - J_prev) / abs(J_prev) < config.eps_stop:
            termination = "converged"
            break

        if config.beta_rule == "norm_ratio":
            beta = gnorm_new / max(gnorm, np.finfo(float).tiny)
        else:
            beta = (gnorm_new / max(gnorm, np.finfo(float).tiny)) ** 2
        d = -g_new + beta * d
        g, gnorm = g_new, gnorm_new

    report.termination = termination
    if termination == "stalled":
        final = best_v
    else:
        final = v
    report.final_coeffs = final.copy()
    return ControlSchedule(dt, final.copy()), report
