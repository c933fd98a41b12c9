"""Central-flux advection operators and time-symmetric implicit stepping.

The divergence of ``u * y`` is discretized per cell as the volume-scaled
sum of central face fluxes ``(y_K + y_L)/2 * flux``.  With exact
single-valued fluxes this operator is skew-symmetric in the
volume-weighted inner product, so the trapezoidal update
``(I + D) x = (I - D) y`` with ``D = dt/2 * sum_i c_i D_i`` is an
isometry: discrete mass, energy and the state-adjoint pairing are
conserved to solver tolerance.  The implicit systems are solved by
restarted GMRES run in the same weighted inner product, warm-started at
the previous state (the initial residual is then a divergence image,
which keeps the mass component of the iterates exactly untouched).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "SolverError",
    "ControlSchedule",
    "AdvectionOperator",
    "Trajectory",
    "apply_divergence",
    "cn_step",
    "solve_forward",
    "solve_adjoint",
    "mass",
    "energy",
    "pairing",
    "gmres_weighted",
    "TRAJECTORY_MEMORY_BUDGET",
]

#: Full trajectories larger than this (bytes) switch to checkpoint storage.
TRAJECTORY_MEMORY_BUDGET = 2 * 1024 ** 3


class SolverError(RuntimeError):
    """Linear solver failed to reach the requested residual."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass
class ControlSchedule:
    """Piecewise-constant stirring coefficients.

    ``coeffs`` has one row per basis flow and one column per time
    interval; interval ``n`` covers ``[n*dt, (n+1)*dt)``.
    """

    dt: float
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.atleast_2d(np.asarray(self.coeffs, dtype=float))
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    @property
    def m(self):
        return self.coeffs.shape[0]

    @property
    def n_steps(self):
        return self.coeffs.shape[1]

    @property
    def t_final(self):
        return self.dt * self.n_steps


def mass(mesh, theta):
    """Discrete mass: sum of cell values times cell volumes."""
    mesh.check_state(theta)
    return float(np.dot(mesh.volumes, theta))


def energy(mesh, theta):
    """Discrete squared L2 norm in the volume-weighted inner product."""
    mesh.check_state(theta)
    return mesh.inner(theta, theta)


def pairing(mesh, a, b):
    """Volume-weighted inner product of two cell-value vectors."""
    mesh.check_state(a, b)
    return mesh.inner(a, b)


class AdvectionOperator:
    """Sparse central-flux divergence operators for a family of flows.

    One CSR matrix per basis flow, all sharing the same sparsity pattern,
    so the coefficient-weighted combination used at each time step is a
    single vector operation on the shared data arrays.
    """

    def __init__(self, mesh, tables):
        self.mesh = mesh
        self.tables = list(tables)
        if not self.tables:
            raise ValueError("need at least one flux table")
        ii = mesh.interior
        left = mesh.f_left[ii]
        right = mesh.f_right[ii]
        rows = np.concatenate([left, left, right, right])
        cols = np.concatenate([left, right, right, left])
        inv_l = 0.5 / mesh.volumes[left]
        inv_r = 0.5 / mesh.volumes[right]
        mats = []
        for t in self.tables:
            if t.mesh is not mesh:
                raise ValueError("flux table belongs to a different mesh")
            phi = t.fluxes
            data = np.concatenate([phi * inv_l, phi * inv_l,
                                   -phi * inv_r, -phi * inv_r])
            m = sp.coo_matrix((data, (rows, cols)),
                              shape=(mesh.n_cells, mesh.n_cells)).tocsr()
            m.sum_duplicates()
            mats.append(m)
        self._pattern = mats[0]
        for m in mats[1:]:
            if not (np.array_equal(m.indptr, self._pattern.indptr)
                    and np.array_equal(m.indices, self._pattern.indices)):
                raise AssertionError("flux tables produced unequal patterns")
        self._data = np.vstack([m.data for m in mats])
        self.m = len(mats)

    def combined(self, coeffs):
        """CSR matrix of ``sum_i coeffs[i] * D_i``."""
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.m,):
            raise ValueError(
                f"expected {self.m} coefficients, got shape {coeffs.shape}")
        data = coeffs @ self._data
        return sp.csr_matrix(
            (data, self._pattern.indices, self._pattern.indptr),
            shape=self._pattern.shape)

    def apply(self, coeffs, y):
        self.mesh.check_state(np.asarray(y))
        return self.combined(coeffs) @ y

    def apply_single(self, i, y):
        """Action of the i-th basis divergence alone."""
        data = self._data[i]
        mat = sp.csr_matrix(
            (data, self._pattern.indices, self._pattern.indptr),
            shape=self._pattern.shape)
        return mat @ y

    def single(self, i):
        return sp.csr_matrix(
            (self._data[i], self._pattern.indices, self._pattern.indptr),
            shape=self._pattern.shape)


def apply_divergence(mesh, tables, coeffs, y):
    """One-off application of the combined divergence; see the class."""
    y = np.asarray(y, dtype=float)
    return AdvectionOperator(mesh, tables).apply(coeffs, y)


def gmres_weighted(matvec, b, weights, x0=None, tol=1.0e-12, restart=50,
                   maxiter=2000):
    """Restarted GMRES in the inner product ``<a, b> = sum a*b*weights``.

    Stops when the true residual satisfies ``|b - A x| <= tol * |b|`` in
    the weighted norm.  Raises :class:`SolverError` (carrying the achieved
    residual) if ``maxiter`` total Arnoldi steps are exhausted.
    """

    def wdot(u, v):
        return float(np.dot(u * weights, v))

    def wnorm(u):
        return np.sqrt(max(wdot(u, u), 0.0))

    bnorm = wnorm(b)
    if bnorm == 0.0:
        return np.zeros_like(b)
    x = np.zeros_like(b) if x0 is None else x0.copy()
    target = tol * bnorm
    total = 0
    while True:
        r = b - matvec(x)
        beta = wnorm(r)
        if beta <= target:
            return x
        if total >= maxiter:
            raise SolverError(
                f"GMRES stalled at relative residual {beta / bnorm:.3e} "
                f"after {total} iterations", residual=beta / bnorm,
                iterations=total)
        n_inner = min(restart, maxiter - total)
        V = np.empty((n_inner + 1, b.size))
        V[0] = r / beta
        H = np.zeros((n_inner + 1, n_inner))
        cs = np.zeros(n_inner)
        sn = np.zeros(n_inner)
        g = np.zeros(n_inner + 1)
        g[0] = beta
        k = 0
        for j in range(n_inner):
            w = matvec(V[j])
            norm_in = wnorm(w)
            for i in range(j + 1):
                hij = wdot(V[i], w)
                H[i, j] = hij
                w -= hij * V[i]
            # one re-orthogonalization pass when cancellation was severe
            if wnorm(w) < 0.5 * norm_in:
                for i in range(j + 1):
                    corr = wdot(V[i], w)
                    H[i, j] += corr
                    w -= corr * V[i]
            hlast = wnorm(w)
            H[j + 1, j] = hlast
            for i in range(j):
                tmp = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = tmp
            denom = np.hypot(H[j, j], H[j + 1, j])
            cs[j] = H[j, j] / denom if denom else 1.0
            sn[j] = H[j + 1, j] / denom if denom else 0.0
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            k = j + 1
            total += 1
            if abs(g[k]) <= target or hlast == 0.0:
                break
            V[j + 1] = w / hlast
        y = np.linalg.solve(np.triu(H[:k, :k]), g[:k])
        x = x + y @ V[:k]
        # loop back: the true residual is re-checked at the top


def cn_step(mesh, advection, coeffs, dt, theta, direction="forward",
            tol=1.0e-12, x0=None):
    """One trapezoidal step of the semi-discrete advection system.

    Solves ``(I + D) x = (I - D) theta`` with
    ``D = s * dt/2 * sum_i coeffs[i] * D_i`` and ``s = +1`` forward,
    ``-1`` backward (the scheme is time-symmetric, so the backward sweep
    uses the identical update with the time step negated).  A zero
    coefficient vector short-circuits to the identity.
    """
    if direction not in ("forward", "backward"):
        raise ValueError(f"unknown direction {direction!r}")
    theta = np.asarray(theta, dtype=float)
    mesh.check_state(theta)
    coeffs = np.asarray(coeffs, dtype=float)
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if not np.any(coeffs) or dt == 0.0:
        return theta.copy()
    sgn = 1.0 if direction == "forward" else -1.0
    D = advection.combined(sgn * 0.5 * dt * coeffs)
    rhs = theta - D @ theta
    return gmres_weighted(lambda v: v + D @ v, rhs, mesh.volumes,
                          x0=theta if x0 is None else x0, tol=tol)


class Trajectory:
    """Time series of cell-value states with optional checkpoint storage.

    Full storage keeps all ``n_steps + 1`` states.  Above the memory
    budget only every ``stride``-th state is kept and segments are
    recomputed on demand from the nearest checkpoint (gradient assembly
    walks the index downward, so one cached segment at a time suffices).
    """

    def __init__(self, mesh, n_steps, replay, initial, budget=None):
        budget = TRAJECTORY_MEMORY_BUDGET if budget is None else budget
        total = (n_steps + 1) * mesh.n_cells * 8
        self.mesh = mesh
        self.n_steps = n_steps
        self._replay = replay
        self.stride = max(1, -(-total // max(budget, 1)))
        if self.stride == 1:
            self._states = np.empty((n_steps + 1, mesh.n_cells))
            self._states[0] = initial
            self._checkpoints = None
        else:
            self._states = None
            self._checkpoints = {0: initial.copy()}
        self._segment = {0: initial}

    def _record(self, n, state):
        if self._states is not None:
            self._states[n] = state
        elif n % self.stride == 0 or n == self.n_steps:
            self._checkpoints[n] = state.copy()

    def state(self, n):
        if not 0 <= n <= self.n_steps:
            raise IndexError(f"step {n} outside 0..{self.n_steps}")
        if self._states is not None:
            return self._states[n]
        if n in self._checkpoints:
            return self._checkpoints[n]
        if n in self._segment:
            return self._segment[n]
        base = (n // self.stride) * self.stride
        upto = min(base + self.stride, self.n_steps)
        self._segment = {base: self._checkpoints[base]}
        cur = self._checkpoints[base]
        for k in range(base, upto):
            cur = self._replay(k, cur)
            self._segment[k + 1] = cur
        return self._segment[n]

    def __getitem__(self, n):
        return self.state(n)

    def __len__(self):
        return self.n_steps + 1

    @property
    def final(self):
        return self.state(self.n_steps)


def solve_forward(mesh, advection, theta0, schedule, tol=1.0e-12,
                  memory_budget=None):
    """March the state forward through the whole schedule.

    Returns a :class:`Trajectory` ``traj`` with ``traj[0] == theta0`` and
    ``traj[n]`` the state after ``n`` steps.
    """
    theta0 = np.asarray(theta0, dtype=float)
    mesh.check_state(theta0)
    if schedule.m != advection.m:
        raise ValueError(
            f"schedule has {schedule.m} coefficient rows but the operator "
            f"holds {advection.m} flows")

    def replay(n, state):
        return cn_step(mesh, advection, schedule.coeffs[:, n], schedule.dt,
                       state, "forward", tol)

    traj = Trajectory(mesh, schedule.n_steps, replay, theta0.copy(),
                      budget=memory_budget)
    cur = theta0.copy()
    for n in range(schedule.n_steps):
        cur = replay(n, cur)
        traj._record(n + 1, cur)
    return traj


def solve_adjoint(mesh, advection, eta_terminal, schedule, tol=1.0e-12,
                  memory_budget=None):
    """March the adjoint backward from its terminal condition.

    ``traj[n_steps] == eta_terminal``; step ``n`` reuses the coefficients
    of forward interval ``n``.  The backward update is the algebraic
    inverse of the forward one, so the state-adjoint pairing is constant
    across steps up to solver tolerance.
    """
    eta_terminal = np.asarray(eta_terminal, dtype=float)
    mesh.check_state(eta_terminal)
    if schedule.m != advection.m:
        raise ValueError(
            f"schedule has {schedule.m} coefficient rows but the operator "
            f"holds {advection.m} flows")

    n_steps = schedule.n_steps

    def replay_backward(k, state):
        # checkpoint replay runs in reverse index order: stored key k
        # holds rho^(n_steps - k)
        n = n_steps - 1 - k
        return cn_step(mesh, advection, schedule.coeffs[:, n], schedule.dt,
                       state, "backward", tol)

    rev = Trajectory(mesh, n_steps, replay_backward, eta_terminal.copy(),
                     budget=memory_budget)
    cur = eta_terminal.copy()
    for k in range(n_steps):
        cur = replay_backward(k, cur)
        rev._record(k + 1, cur)
    return _ReversedTrajectory(rev)


class _ReversedTrajectory:
    """Index adapter: entry ``n`` of the adjoint is reverse entry ``N-n``."""

    def __init__(self, rev):
        self._rev = rev
        self.mesh = rev.mesh
        self.n_steps = rev.n_steps

    def state(self, n):
        return self._rev.state(self.n_steps - n)

    def __getitem__(self, n):
        return self.state(n)

    def __len__(self):
        return self.n_steps + 1

    @property
    def final(self):
        return self.state(self.n_steps)
