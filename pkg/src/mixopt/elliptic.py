"""Two-point-flux Neumann Laplacian and the mix-norm it induces.

The operator couples each cell to its interior neighbours with
transmissibility ``|face| / centroid distance``; no-flux boundary faces
contribute nothing.  It is self-adjoint and positive semidefinite in the
volume-weighted inner product with kernel exactly the constants, so the
zero-mean Poisson problem is solved by conjugate gradients with every
iterate reprojected onto the zero-mean subspace.  The mixedness of a
zero-mean field is then ``sqrt(<theta, solve(theta)>)``, the discrete
counterpart of the negative-index Sobolev norm used to score stirring.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .transport import SolverError

__all__ = ["NeumannLaplacian", "solve_poisson_zero_mean", "mix_norm"]


class NeumannLaplacian:
    """Sparse TPFA Laplacian with no-flux boundary on a given mesh."""

    def __init__(self, mesh):
        self.mesh = mesh
        ii = mesh.interior
        left = mesh.f_left[ii]
        right = mesh.f_right[ii]
        trans = mesh.f_area[ii] / mesh.f_dist[ii]
        rows = np.concatenate([left, left, right, right])
        cols = np.concatenate([left, right, right, left])
        inv_l = trans / mesh.volumes[left]
        inv_r = trans / mesh.volumes[right]
        data = np.concatenate([inv_l, -inv_l, inv_r, -inv_r])
        self.matrix = sp.coo_matrix(
            (data, (rows, cols)),
            shape=(mesh.n_cells, mesh.n_cells)).tocsr()
        # Gershgorin bound on the spectrum, used for the backward-error
        # floor of the iterative solve
        self.op_norm_bound = float(
            np.abs(self.matrix).sum(axis=1).max())

    def apply(self, y):
        self.mesh.check_state(np.asarray(y))
        return self.matrix @ y

    def project_zero_mean(self, y):
        """Remove the volume-weighted mean (the kernel direction)."""
        return y - np.dot(self.mesh.volumes, y) / self.mesh.domain_volume


def solve_poisson_zero_mean(laplacian, rhs, tol=1.0e-12, maxiter=None):
    """Zero-mean solution of the TPFA Neumann Poisson problem.

    The right-hand side is mean-corrected internally, so adding a
    constant to ``rhs`` does not change the answer.  Conjugate gradients
    run in the volume-weighted inner product; the solution and residual
    are reprojected onto the zero-mean subspace every iteration, which
    removes the singular direction without pinning any cell.

    The stopping test is ``|r| <= tol * |b|`` widened by the
    double-precision backward-error floor ``O(eps) * |L| * |x|``: for
    smooth data on fine grids that floor can exceed ``tol * |b|``, and no
    double-precision iteration can push the residual below it.

    Raises
    ------
    SolverError
        If the residual fails to reach the target within ``maxiter``
        iterations (default scales with mesh size).
    """
    mesh = laplacian.mesh
    rhs = np.asarray(rhs, dtype=float)
    mesh.check_state(rhs)
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if maxiter is None:
        maxiter = max(2000, 40 * int(np.ceil(np.sqrt(mesh.n_cells))))
    w = mesh.volumes
    proj = laplacian.project_zero_mean
    A = laplacian.matrix
    floor_coef = 10.0 * np.finfo(float).eps * laplacian.op_norm_bound

    b = proj(rhs)
    bnorm = np.sqrt(max(np.dot(b * w, b), 0.0))
    if bnorm == 0.0:
        return np.zeros_like(b)

    def target(x):
        xnorm = np.sqrt(max(float(np.dot(x * w, x)), 0.0))
        return tol * bnorm + floor_coef * xnorm

    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rz = float(np.dot(r * w, r))
    for _ in range(maxiter):
        Ap = A @ p
        alpha = rz / float(np.dot(p * w, Ap))
        x += alpha * p
        r -= alpha * Ap
        x = proj(x)
        r = proj(r)
        rnorm = np.sqrt(max(float(np.dot(r * w, r)), 0.0))
        if rnorm <= target(x):
            true_r = proj(b - A @ x)
            true_norm = np.sqrt(max(float(np.dot(true_r * w, true_r)), 0.0))
            if true_norm <= target(x):
                return x
            r = true_r
        rz_new = float(np.dot(r * w, r))
        p = r + (rz_new / rz) * p
        rz = rz_new
    achieved = np.sqrt(max(float(np.dot(r * w, r)), 0.0)) / bnorm
    raise SolverError(
        f"CG stalled at relative residual {achieved:.3e} after "
        f"{maxiter} iterations", residual=achieved, iterations=maxiter)


def mix_norm(laplacian, theta, tol=1.0e-12):
    """Mixedness of a cell field: small values mean well mixed.

    Computed as ``sqrt(<theta, eta>)`` with ``eta`` the zero-mean Poisson
    solution driven by ``theta`` (mean-corrected internally).  The inner
    value is clamped to zero when it is negative within ``10 * tol`` of
    rounding; a larger negative value indicates a broken operator and
    raises.
    """
    mesh = laplacian.mesh
    theta = np.asarray(theta, dtype=float)
    mesh.check_state(theta)
    corrected = laplacian.project_zero_mean(theta)
    eta = solve_poisson_zero_mean(laplacian, corrected, tol=tol)
    val = mesh.inner(corrected, eta)
    if val < 0.0:
        scale = max(mesh.inner(corrected, corrected), 1.0)
        if val < -10.0 * tol * scale:
            raise SolverError(
                f"mix-norm pairing came out negative ({val:.3e}) beyond "
                f"the rounding guard")
        val = 0.0
    return float(np.sqrt(val))
