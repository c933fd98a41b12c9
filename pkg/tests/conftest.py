"""Shared fixtures and independent oracles for the test suite.

The oracles here deliberately re-derive quantities from first principles
(dense loops, quadrature, bordered dense solves) so that they share no
code path with the implementations they check.
"""

import numpy as np
import pytest

import mixopt as mx


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


def dense_divergence(mesh, table):
    """Dense central-flux divergence built face by face."""
    n = mesh.n_cells
    D = np.zeros((n, n))
    for j, flux in zip(mesh.interior, table.fluxes):
        K = mesh.f_left[j]
        L = mesh.f_right[j]
        D[K, K] += 0.5 * flux / mesh.volumes[K]
        D[K, L] += 0.5 * flux / mesh.volumes[K]
        D[L, L] -= 0.5 * flux / mesh.volumes[L]
        D[L, K] -= 0.5 * flux / mesh.volumes[L]
    return D


def dense_neumann_laplacian(mesh):
    """Dense two-point operator built face by face."""
    n = mesh.n_cells
    A = np.zeros((n, n))
    for j in mesh.interior:
        K = mesh.f_left[j]
        L = mesh.f_right[j]
        trans = mesh.f_area[j] / mesh.f_dist[j]
        A[K, K] += trans / mesh.volumes[K]
        A[K, L] -= trans / mesh.volumes[K]
        A[L, L] += trans / mesh.volumes[L]
        A[L, K] -= trans / mesh.volumes[L]
    return A


def dense_zero_mean_solve(mesh, rhs):
    """Bordered dense solve of the zero-mean Poisson problem."""
    n = mesh.n_cells
    A = dense_neumann_laplacian(mesh)
    W = np.diag(mesh.volumes)
    B = np.zeros((n + 1, n + 1))
    B[:n, :n] = W @ A
    B[:n, n] = mesh.volumes
    B[n, :n] = mesh.volumes
    rhs_b = np.concatenate([mesh.volumes * rhs, [0.0]])
    sol = np.linalg.solve(B, rhs_b)
    return sol[:n]


def quad_face_flux(mesh, flow, face_id, npts=20, panels=1):
    """Composite Gauss quadrature of velocity . normal along one face.

    Straight faces are parametrized along the stored endpoint segment;
    arc faces along the circular arc of the polar mesh, with the normal
    evaluated pointwise.  Independent of the stream-function shortcut.
    ``panels`` subdivides the face (needed when the integrand has a
    curvature kink, e.g. where a face crosses a cut-off vortex rim).
    """
    xi, w = np.polynomial.legendre.leggauss(npts)
    edges = np.linspace(-1.0, 1.0, panels + 1)
    s = (0.5 * (edges[:-1] + edges[1:])[:, None]
         + 0.5 * np.diff(edges)[:, None] * xi[None, :]).ravel()
    ww = np.tile(w / panels, panels)
    p0, p1 = mesh.node_coords[mesh.f_nodes[face_id]]
    if not mesh.f_is_arc[face_id]:
        mid = 0.5 * (p0 + p1)
        half = 0.5 * (p1 - p0)
        u, v = flow.velocity(mid[0] + half[0] * s, mid[1] + half[1] * s)
        nx, ny = mesh.f_normal[face_id]
        length = np.hypot(*(p1 - p0))
        return 0.5 * length * float(np.dot(ww, u * nx + v * ny))
    cx, cy = mesh.params["center"]
    r = np.hypot(p0[0] - cx, p0[1] - cy)
    a0 = np.arctan2(p0[1] - cy, p0[0] - cx)
    a1 = np.arctan2(p1[1] - cy, p1[0] - cx)
    if a1 <= a0:
        a1 += 2.0 * np.pi
    ang = 0.5 * (a0 + a1) + 0.5 * (a1 - a0) * s
    u, v = flow.velocity(cx + r * np.cos(ang), cy + r * np.sin(ang))
    # outward radial normal, pointwise along the arc
    integrand = u * np.cos(ang) + v * np.sin(ang)
    return 0.5 * (a1 - a0) * r * float(np.dot(ww, integrand))


def staggered_neumann_pairing(f, n=6000):
    """<f, eta> for -eta'' = f on (0, 1) with no-flux ends, zero mean.

    Dense second-order finite differences on a staggered grid; used to
    pin the analytic mixedness constants independently of the library.
    """
    h = 1.0 / n
    y = (np.arange(n) + 0.5) * h
    A = np.zeros((n, n))
    idx = np.arange(n)
    A[idx[:-1], idx[:-1] + 1] -= 1.0 / h ** 2
    A[idx[:-1], idx[:-1]] += 1.0 / h ** 2
    A[idx[1:], idx[1:] - 1] -= 1.0 / h ** 2
    A[idx[1:], idx[1:]] += 1.0 / h ** 2
    B = np.zeros((n + 1, n + 1))
    B[:n, :n] = A
    B[:n, n] = 1.0
    B[n, :n] = h
    rhs = np.concatenate([f(y), [0.0]])
    eta = np.linalg.solve(B, rhs)[:n]
    return h * float(np.dot(f(y), eta))


def small_cellular_setup(n=16, modes=(1, 2)):
    mesh = mx.build_cartesian(n, n)
    tables = [mx.assemble_flux_table(mesh, mx.cellular_basis(i))
              for i in modes]
    return mesh, tables
