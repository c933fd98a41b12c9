"""Control-volume meshes of the unit square and the disc.

Two admissible partitions are provided: a uniform Cartesian grid of the
unit square and a polar grid of a disc (annular-sector cells; the
innermost ring consists of full sectors meeting at the centre, so there
is no degenerate zero-area cell).  A mesh exposes cells (volumes,
centroids) and oriented faces (endpoints, areas, left/right adjacency,
unit normals, centroid distances) as flat numpy arrays, which is all the
discrete operators need.  Meshes are immutable after construction: the
arrays are marked read-only and may be shared freely across threads.

Face orientation convention
---------------------------
Every face stores its endpoints ``(p0, p1)`` ordered so that rotating
``p1 - p0`` clockwise by 90 degrees gives the left-to-right normal
direction.  Circumferential faces of the polar mesh are genuine arcs:
``p0``/``p1`` are the arc endpoints, the stored area is the exact arc
length and the stored unit normal is radial at the arc midpoint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BOUNDARY",
    "Cell",
    "Face",
    "Mesh",
    "build_cartesian",
    "build_polar",
    "project_initial_data",
]

#: Marker used in ``Mesh.f_right`` for faces lying on the domain boundary.
BOUNDARY = -1


@dataclass(frozen=True)
class Cell:
    """One control volume: index, area and centroid."""

    id: int
    volume: float
    centroid: np.ndarray


@dataclass(frozen=True)
class Face:
    """One oriented face of the partition.

    ``right`` equals :data:`BOUNDARY` for faces on the domain boundary;
    ``center_distance`` (distance between the adjacent cell centroids) is
    ``nan`` there.
    """

    id: int
    endpoints: np.ndarray  # (2, 2): rows p0, p1
    area: float
    left: int
    right: int
    unit_normal: np.ndarray
    center_distance: float


class Mesh:
    """Geometry and adjacency of an admissible control-volume partition.

    Attributes
    ----------
    kind : str
        ``"cartesian"`` or ``"polar"``.
    domain_tag : str
        ``"square"`` or ``"disc"``; flows carry the same tag.
    h : float
        Characteristic size: ``max(1/nx, 1/ny)`` for the Cartesian grid,
        ``max(R/n_r, 2*pi*R/n_phi)`` for the polar grid.
    volumes, centroids : ndarray
        Per-cell area ``|K|`` and centroid ``x_K``.
    node_coords : ndarray
        Unique face-endpoint coordinates.  Fluxes of divergence-free
        fields are stream-function differences between endpoints, so
        endpoints shared by neighbouring faces must be bitwise identical;
        storing them once guarantees that.
    f_nodes, f_area, f_left, f_right, f_normal, f_dist, f_nint : ndarray
        Per-face endpoint indices, area, adjacent cells, unit normal,
        centroid distance (nan on the boundary) and the exact integral of
        the outward-of-left normal over the face (used by closure tests).
    interior, boundary_faces : ndarray
        Index arrays; interior faces always come first in face order.
    """

    def __init__(self, kind, domain_tag, h, domain_volume, volumes, centroids,
                 node_coords, f_nodes, f_area, f_left, f_right, f_normal,
                 f_dist, f_nint, f_is_arc, params):
        self.kind = kind
        self.domain_tag = domain_tag
        self.h = float(h)
        self.domain_volume = float(domain_volume)
        self.volumes = volumes
        self.centroids = centroids
        self.node_coords = node_coords
        self.f_nodes = f_nodes
        self.f_area = f_area
        self.f_left = f_left
        self.f_right = f_right
        self.f_normal = f_normal
        self.f_dist = f_dist
        self.f_nint = f_nint
        self.f_is_arc = f_is_arc
        self.params = dict(params)

        self.n_cells = volumes.shape[0]
        self.n_faces = f_area.shape[0]
        int_mask = f_right >= 0
        # builders emit interior faces first; keep that contract explicit
        n_int = int(np.sum(int_mask))
        if not np.all(int_mask[:n_int]):
            raise ValueError("interior faces must precede boundary faces")
        self.interior = np.arange(n_int)
        self.boundary_faces = np.arange(n_int, self.n_faces)

        self._build_cell_face_adjacency()
        for arr in (self.volumes, self.centroids, self.node_coords,
                    self.f_nodes, self.f_area, self.f_left, self.f_right,
                    self.f_normal, self.f_dist, self.f_nint, self.f_is_arc):
            arr.flags.writeable = False

    def _build_cell_face_adjacency(self):
        face_ids = np.concatenate([np.arange(self.n_faces), self.interior])
        owners = np.concatenate([self.f_left, self.f_right[self.interior]])
        signs = np.concatenate([np.ones(self.n_faces, dtype=np.int8),
                                -np.ones(self.interior.size, dtype=np.int8)])
        order = np.argsort(owners, kind="stable")
        self._cf_ids = face_ids[order]
        self._cf_signs = signs[order]
        counts = np.bincount(owners, minlength=self.n_cells)
        self._cf_offsets = np.concatenate([[0], np.cumsum(counts)])

    # -- element accessors -------------------------------------------------

    def cell(self, k):
        return Cell(int(k), float(self.volumes[k]), self.centroids[k].copy())

    def face(self, j):
        pts = self.node_coords[self.f_nodes[j]]
        return Face(int(j), pts.copy(), float(self.f_area[j]),
                    int(self.f_left[j]), int(self.f_right[j]),
                    self.f_normal[j].copy(), float(self.f_dist[j]))

    def faces_of_cell(self, k):
        """Face ids of cell ``k`` and their signs (+1 where ``k`` is left)."""
        lo, hi = self._cf_offsets[k], self._cf_offsets[k + 1]
        return self._cf_ids[lo:hi], self._cf_signs[lo:hi]

    # -- inner product of the cell-average space ---------------------------

    def inner(self, a, b):
        """Volume-weighted inner product of two cell-value vectors."""
        return float(np.dot(a * self.volumes, b))

    def norm(self, a):
        return float(np.sqrt(max(self.inner(a, a), 0.0)))

    def check_state(self, *states):
        for s in states:
            if s.shape != (self.n_cells,):
                raise ValueError(
                    f"state length {s.shape} does not match mesh with "
                    f"{self.n_cells} cells")

    # -- diagnostics used by the test suite --------------------------------

    def regularity_constants(self):
        """Return ``(c1, c2)`` with ``c1*h^2 <= |K|`` and ``|dK| <= c2*h``."""
        perims = np.zeros(self.n_cells)
        np.add.at(perims, self.f_left, self.f_area)
        np.add.at(perims, self.f_right[self.interior],
                  self.f_area[self.interior])
        c1 = float(self.volumes.min() / self.h ** 2)
        c2 = float(perims.max() / self.h)
        return c1, c2

    def cell_closure_defect(self):
        """Max over cells of |sum of signed exact face-normal integrals|."""
        acc = np.zeros((self.n_cells, 2))
        np.add.at(acc, self.f_left, self.f_nint)
        np.subtract.at(acc, self.f_right[self.interior],
                       self.f_nint[self.interior])
        return float(np.abs(acc).max())

    def __repr__(self):
        return (f"Mesh(kind={self.kind!r}, cells={self.n_cells}, "
                f"faces={self.n_faces}, h={self.h:.6g})")


def build_cartesian(nx, ny):
    """Uniform ``nx`` x ``ny`` grid of the unit square.

    Parameters
    ----------
    nx, ny : int
        Cells per direction, both at least 2.

    Returns
    -------
    Mesh
        ``nx*ny`` square cells; ``(nx-1)*ny + nx*(ny-1)`` interior faces.
        Boundary faces carry ``right == BOUNDARY`` and are excluded from
        flux assembly (no-penetration).
    """
    nx, ny = int(nx), int(ny)
    if nx < 2 or ny < 2:
        raise ValueError(f"need nx, ny >= 2, got ({nx}, {ny})")
    xs = np.linspace(0.0, 1.0, nx + 1)
    ys = np.linspace(0.0, 1.0, ny + 1)
    hx, hy = 1.0 / nx, 1.0 / ny

    node_id = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)
    node_coords = np.column_stack([
        np.repeat(xs, ny + 1), np.tile(ys, nx + 1)])

    def cid(i, j):
        return i * ny + j

    volumes = np.full(nx * ny, hx * hy)
    cx, cy = np.meshgrid(0.5 * (xs[:-1] + xs[1:]), 0.5 * (ys[:-1] + ys[1:]),
                         indexing="ij")
    centroids = np.column_stack([cx.ravel(), cy.ravel()])

    f_nodes, f_area, f_left, f_right = [], [], [], []
    f_normal, f_is_arc = [], []

    # interior vertical faces: between cell (i-1, j) and (i, j), normal +x,
    # endpoints bottom -> top
    i, j = np.meshgrid(np.arange(1, nx), np.arange(ny), indexing="ij")
    i, j = i.ravel(), j.ravel()
    f_nodes.append(np.column_stack([node_id[i, j], node_id[i, j + 1]]))
    f_area.append(np.full(i.size, hy))
    f_left.append(cid(i - 1, j))
    f_right.append(cid(i, j))
    f_normal.append(np.tile([1.0, 0.0], (i.size, 1)))

    # interior horizontal faces: between (i, j-1) and (i, j), normal +y,
    # endpoints right -> left
    i, j = np.meshgrid(np.arange(nx), np.arange(1, ny), indexing="ij")
    i, j = i.ravel(), j.ravel()
    f_nodes.append(np.column_stack([node_id[i + 1, j], node_id[i, j]]))
    f_area.append(np.full(i.size, hx))
    f_left.append(cid(i, j - 1))
    f_right.append(cid(i, j))
    f_normal.append(np.tile([0.0, 1.0], (i.size, 1)))

    # boundary faces (outward normal, right = BOUNDARY)
    j = np.arange(ny)
    f_nodes.append(np.column_stack([node_id[0, j + 1], node_id[0, j]]))
    f_area.append(np.full(ny, hy))
    f_left.append(cid(0, j))
    f_right.append(np.full(ny, BOUNDARY))
    f_normal.append(np.tile([-1.0, 0.0], (ny, 1)))

    f_nodes.append(np.column_stack([node_id[nx, j], node_id[nx, j + 1]]))
    f_area.append(np.full(ny, hy))
    f_left.append(cid(nx - 1, j))
    f_right.append(np.full(ny, BOUNDARY))
    f_normal.append(np.tile([1.0, 0.0], (ny, 1)))

    i = np.arange(nx)
    f_nodes.append(np.column_stack([node_id[i, 0], node_id[i + 1, 0]]))
    f_area.append(np.full(nx, hx))
    f_left.append(cid(i, 0))
    f_right.append(np.full(nx, BOUNDARY))
    f_normal.append(np.tile([0.0, -1.0], (nx, 1)))

    f_nodes.append(np.column_stack([node_id[i + 1, ny], node_id[i, ny]]))
    f_area.append(np.full(nx, hx))
    f_left.append(cid(i, ny - 1))
    f_right.append(np.full(nx, BOUNDARY))
    f_normal.append(np.tile([0.0, 1.0], (nx, 1)))

    f_nodes = np.concatenate(f_nodes)
    f_area = np.concatenate(f_area)
    f_left = np.concatenate(f_left).astype(np.int64)
    f_right = np.concatenate(f_right).astype(np.int64)
    f_normal = np.concatenate(f_normal)
    f_is_arc = np.zeros(f_area.size, dtype=bool)
    f_nint = f_normal * f_area[:, None]

    f_dist = np.full(f_area.size, np.nan)
    ii = f_right >= 0
    f_dist[ii] = np.linalg.norm(
        centroids[f_right[ii]] - centroids[f_left[ii]], axis=1)

    return Mesh("cartesian", "square", max(hx, hy), 1.0, volumes, centroids,
                node_coords, f_nodes, f_area, f_left, f_right, f_normal,
                f_dist, f_nint, f_is_arc, {"nx": nx, "ny": ny})


def build_polar(n_r, n_phi, center, radius):
    """Polar grid of the disc of given ``center`` and ``radius``.

    ``n_r`` rings of ``n_phi`` annular sectors; ring radii ``r_i = i*R/n_r``,
    sector angles ``phi_j = 2*pi*j/n_phi``.  Cell volumes and face areas
    (straight radial segments, circumferential arcs) are exact.  Angular
    adjacency wraps modulo ``n_phi``; the outer arcs are boundary faces.
    """
    n_r, n_phi = int(n_r), int(n_phi)
    radius = float(radius)
    if n_r < 2 or n_phi < 3 or radius <= 0.0:
        raise ValueError(
            f"need n_r >= 2, n_phi >= 3, radius > 0, got "
            f"({n_r}, {n_phi}, {radius})")
    cx, cy = float(center[0]), float(center[1])
    dr = radius / n_r
    dphi = 2.0 * np.pi / n_phi
    r_edges = np.linspace(0.0, radius, n_r + 1)
    phi_edges = dphi * np.arange(n_phi)          # node angles, no wrap dup
    cos_p, sin_p = np.cos(phi_edges), np.sin(phi_edges)

    # node 0 is the centre; node(i>=1, j) = 1 + (i-1)*n_phi + j
    node_coords = np.empty((1 + n_r * n_phi, 2))
    node_coords[0] = (cx, cy)
    rr = np.repeat(r_edges[1:], n_phi)
    cc = np.tile(cos_p, n_r)
    ss = np.tile(sin_p, n_r)
    node_coords[1:, 0] = cx + rr * cc
    node_coords[1:, 1] = cy + rr * ss

    def nid(i, j):
        j = np.asarray(j) % n_phi
        return np.where(np.asarray(i) == 0, 0, 1 + (np.asarray(i) - 1) * n_phi + j)

    def cid(i, j):
        return np.asarray(i) * n_phi + np.asarray(j) % n_phi

    # exact volumes and true area centroids of annular sectors
    i_ring = np.repeat(np.arange(n_r), n_phi)
    j_sec = np.tile(np.arange(n_phi), n_r)
    r0, r1 = r_edges[i_ring], r_edges[i_ring + 1]
    p0a, p1a = dphi * j_sec, dphi * (j_sec + 1)
    volumes = 0.5 * (r1 ** 2 - r0 ** 2) * dphi
    mom = (r1 ** 3 - r0 ** 3) / 3.0
    centroids = np.column_stack([
        cx + mom * (np.sin(p1a) - np.sin(p0a)) / volumes,
        cy + mom * (np.cos(p0a) - np.cos(p1a)) / volumes])

    f_nodes, f_area, f_left, f_right = [], [], [], []
    f_normal, f_nint, f_is_arc = [], [], []

    # radial faces at angle phi_j: left sector j-1, right sector j;
    # normal is the counterclockwise azimuthal direction, endpoints
    # outer -> inner
    i, j = i_ring, j_sec
    phi = dphi * j
    f_nodes.append(np.column_stack([nid(i + 1, j), nid(i, j)]))
    f_area.append(np.full(i.size, dr))
    f_left.append(cid(i, j - 1))
    f_right.append(cid(i, j))
    nrm = np.column_stack([-np.sin(phi), np.cos(phi)])
    f_normal.append(nrm)
    f_nint.append(nrm * dr)
    f_is_arc.append(np.zeros(i.size, dtype=bool))

    # interior circumferential arcs at radius r_{i+1}: left ring i,
    # right ring i+1; endpoints counterclockwise, outward radial normal
    def arcs(i, j):
        r = r_edges[i + 1]
        a0, a1 = dphi * j, dphi * (j + 1)
        mid = 0.5 * (a0 + a1)
        nodes = np.column_stack([nid(i + 1, j), nid(i + 1, j + 1)])
        area = np.full(j.size, r * dphi)
        normal = np.column_stack([np.cos(mid), np.sin(mid)])
        nint = np.column_stack([r * (np.sin(a1) - np.sin(a0)),
                                r * (np.cos(a0) - np.cos(a1))])
        return nodes, area, normal, nint

    i, j = np.meshgrid(np.arange(n_r - 1), np.arange(n_phi), indexing="ij")
    i, j = i.ravel(), j.ravel()
    nodes, area, normal, nint = arcs(i, j)
    f_nodes.append(nodes)
    f_area.append(area)
    f_left.append(cid(i, j))
    f_right.append(cid(i + 1, j))
    f_normal.append(normal)
    f_nint.append(nint)
    f_is_arc.append(np.ones(i.size, dtype=bool))

    # boundary arcs at radius R
    j = np.arange(n_phi)
    i = np.full(n_phi, n_r - 1)
    nodes, area, normal, nint = arcs(i, j)
    f_nodes.append(nodes)
    f_area.append(area)
    f_left.append(cid(i, j))
    f_right.append(np.full(n_phi, BOUNDARY))
    f_normal.append(normal)
    f_nint.append(nint)
    f_is_arc.append(np.ones(n_phi, dtype=bool))

    f_nodes = np.concatenate(f_nodes)
    f_area = np.concatenate(f_area)
    f_left = np.concatenate(f_left).astype(np.int64)
    f_right = np.concatenate(f_right).astype(np.int64)
    f_normal = np.concatenate(f_normal)
    f_nint = np.concatenate(f_nint)
    f_is_arc = np.concatenate(f_is_arc)

    f_dist = np.full(f_area.size, np.nan)
    ii = f_right >= 0
    f_dist[ii] = np.linalg.norm(
        centroids[f_right[ii]] - centroids[f_left[ii]], axis=1)

    h = max(dr, radius * dphi)
    return Mesh("polar", "disc", h, np.pi * radius ** 2, volumes, centroids,
                node_coords, f_nodes, f_area, f_left, f_right, f_normal,
                f_dist, f_nint, f_is_arc,
                {"n_r": n_r, "n_phi": n_phi, "center": (cx, cy),
                 "radius": radius})


def project_initial_data(mesh, f, order=4):
    """Cell averages of a scalar field by tensor Gauss quadrature.

    Parameters
    ----------
    mesh : Mesh
    f : callable
        Vectorized ``f(x, y)``; evaluated pointwise, never differentiated.
    order : int
        Gauss points per direction (per cell).  Polar cells are
        integrated in ``(r, phi)`` with the Jacobian ``r``.

    Returns
    -------
    ndarray
        One average per cell.  Deterministic for fixed ``order``; a
        constant field projects to itself exactly.
    """
    xi, w = np.polynomial.legendre.leggauss(int(order))
    if mesh.kind == "cartesian":
        nx, ny = mesh.params["nx"], mesh.params["ny"]
        hx, hy = 1.0 / nx, 1.0 / ny
        cxs = mesh.centroids[:, 0]
        cys = mesh.centroids[:, 1]
        num = np.zeros(mesh.n_cells)
        den = 0.0
        for a in range(order):
            xa = cxs + 0.5 * hx * xi[a]
            for b in range(order):
                yb = cys + 0.5 * hy * xi[b]
                num += (w[a] * w[b]) * f(xa, yb)
                den += w[a] * w[b]
        return num / den

    n_r, n_phi = mesh.params["n_r"], mesh.params["n_phi"]
    cx, cy = mesh.params["center"]
    radius = mesh.params["radius"]
    dr = radius / n_r
    dphi = 2.0 * np.pi / n_phi
    i_ring = np.repeat(np.arange(n_r), n_phi)
    j_sec = np.tile(np.arange(n_phi), n_r)
    r_lo = dr * i_ring
    phi_lo = dphi * j_sec
    num = np.zeros(mesh.n_cells)
    den = np.zeros(mesh.n_cells)
    for a in range(order):
        ra = r_lo + dr * 0.5 * (1.0 + xi[a])
        for b in range(order):
            pb = phi_lo + dphi * 0.5 * (1.0 + xi[b])
            wgt = (w[a] * w[b]) * ra          # polar Jacobian
            num += wgt * f(cx + ra * np.cos(pb), cy + ra * np.sin(pb))
            den += wgt
    return num / den
