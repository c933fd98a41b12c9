import numpy as np
import pytest

import mixopt as mx
from mixopt.mesh import BOUNDARY


def test_cartesian_2x2_geometry():
    m = mx.build_cartesian(2, 2)
    assert m.n_cells == 4
    assert np.allclose(m.volumes, 0.25)
    assert m.interior.size == 4
    assert np.allclose(m.f_area[m.interior], 0.5)


def test_cartesian_3x2_hand_counts():
    m = mx.build_cartesian(3, 2)
    assert abs(m.volumes.sum() - 1.0) < 1e-14
    assert m.interior.size == 7          # 2*2 vertical + 3*1 horizontal
    assert m.h == 0.5


def test_cartesian_production_size():
    m = mx.build_cartesian(500, 500)
    assert m.n_cells == 250_000
    assert m.h == pytest.approx(0.002)
    assert m.interior.size == 499 * 500 + 500 * 499


@pytest.mark.parametrize("nx,ny", [(1, 4), (4, 1), (0, 0)])
def test_cartesian_rejects_degenerate(nx, ny):
    with pytest.raises(ValueError):
        mx.build_cartesian(nx, ny)


def test_polar_disc_area():
    m = mx.build_polar(2, 4, (0.5, 0.5), 0.5)
    assert abs(m.volumes.sum() - np.pi * 0.25) < 1e-12


def test_polar_innermost_ring_volume():
    m = mx.build_polar(3, 6, (0.0, 0.0), 1.0)
    expected = 0.5 * (1.0 / 9.0) * (np.pi / 3.0)
    assert m.volumes[0] == pytest.approx(expected, rel=1e-14)


def test_polar_production_size():
    m = mx.build_polar(500, 500, (0.5, 0.5), 0.5)
    assert m.n_cells == 250_000
    assert abs(m.volumes.sum() - np.pi * 0.25) < 1e-12 * np.pi * 0.25


@pytest.mark.parametrize("n_r,n_phi,radius", [(1, 8, 1.0), (4, 2, 1.0),
                                              (4, 8, 0.0)])
def test_polar_rejects_degenerate(n_r, n_phi, radius):
    with pytest.raises(ValueError):
        mx.build_polar(n_r, n_phi, (0.0, 0.0), radius)


@pytest.mark.parametrize("mesh", [
    mx.build_cartesian(7, 5),
    mx.build_cartesian(16, 16),
    mx.build_polar(6, 9, (0.5, 0.5), 0.5),
    mx.build_polar(12, 16, (0.0, 0.0), 1.0),
], ids=["cart7x5", "cart16", "polar6x9", "polar12x16"])
def test_mesh_invariants(mesh):
    # volumes positive and closing to the domain area
    assert np.all(mesh.volumes > 0)
    assert abs(mesh.volumes.sum() - mesh.domain_volume) \
        < 1e-12 * mesh.domain_volume
    # unit normals
    assert np.abs(np.linalg.norm(mesh.f_normal, axis=1) - 1.0).max() < 1e-14
    # interior faces join two distinct cells at positive centroid distance
    ii = mesh.interior
    assert np.all(mesh.f_left[ii] != mesh.f_right[ii])
    assert np.all(mesh.f_dist[ii] > 0)
    assert np.all(mesh.f_right[mesh.boundary_faces] == BOUNDARY)
    # per-cell closure of exact face-normal integrals
    assert mesh.cell_closure_defect() < 1e-12 * mesh.f_area.max() * 4
    # regularity constants exist
    c1, c2 = mesh.regularity_constants()
    assert c1 > 0 and np.isfinite(c2)


def test_face_orientation_matches_endpoints():
    # rotating p1 - p0 clockwise by 90 degrees must give the stored
    # normal direction (exact for straight faces, chordwise for arcs)
    for mesh in (mx.build_cartesian(5, 4),
                 mx.build_polar(5, 8, (0.5, 0.5), 0.5)):
        p = mesh.node_coords[mesh.f_nodes]
        tang = p[:, 1] - p[:, 0]
        rot = np.column_stack([tang[:, 1], -tang[:, 0]])
        rot /= np.linalg.norm(rot, axis=1)[:, None]
        dots = np.sum(rot * mesh.f_normal, axis=1)
        straight = ~mesh.f_is_arc
        assert np.all(dots[straight] > 1.0 - 1e-12)
        assert np.all(dots[~straight] > 0.5)


def test_cell_face_adjacency_reproduces_perimeter():
    mesh = mx.build_cartesian(4, 3)
    hx, hy = 0.25, 1.0 / 3.0
    for k in range(mesh.n_cells):
        ids, signs = mesh.faces_of_cell(k)
        assert len(ids) == 4
        assert mesh.f_area[ids].sum() == pytest.approx(2 * (hx + hy))
        assert np.all((signs == 1) | (signs == -1))

    mesh = mx.build_polar(4, 6, (0.0, 0.0), 1.0)
    dr, dphi = 0.25, 2 * np.pi / 6
    for k in range(mesh.n_cells):
        ids, _ = mesh.faces_of_cell(k)
        ring = k // 6
        r0, r1 = ring * dr, (ring + 1) * dr
        expected = 2 * dr + (r0 + r1) * dphi   # inner arc absent for ring 0
        assert mesh.f_area[ids].sum() == pytest.approx(expected)
        assert len(ids) == (3 if ring == 0 else 4)


def test_cell_and_face_accessors():
    mesh = mx.build_cartesian(3, 3)
    c = mesh.cell(4)
    assert c.id == 4 and c.volume == pytest.approx(1 / 9)
    f = mesh.face(int(mesh.interior[0]))
    assert f.area > 0 and f.right != BOUNDARY
    assert np.isfinite(f.center_distance)
    fb = mesh.face(int(mesh.boundary_faces[0]))
    assert fb.right == BOUNDARY and np.isnan(fb.center_distance)


def test_project_constant_is_exact():
    for mesh in (mx.build_cartesian(5, 7),
                 mx.build_polar(4, 6, (0.5, 0.5), 0.5)):
        vals = mx.project_initial_data(mesh, lambda x, y: np.ones_like(x))
        assert np.all(vals == 1.0)


def test_project_sine_matches_row_averages():
    # exact per-row cell average of sin(2 pi y) over [y_j, y_j + h];
    # 4-point Gauss on cells as coarse as h = 1/4 carries ~1e-8 error
    mesh = mx.build_cartesian(4, 4)
    vals = mx.project_initial_data(mesh, lambda x, y: np.sin(2 * np.pi * y))
    h = 0.25
    for j in range(4):
        avg = (np.cos(2 * np.pi * j * h) - np.cos(2 * np.pi * (j + 1) * h)) \
            / (2 * np.pi * h)
        col = vals.reshape(4, 4)[:, j]
        assert np.abs(col - avg).max() < 1e-7
    # first row of the 4x4 grid averages to 2/pi
    assert vals.reshape(4, 4)[0, 0] == pytest.approx(2 / np.pi, abs=1e-7)
    # the quadrature error vanishes rapidly under refinement
    fine = mx.build_cartesian(4, 32)
    vals = mx.project_initial_data(fine, lambda x, y: np.sin(2 * np.pi * y))
    h = 1.0 / 32.0
    j = np.arange(32)
    avg = (np.cos(2 * np.pi * j * h) - np.cos(2 * np.pi * (j + 1) * h)) \
        / (2 * np.pi * h)
    assert np.abs(vals.reshape(4, 32) - avg[None, :]).max() < 1e-13


def test_project_zero_mean_fields():
    mesh = mx.build_cartesian(6, 8)
    vals = mx.project_initial_data(mesh, lambda x, y: np.sin(2 * np.pi * y))
    assert abs(np.dot(mesh.volumes, vals)) < 1e-13


def test_project_sharp_jump_production_grid():
    mesh = mx.build_cartesian(500, 500)
    vals = mx.project_initial_data(
        mesh, lambda x, y: np.tanh((y - 0.5) / 0.01))
    assert abs(np.dot(mesh.volumes, vals)) < 1e-13
    # saturates to +-1 in double precision away from the interface
    assert vals.min() >= -1.0 and vals.max() <= 1.0
    assert vals.max() > 0.99 and vals.min() < -0.99
    mid = vals.reshape(500, 500)[:, 250]
    assert np.abs(mid).max() < 0.2


def test_mesh_arrays_read_only():
    mesh = mx.build_cartesian(3, 3)
    with pytest.raises(ValueError):
        mesh.volumes[0] = 2.0
