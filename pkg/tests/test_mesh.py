"""Tests for mesh generation, geometry, quality metrics, and mesh I/O."""

import json
import math

import numpy as np
import pytest

from conftest import poly_area
from polyvem import mesh as pm


# ---------------------------------------------------------------------------
# 2D generators: counts, topology, areas


def test_uniform_square_n1_counts():
    m = pm.generate_square_mesh(1, "uniform")
    assert m.dim == 2
    assert m.n_cells == 1
    assert m.n_vertices == 4
    assert m.n_edges == 4
    assert np.all(m.boundary_edges)
    m.validate()


def test_uniform_square_n4_counts_and_euler():
    m = pm.generate_square_mesh(4, "uniform")
    assert m.n_cells == 16
    assert m.n_vertices == 25
    assert m.n_edges == 40
    assert m.n_vertices - m.n_edges + m.n_cells == 1
    m.validate()


@pytest.mark.parametrize("family", [
    "uniform", "smalledge(0.1)", "hanging", "distorted(3)",
])
def test_square_families_tile_unit_area(family):
    m = pm.generate_square_mesh(4, family)
    m.validate()
    total = sum(poly_area(m.cell_points(i)) for i in range(m.n_cells))
    assert math.isclose(total, 1.0, rel_tol=1e-12)
    assert m.n_vertices - m.n_edges + m.n_cells == 1


def test_generators_reject_bad_parameters():
    with pytest.raises(ValueError):
        pm.generate_square_mesh(0, "uniform")
    with pytest.raises(ValueError):
        pm.generate_square_mesh(2, "smalledge(0.7)")
    with pytest.raises(ValueError):
        pm.generate_square_mesh(2, "smalledge(0)")
    with pytest.raises(ValueError):
        pm.generate_square_mesh(2, "nosuchfamily")
    with pytest.raises(ValueError):
        pm.generate_cube_mesh(0, "uniform")


def test_smalledge_n2_geometry_frozen():
    m = pm.generate_square_mesh(2, "smalledge(0.1)")
    m.validate()
    assert m.n_cells == 4
    # every grid segment carries one split vertex
    assert m.n_vertices == 21
    assert m.n_edges == 24
    assert m.n_vertices - m.n_edges + m.n_cells == 1
    lengths = np.linalg.norm(
        m.vertices[m.edges[:, 1]] - m.vertices[m.edges[:, 0]], axis=1
    )
    assert abs(lengths.min() - 0.05) <= 1e-12
    for i in range(m.n_cells):
        loop = m.cells[i]
        assert len(loop) == 8
        pts = m.cell_points(i)
        el = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        # each cell owns an edge of the minimal length
        assert abs(el.min() - 0.05) <= 1e-12
        assert abs(el.max() / el.min() - 9.0) <= 1e-12


def test_smalledge_tau_ratio_scales_with_eps():
    for eps in (0.25, 0.01, 1e-4):
        m = pm.generate_square_mesh(2, f"smalledge({eps})")
        q = pm.quality_report(m)
        assert abs(q.max_tau - (1.0 - eps) / eps) <= 1e-9 * q.max_tau


def test_hanging_n4_counts_and_conformity():
    m = pm.generate_square_mesh(4, "hanging")
    m.validate()
    assert m.n_cells == 40
    assert m.n_vertices == 65
    assert m.n_edges == 104
    assert m.n_vertices - m.n_edges + m.n_cells == 1
    # a refined neighbor contributes its midpoint vertex to the coarse loop,
    # so the shared geometric segment appears as two mesh edges on both sides
    loop_sizes = sorted(len(c) for c in m.cells)
    assert loop_sizes[0] == 4
    assert loop_sizes[-1] > 4
    counts = np.zeros(m.n_edges, int)
    for i in range(m.n_cells):
        counts[m.cell_edge_ids[i]] += 1
    assert np.all((counts == 1) | (counts == 2))
    assert np.array_equal(counts == 1, m.boundary_edges)


def test_distorted_reproducible_and_bounded():
    a = pm.generate_square_mesh(4, "distorted(3)")
    b = pm.generate_square_mesh(4, "distorted(3)")
    c = pm.generate_square_mesh(4, "distorted(4)")
    assert np.array_equal(a.vertices, b.vertices)
    assert not np.array_equal(a.vertices, c.vertices)
    ref = pm.generate_square_mesh(4, "uniform")
    delta = np.linalg.norm(a.vertices - ref.vertices, axis=1)
    assert delta.max() <= 0.2 / 4 + 1e-15
    # boundary vertices are never moved
    assert np.allclose(a.vertices[a.boundary_vertices],
                       ref.vertices[ref.boundary_vertices])
    assert delta.max() > 0.0
    a.validate()


# ---------------------------------------------------------------------------
# cell geometry


def test_cell_geometry_unit_square():
    pts = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    g = pm.polygon_geometry(pts)
    assert math.isclose(g.h, math.sqrt(2.0), rel_tol=1e-14)
    assert math.isclose(g.measure, 1.0, rel_tol=1e-14)
    assert np.allclose(g.centroid, [0.5, 0.5])
    assert np.allclose(g.star_center, [0.5, 0.5])


def test_cell_geometry_l_shaped_hexagon():
    pts = np.array([[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]], float)
    g = pm.polygon_geometry(pts)
    assert math.isclose(g.measure, 3.0, rel_tol=1e-14)
    assert math.isclose(g.h, 2.0 * math.sqrt(2.0), rel_tol=1e-14)
    # the centroid (5/6, 5/6) can see every vertex, so it is kept
    assert np.allclose(g.star_center, [5.0 / 6.0, 5.0 / 6.0], atol=1e-12)
    assert np.all(g.star_center <= 1.0)


def test_cell_geometry_triangle():
    pts = np.array([[0, 0], [1, 0], [0, 1]], float)
    g = pm.polygon_geometry(pts)
    assert math.isclose(g.measure, 0.5, rel_tol=1e-14)
    assert math.isclose(g.h, math.sqrt(2.0), rel_tol=1e-14)


def test_star_center_found_when_centroid_outside_kernel():
    # tall L with a long foot: kernel is the region x,y <= 1 but the centroid
    # sits outside it, forcing the fallback search
    pts = np.array([[0, 0], [6, 0], [6, 1], [1, 1], [1, 6], [0, 6]], float)
    g = pm.polygon_geometry(pts)
    c = g.star_center
    assert c[0] <= 1.0 + 1e-9 and c[1] <= 1.0 + 1e-9
    centroid = g.centroid
    assert centroid[0] > 1.0 or centroid[1] > 1.0


def test_kernel_empty_raises():
    # U shape: no point sees both prongs
    pts = np.array(
        [[0, 0], [3, 0], [3, 3], [2, 3], [2, 1], [1, 1], [1, 3], [0, 3]], float
    )
    with pytest.raises(pm.KernelEmpty):
        pm.polygon_geometry(pts)


def test_generated_meshes_all_star_shaped():
    for family in ("uniform", "smalledge(0.01)", "hanging", "distorted(7)"):
        m = pm.generate_square_mesh(3, family)
        for i in range(m.n_cells):
            pm.cell_geometry(m, i)  # must not raise KernelEmpty


# ---------------------------------------------------------------------------
# quality report


def test_quality_uniform_square():
    m = pm.generate_square_mesh(4, "uniform")
    q = pm.quality_report(m)
    assert np.allclose(q.tau, 1.0)
    assert math.isclose(q.alpha_h, math.log(2.0), rel_tol=1e-14)
    assert q.beta_h is None
    # inscribed-kernel radius of a square of side s is s/2, h = s*sqrt(2)
    assert np.allclose(q.rho, 0.5 / math.sqrt(2.0), atol=1e-9)


def test_quality_smalledge_tau_frozen():
    for n in (1, 3):
        m = pm.generate_square_mesh(n, "smalledge(0.1)")
        q = pm.quality_report(m)
        assert abs(q.max_tau - 9.0) <= 1e-12 * 9.0
        assert math.isclose(q.alpha_h, math.log(10.0), rel_tol=1e-12)
        assert np.all(q.tau >= 1.0)
        assert np.all((q.rho > 0) & (q.rho <= 0.5))


# ---------------------------------------------------------------------------
# 3D generators


def test_cube_n1_counts():
    m = pm.generate_cube_mesh(1, "uniform")
    assert m.dim == 3
    assert m.n_cells == 1
    assert m.n_vertices == 8
    assert m.n_faces == 6
    assert m.n_edges == 12
    m.validate()
    g = pm.cell_geometry(m, 0)
    assert math.isclose(g.measure, 1.0, rel_tol=1e-12)
    assert math.isclose(g.h, math.sqrt(3.0), rel_tol=1e-14)


def test_cube_n2_counts_and_euler():
    m = pm.generate_cube_mesh(2, "uniform")
    assert m.n_cells == 8
    assert m.n_faces == 36
    assert m.n_vertices == 27
    assert m.n_edges == 54
    assert m.n_vertices - m.n_edges + m.n_faces - m.n_cells == 1
    m.validate()
    total = sum(pm.cell_geometry(m, i).measure for i in range(m.n_cells))
    assert math.isclose(total, 1.0, rel_tol=1e-12)


def test_cube_volumes_two_ways_agree():
    m = pm.generate_cube_mesh(2, "facesplit(0.2)")
    for i in range(m.n_cells):
        v_fan = m.cell_volume(i)
        v_div = m.cell_volume_divergence(i)
        assert abs(v_fan - v_div) <= 1e-10 * max(v_fan, 1e-30)
        assert math.isclose(v_fan, 0.125, rel_tol=1e-12)


def test_facesplit_n1_frozen():
    m = pm.generate_cube_mesh(1, "facesplit(0.25)")
    m.validate()
    assert m.n_cells == 1
    assert m.n_vertices == 20
    assert m.n_edges == 24
    assert m.n_faces == 6
    assert m.n_vertices - m.n_edges + m.n_faces - m.n_cells == 1
    for f in m.faces:
        assert len(f) == 8
    q = pm.quality_report(m)
    assert q.tau_face is not None
    assert abs(max(q.tau_face) - 3.0) <= 1e-12 * 3.0
    assert math.isclose(q.beta_h, math.log(4.0), rel_tol=1e-12)
    assert math.isclose(q.alpha_h, math.log(4.0), rel_tol=1e-12)


def test_facesplit_n2_counts():
    m = pm.generate_cube_mesh(2, "facesplit(0.1)")
    m.validate()
    assert m.n_cells == 8
    assert m.n_vertices == 81
    assert m.n_edges == 108
    assert m.n_faces == 36
    assert m.n_vertices - m.n_edges + m.n_faces - m.n_cells == 1


def test_nonplanar_face_rejected():
    m = pm.generate_cube_mesh(1, "uniform")
    verts = m.vertices.copy()
    # push one corner off the face planes
    verts[0] += np.array([0.1, 0.05, 0.02])
    bent = pm.PolyhedralMesh3(verts, [list(f) for f in m.faces],
                              [list(c) for c in m.cells])
    with pytest.raises(pm.MeshError):
        bent.validate()


def test_face_orientation_signs_opposite():
    m = pm.generate_cube_mesh(2, "uniform")
    seen = {}
    for ci, faces in enumerate(m.cells):
        for fid, sign in faces:
            seen.setdefault(fid, []).append(sign)
    for fid, signs in seen.items():
        if len(signs) == 2:
            assert signs[0] == -signs[1]
        else:
            assert m.boundary_faces[fid]


# ---------------------------------------------------------------------------
# mesh file I/O and CLI


def test_mesh_json_roundtrip_2d(tmp_path):
    m = pm.generate_square_mesh(3, "smalledge(0.2)")
    path = tmp_path / "mesh2.json"
    pm.save_mesh(m, path)
    data = json.loads(path.read_text())
    assert data["dim"] == 2
    m2 = pm.load_mesh(path)
    assert np.array_equal(m.vertices, m2.vertices)
    assert m.cells == m2.cells
    m2.validate()


def test_mesh_json_roundtrip_3d(tmp_path):
    m = pm.generate_cube_mesh(2, "facesplit(0.25)")
    path = tmp_path / "mesh3.json"
    pm.save_mesh(m, path)
    data = json.loads(path.read_text())
    assert data["dim"] == 3
    assert "faces" in data
    m2 = pm.load_mesh(path)
    assert np.array_equal(m.vertices, m2.vertices)
    assert m.faces == m2.faces
    assert m.cells == m2.cells
    m2.validate()


def test_cli_mesh_gen_and_check(tmp_path):
    from polyvem.cli import main

    out = tmp_path / "m.json"
    rc = main(["mesh", "gen", "--dim", "2", "--n", "4",
               "--family", "smalledge(0.1)", "--out", str(out)])
    assert rc == 0
    assert out.exists()
    assert main(["mesh", "check", "--in", str(out)]) == 0

    out3 = tmp_path / "m3.json"
    rc = main(["mesh", "gen", "--dim", "3", "--n", "2",
               "--family", "uniform", "--out", str(out3)])
    assert rc == 0
    assert main(["mesh", "check", "--in", str(out3)]) == 0


def test_cli_mesh_check_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"dim": 2, "vertices": [[0,0],[1,0]], "cells": [[0,1]]}')
    from polyvem.cli import main

    assert main(["mesh", "check", "--in", str(bad)]) != 0
