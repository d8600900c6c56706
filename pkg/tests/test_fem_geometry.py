from collections import Counter
from math import factorial

import numpy as np
import pytest

import snslab.fem as fem


def test_mesh_counts_n2():
    mesh, space = fem.build_space(2)
    assert mesh.n_cells == 48
    assert mesh.vertices.shape[0] == 8
    assert space.n_pressure == 8
    assert space.n_scalar == 64  # vertices + edges = 8 n^3
    assert space.n_velocity == 192


def test_mesh_counts_n3():
    mesh, _ = fem.build_space(3)
    assert mesh.n_cells == 6 * 27


def test_mesh_size_scaling():
    assert fem.build_mesh(4).h / fem.build_mesh(2).h == pytest.approx(0.5)
    assert fem.build_mesh(2).h == pytest.approx(np.pi * np.sqrt(3.0))


def test_mesh_rejects_degenerate():
    with pytest.raises(ValueError):
        fem.build_mesh(1)


def _face_keys(mesh, space):
    """Canonical periodic keys for all tet faces, via half-lattice corners."""
    two_n = 2 * mesh.n
    keys = []
    from snslab.fem.mesh import TEMPLATE_VERTICES
    for t in range(6):
        corners = 2 * TEMPLATE_VERTICES[t]
        for e, cube in enumerate(mesh.cube_coords):
            base = 2 * cube
            pts = base[None, :] + corners
            for drop in range(4):
                tri = np.delete(pts, drop, axis=0)
                shift = (tri.min(axis=0) // two_n) * two_n
                tri = tri - shift
                keys.append(tuple(sorted(map(tuple, tri.tolist()))))
    return keys


def test_periodic_complex_is_consistent():
    mesh, space = fem.build_space(2)
    n3 = mesh.n ** 3
    # distinct quadratic nodes fill the half lattice exactly
    assert len(np.unique(space.gmap)) == 8 * n3
    # every face is shared by exactly two tets
    counts = Counter(_face_keys(mesh, space))
    assert set(counts.values()) == {2}
    faces = len(counts)
    edges = 8 * n3 - n3  # quadratic nodes minus vertices = edge midpoints
    verts = n3
    tets = 6 * n3
    assert faces == 12 * n3
    assert verts - edges + faces - tets == 0  # flat 3-torus Euler characteristic


def test_quadrature_exact_to_degree_five():
    pts, wts = fem.simplex_quadrature(3)
    assert wts.sum() == pytest.approx(1.0 / 6.0, rel=1e-14)
    worst = 0.0
    for a in range(6):
        for b in range(6 - a):
            for c in range(6 - a - b):
                got = float(np.sum(wts * pts[:, 0]**a * pts[:, 1]**b
                                   * pts[:, 2]**c))
                want = (factorial(a) * factorial(b) * factorial(c)
                        / factorial(a + b + c + 3))
                worst = max(worst, abs(got - want) / want)
    assert worst < 1e-13


def test_quadrature_weights_cover_volume():
    _, space = fem.build_space(3)
    total = 6 * space.gmap.shape[1] * space.wq.sum()
    assert total == pytest.approx((2 * np.pi) ** 3, rel=1e-13)


def test_p2_partition_of_unity():
    _, space = fem.build_space(2)
    assert np.allclose(space.phi.sum(axis=1), 1.0, atol=1e-13)
    for t in range(6):
        assert np.allclose(space.grad[t].sum(axis=1), 0.0, atol=1e-12)


def test_mesh_dump(tmp_path):
    mesh, space = fem.build_space(2)
    out = tmp_path / "mesh.txt"
    fem.dump_mesh(mesh, space, out)
    text = out.read_text()
    assert "periodic mesh n=2 cells=48" in text
    assert text.count("\n") > 48
