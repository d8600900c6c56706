"""Structured periodic tetrahedral mesh of the box [0, 2pi)^3.

Each of the n^3 axis-aligned cubes is split into the six Kuhn tetrahedra
sharing the main diagonal, one per permutation of the axes.  The splitting is
identical in every cube, so face diagonals match across cube boundaries and
the mesh is quasi-uniform by construction.  All quadratic nodes (vertices and
edge midpoints) land on the uniform half-step lattice with 2n points per
axis, which makes periodic identification a lattice modulo operation.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

BOX = 2.0 * np.pi

# unit-cube vertices of the six Kuhn tetrahedra, one row of corners per template
def _templates() -> np.ndarray:
    temps = []
    for perm in sorted(permutations(range(3))):
        c0 = np.zeros(3, dtype=np.int64)
        c1 = c0.copy()
        c1[perm[0]] = 1
        c2 = c1.copy()
        c2[perm[1]] = 1
        c3 = np.ones(3, dtype=np.int64)
        temps.append(np.stack([c0, c1, c2, c3]))
    return np.stack(temps)  # (6, 4, 3)


TEMPLATE_VERTICES = _templates()
EDGE_PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


@dataclass(frozen=True)
class PeriodicMesh:
    """n^3 cubes, 6 tets each, with periodic vertex identification."""

    n: int
    a: float                 # cube edge length, 2*pi/n
    h: float                 # max tet diameter, a*sqrt(3)
    vertices: np.ndarray     # (n^3, 3) coordinates
    tets: np.ndarray         # (6*n^3, 4) global vertex ids
    cube_coords: np.ndarray  # (n^3, 3) integer cube indices, C order

    @property
    def n_cells(self) -> int:
        return self.tets.shape[0]


def build_mesh(n: int) -> PeriodicMesh:
    if n < 2:
        raise ValueError("need n >= 2 cells per axis for a sane periodic mesh")
    a = BOX / n
    idx = np.arange(n)
    ci, cj, ck = np.meshgrid(idx, idx, idx, indexing="ij")
    cube_coords = np.stack([ci.ravel(), cj.ravel(), ck.ravel()], axis=1)
    vertices = a * cube_coords.astype(np.float64)

    tets = []
    for t in range(6):
        corners = TEMPLATE_VERTICES[t]  # (4, 3)
        for v in range(4):
            lat = (cube_coords + corners[v]) % n
            tets.append((lat[:, 0] * n + lat[:, 1]) * n + lat[:, 2])
    # ordering: template-major, cube-minor
    tets = np.stack(tets, axis=1).reshape(6, 4, n**3)
    tets = np.concatenate([tets[t].T for t in range(6)], axis=0)

    return PeriodicMesh(n=n, a=a, h=a * np.sqrt(3.0), vertices=vertices,
                        tets=tets, cube_coords=cube_coords)


def dump_mesh(mesh: PeriodicMesh, space, file) -> None:
    """Plain-text audit listing of vertices, tets and DOF maps."""
    close = False
    if not hasattr(file, "write"):
        file = open(file, "w", encoding="utf-8")
        close = True
    try:
        file.write(f"periodic mesh n={mesh.n} cells={mesh.n_cells} "
                   f"h={mesh.h!r}\n")
        file.write("vertices (id x y z)\n")
        for i, v in enumerate(mesh.vertices):
            file.write(f"{i} {v[0]!r} {v[1]!r} {v[2]!r}\n")
        file.write("tets (id v0 v1 v2 v3)\n")
        for i, t in enumerate(mesh.tets):
            file.write(f"{i} {t[0]} {t[1]} {t[2]} {t[3]}\n")
        file.write("velocity scalar nodes per element (template cube: 10 ids)\n")
        for t in range(6):
            for e in range(mesh.n ** 3):
                ids = " ".join(str(x) for x in space.gmap[t][e])
                file.write(f"{t} {e}: {ids}\n")
        file.write("pressure nodes per element (template cube: 4 ids)\n")
        for t in range(6):
            for e in range(mesh.n ** 3):
                ids = " ".join(str(x) for x in space.pmap[t][e])
                file.write(f"{t} {e}: {ids}\n")
    finally:
        if close:
            file.close()
