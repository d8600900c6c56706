"""Periodic Taylor-Hood (P2/P1) space on the structured Kuhn mesh.

Velocity components are continuous piecewise quadratics with one DOF per
half-lattice point (vertices plus edge midpoints, 8n^3 scalar nodes);
pressure is continuous piecewise linear on the vertices (n^3 DOFs) with the
zero-mean constraint handled by a scalar bordering row in the saddle-point
solves.  Quadrature is a collapsed Gauss-Jacobi rule on the reference
tetrahedron, exact for total degree <= 2*nq1 - 1, so the default nq1 = 3 rule
integrates the skew-symmetrised convection form exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_jacobi

from .mesh import EDGE_PAIRS, TEMPLATE_VERTICES, PeriodicMesh, build_mesh


def simplex_quadrature(nq1: int = 3):
    """Collapsed Gauss-Jacobi rule on the unit tetrahedron.

    Returns (points (nq, 3), weights (nq,)) with sum(weights) = 1/6 and
    exactness for all monomials of total degree <= 2*nq1 - 1.
    """
    ta, wa = roots_jacobi(nq1, 2.0, 0.0)
    tb, wb = roots_jacobi(nq1, 1.0, 0.0)
    tc, wc = roots_jacobi(nq1, 0.0, 0.0)
    # map [-1,1] -> [0,1]; the Jacobi weight (1-t)^alpha absorbs the collapse
    # Jacobian (1-a)^2 (1-b); scaling 2^(-alpha-1) accounts for the interval map
    sa, qa = (ta + 1.0) / 2.0, wa / 8.0
    sb, qb = (tb + 1.0) / 2.0, wb / 4.0
    sc, qc = (tc + 1.0) / 2.0, wc / 2.0
    A, B, C = np.meshgrid(sa, sb, sc, indexing="ij")
    WA, WB, WC = np.meshgrid(qa, qb, qc, indexing="ij")
    x = A
    y = B * (1.0 - A)
    z = C * (1.0 - A) * (1.0 - B)
    pts = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)
    wts = (WA * WB * WC).ravel()
    return pts, wts


def p2_shape_values(bary: np.ndarray) -> np.ndarray:
    """P2 shape functions at barycentric points, shape (nq, 10)."""
    nq = bary.shape[0]
    out = np.empty((nq, 10))
    for i in range(4):
        out[:, i] = bary[:, i] * (2.0 * bary[:, i] - 1.0)
    for e, (i, j) in enumerate(EDGE_PAIRS):
        out[:, 4 + e] = 4.0 * bary[:, i] * bary[:, j]
    return out


def p2_shape_gradients(bary: np.ndarray, gradlam: np.ndarray) -> np.ndarray:
    """P2 gradients at barycentric points for one element geometry.

    gradlam is the (4, 3) array of barycentric-coordinate gradients; the
    result has shape (nq, 10, 3).
    """
    nq = bary.shape[0]
    out = np.empty((nq, 10, 3))
    for i in range(4):
        out[:, i, :] = (4.0 * bary[:, i] - 1.0)[:, None] * gradlam[i][None, :]
    for e, (i, j) in enumerate(EDGE_PAIRS):
        out[:, 4 + e, :] = 4.0 * (bary[:, i][:, None] * gradlam[j][None, :]
                                  + bary[:, j][:, None] * gradlam[i][None, :])
    return out


@dataclass
class TaylorHoodSpace:
    """Assembled geometry, quadrature and DOF maps for the P2/P1 pair."""

    mesh: PeriodicMesh
    nq: int
    bary: np.ndarray       # (nq, 4) barycentric quadrature points
    wq: np.ndarray         # (nq,) physical weights, shared by all elements
    phi: np.ndarray        # (nq, 10) P2 values
    grad: np.ndarray       # (6, nq, 10, 3) physical P2 gradients per template
    pphi: np.ndarray       # (nq, 4) P1 values
    offsets: np.ndarray    # (6, nq, 3) physical quadrature offsets in a cube
    gmap: np.ndarray       # (6, ncube, 10) global scalar velocity nodes
    pmap: np.ndarray       # (6, ncube, 4) global pressure nodes
    n_scalar: int          # velocity scalar nodes, 8 n^3
    n_pressure: int        # pressure nodes, n^3
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_velocity(self) -> int:
        return 3 * self.n_scalar

    @property
    def n(self) -> int:
        return self.mesh.n

    def velocity_at_quadrature(self, u: np.ndarray) -> np.ndarray:
        """Velocity values at all quadrature points, shape (6, ncube, 3, nq)."""
        comp = u.reshape(3, self.n_scalar)
        out = np.empty((6, self.gmap.shape[1], 3, self.nq))
        for t in range(6):
            u_loc = comp[:, self.gmap[t]]            # (3, ncube, 10)
            out[t] = np.einsum("cev,qv->ecq", u_loc, self.phi)
        return out

    def velocity_gradient_at_quadrature(self, u: np.ndarray) -> np.ndarray:
        """Velocity gradients at quadrature points, shape (6, ncube, nq, 3, 3)."""
        comp = u.reshape(3, self.n_scalar)
        out = np.empty((6, self.gmap.shape[1], self.nq, 3, 3))
        for t in range(6):
            u_loc = comp[:, self.gmap[t]]
            out[t] = np.einsum("cev,qvd->eqcd", u_loc, self.grad[t])
        return out


def build_space(n: int, nq1: int = 3) -> tuple[PeriodicMesh, TaylorHoodSpace]:
    """Deterministic mesh, numbering and quadrature for n cells per axis."""
    mesh = build_mesh(n)
    a = mesh.a
    ref_pts, ref_wts = simplex_quadrature(nq1)
    nq = ref_pts.shape[0]
    bary = np.empty((nq, 4))
    bary[:, 1:] = ref_pts
    bary[:, 0] = 1.0 - ref_pts.sum(axis=1)
    phi = p2_shape_values(bary)
    pphi = bary.copy()
    wq = ref_wts * a**3  # |det| of the affine map is a^3 for every Kuhn tet

    grads = np.empty((6, nq, 10, 3))
    offsets = np.empty((6, nq, 3))
    for t in range(6):
        verts = TEMPLATE_VERTICES[t].astype(np.float64)  # unit cube units
        J = (verts[1:] - verts[0]).T * a                 # columns = edges
        gradxi = np.linalg.inv(J)                        # row i = grad xi_i
        gradlam = np.vstack([-gradxi.sum(axis=0), gradxi])
        grads[t] = p2_shape_gradients(bary, gradlam)
        offsets[t] = a * (bary @ verts)

    ncube = n**3
    two_n = 2 * n
    cube = mesh.cube_coords  # (ncube, 3)
    gmap = np.empty((6, ncube, 10), dtype=np.int64)
    pmap = np.empty((6, ncube, 4), dtype=np.int64)
    for t in range(6):
        verts = TEMPLATE_VERTICES[t]
        local = np.empty((10, 3), dtype=np.int64)
        local[:4] = 2 * verts
        for e, (i, j) in enumerate(EDGE_PAIRS):
            local[4 + e] = verts[i] + verts[j]
        lat = (2 * cube[:, None, :] + local[None, :, :]) % two_n
        gmap[t] = (lat[..., 0] * two_n + lat[..., 1]) * two_n + lat[..., 2]
        plat = (cube[:, None, :] + verts[None, :, :]) % n
        pmap[t] = (plat[..., 0] * n + plat[..., 1]) * n + plat[..., 2]

    return mesh, TaylorHoodSpace(
        mesh=mesh, nq=nq, bary=bary, wq=wq, phi=phi, grad=grads, pphi=pphi,
        offsets=offsets, gmap=gmap, pmap=pmap,
        n_scalar=8 * ncube, n_pressure=ncube,
    )


class SpectralSampler:
    """Exact evaluation of a spectral field at every quadrature point.

    Quadrature points form n^3 translated copies of 6*nq in-cube offsets, so
    for each offset the evaluation reduces to folding the coefficients modulo
    n and one small inverse FFT; this requires n to divide N.  A generic
    (slower) chunked contraction covers the non-divisible case.
    """

    def __init__(self, space: TaylorHoodSpace, N: int):
        from .. import spectral as sp

        self.space = space
        self.N = N
        self.n = space.mesh.n
        self.fast = (N % self.n == 0)
        k1 = np.fft.fftfreq(N, d=1.0 / N)
        self.k1 = k1
        if self.fast:
            offs = space.offsets.reshape(-1, 3)  # (6*nq, 3)
            self.phase = [np.exp(1j * np.outer(offs[:, ax], k1)) for ax in range(3)]
        self.kvec = sp.wavegrids(N)[0]

    def _fold_eval(self, stacked: np.ndarray) -> np.ndarray:
        """Evaluate stacked coefficient fields at all points; (nfield, 6, nq, ncube)."""
        N, n = self.N, self.n
        space = self.space
        m = N // n
        nf = stacked.shape[0]
        npts = 6 * space.nq
        out = np.empty((nf, npts, n**3))
        for p in range(npts):
            ph = (self.phase[0][p][:, None, None]
                  * self.phase[1][p][None, :, None]
                  * self.phase[2][p][None, None, :])
            folded = (stacked * ph).reshape(nf, m, n, m, n, m, n).sum(axis=(1, 3, 5))
            vals = np.fft.ifftn(folded, axes=(-3, -2, -1)) * n**3
            out[:, p, :] = np.real(vals).reshape(nf, -1)
        return out.reshape(nf, 6, space.nq, n**3)

    def _generic_eval(self, stacked: np.ndarray) -> np.ndarray:
        space = self.space
        n = self.n
        a = space.mesh.a
        pts = (a * space.mesh.cube_coords[None, None, :, :]
               + space.offsets.reshape(6, space.nq, 1, 3)[:, :, :, :]).reshape(-1, 3)
        k1 = self.k1
        nf = stacked.shape[0]
        out = np.empty((nf, pts.shape[0]))
        for lo in range(0, pts.shape[0], 2048):
            chunk = pts[lo:lo + 2048]
            e1 = np.exp(1j * np.outer(chunk[:, 0], k1))
            e2 = np.exp(1j * np.outer(chunk[:, 1], k1))
            e3 = np.exp(1j * np.outer(chunk[:, 2], k1))
            vals = np.einsum("pa,pb,pc,fabc->fp", e1, e2, e3, stacked,
                             optimize=True)
            out[:, lo:lo + 2048] = np.real(vals)
        return out.reshape(nf, 6, space.nq, n**3)

    def _eval(self, stacked: np.ndarray) -> np.ndarray:
        if self.fast:
            return self._fold_eval(stacked)
        return self._generic_eval(stacked)

    def values(self, field) -> np.ndarray:
        """Field values at quadrature points, shape (6, ncube, 3, nq)."""
        vals = self._eval(field.coeffs)
        return np.transpose(vals, (1, 3, 0, 2))  # (6, ncube, 3, nq)

    def values_and_gradients(self, field):
        """(values (6, ncube, 3, nq), gradients (6, ncube, nq, 3, 3))."""
        c = field.coeffs
        stacked = np.concatenate(
            [c] + [1j * self.kvec[d][None] * c for d in range(3)], axis=0)
        ev = self._eval(stacked)  # (12, 6, nq, ncube)
        vals = np.transpose(ev[:3], (1, 3, 0, 2))
        grads = ev[3:].reshape(3, 3, 6, self.space.nq, -1)  # (deriv, comp, ...)
        grads = np.transpose(grads, (2, 4, 3, 1, 0))        # (6, ncube, nq, comp, deriv)
        return vals, grads

    def scalar_values(self, field) -> np.ndarray:
        """Scalar field values at quadrature points, shape (6, ncube, nq)."""
        vals = self._eval(field.coeffs[None])
        return np.transpose(vals[0], (0, 2, 1))


def spectral_sampler(space: TaylorHoodSpace, N: int) -> SpectralSampler:
    key = ("sampler", N)
    if key not in space._cache:
        space._cache[key] = SpectralSampler(space, N)
    return space._cache[key]
