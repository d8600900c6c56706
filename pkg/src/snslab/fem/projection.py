"""Projections onto the discretely divergence-free subspace and error norms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .. import spectral as sp
from .assemble import (StaticOperators, assemble_static, divergence_residual,
                       kkt_factor, kkt_solve)
from .space import TaylorHoodSpace, build_space, spectral_sampler

DIV_FLAG_TOL = 1e-9


@dataclass(frozen=True)
class FemState:
    """Taylor-Hood coefficients: velocity vector, zero-mean pressure, flag."""

    n: int
    velocity: np.ndarray
    pressure: np.ndarray
    div_free: bool

    def __post_init__(self):
        v = np.ascontiguousarray(self.velocity, dtype=np.float64)
        p = np.ascontiguousarray(self.pressure, dtype=np.float64)
        v.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "velocity", v)
        object.__setattr__(self, "pressure", p)


def zero_state(space: TaylorHoodSpace) -> FemState:
    return FemState(space.n, np.zeros(space.n_velocity),
                    np.zeros(space.n_pressure), True)


def field_values_at_quadrature(space: TaylorHoodSpace, evaluator) -> np.ndarray:
    """Evaluate a velocity field at all quadrature points, (6, ncube, 3, nq).

    Accepts a SpectralField (exact trigonometric sampling) or a callable
    mapping points (P, 3) to values (P, 3).
    """
    if isinstance(evaluator, sp.SpectralField):
        sampler = spectral_sampler(space, evaluator.N)
        return sampler.values(evaluator)
    a = space.mesh.a
    pts = (a * space.mesh.cube_coords[None, None, :, :]
           + space.offsets[:, :, None, :]).reshape(-1, 3)
    vals = np.asarray(evaluator(pts), dtype=np.float64)
    ncube = space.gmap.shape[1]
    vals = vals.reshape(6, space.nq, ncube, 3)
    return np.transpose(vals, (0, 2, 3, 1))


def node_points(space: TaylorHoodSpace) -> np.ndarray:
    """Coordinates of the scalar P2 nodes (the uniform half lattice)."""
    n = space.mesh.n
    step = np.pi / n
    idx = np.arange(2 * n)
    gi, gj, gk = np.meshgrid(idx, idx, idx, indexing="ij")
    return step * np.stack([gi.ravel(), gj.ravel(), gk.ravel()], axis=1)


def interpolate_velocity(evaluator, space: TaylorHoodSpace) -> np.ndarray:
    """Nodal P2 interpolation; returns a velocity coefficient vector."""
    pts = node_points(space)
    if isinstance(evaluator, sp.SpectralField):
        vals = sp.evaluate_at_points(evaluator, pts)
    else:
        vals = np.asarray(evaluator(pts), dtype=np.float64)
    return vals.T.ravel()


def velocity_load_vector(space: TaylorHoodSpace, values: np.ndarray) -> np.ndarray:
    """Quadrature realisation of the load (f, phi_i), values as (6,ncube,3,nq)."""
    ns = space.n_scalar
    rhs = np.zeros(3 * ns)
    for t in range(6):
        contrib = np.einsum("q,ecq,qv->cev", space.wq, values[t], space.phi)
        for c in range(3):
            np.add.at(rhs, c * ns + space.gmap[t].ravel(), contrib[c].ravel())
    return rhs


def project_l2_divfree(evaluator, space: TaylorHoodSpace,
                       ops: StaticOperators | None = None) -> FemState:
    """L2-orthogonal projection onto the discretely divergence-free subspace.

    Solves M u + B^T lam = (f, phi), B u = 0, with the pressure mean pinned;
    the multiplier is kept on the state for diagnostics.
    """
    if ops is None:
        ops = assemble_static(space)
    rhs = velocity_load_vector(space, field_values_at_quadrature(space, evaluator))
    lu = space._cache.get("kkt_mass")
    if lu is None:
        lu = kkt_factor(ops.M.tocsc(), ops)
        space._cache["kkt_mass"] = lu
    u, lam = kkt_solve(lu, ops, rhs)
    return FemState(space.n, u, lam,
                    divergence_residual(ops, u) <= DIV_FLAG_TOL)


def project_pressure(evaluator, space: TaylorHoodSpace,
                     ops: StaticOperators) -> np.ndarray:
    """Plain L2 projection onto the P1 pressure space."""
    if isinstance(evaluator, sp.ScalarSpectralField):
        sampler = spectral_sampler(space, evaluator.N)
        vals = sampler.scalar_values(evaluator)        # (6, ncube, nq)
    else:
        a = space.mesh.a
        pts = (a * space.mesh.cube_coords[None, None, :, :]
               + space.offsets[:, :, None, :]).reshape(-1, 3)
        ncube = space.gmap.shape[1]
        vals = np.asarray(evaluator(pts)).reshape(6, space.nq, ncube)
        vals = np.transpose(vals, (0, 2, 1))
    rhs = np.zeros(space.n_pressure)
    for t in range(6):
        contrib = np.einsum("q,eq,qp->ep", space.wq, vals[t], space.pphi)
        np.add.at(rhs, space.pmap[t].ravel(), contrib.ravel())
    return spla.spsolve(ops.Mp.tocsc(), rhs)


def fem_values_at_quadrature(space: TaylorHoodSpace, u: np.ndarray):
    return space.velocity_at_quadrature(u)


def error_vs_spectral(state: FemState, field: sp.SpectralField,
                      space: TaylorHoodSpace) -> tuple[float, float]:
    """Quadrature L2 and H1(gradient) errors between a FEM state and a field."""
    sampler = spectral_sampler(space, field.N)
    sv, sg = sampler.values_and_gradients(field)
    fv = space.velocity_at_quadrature(state.velocity)
    fg = space.velocity_gradient_at_quadrature(state.velocity)
    l2 = 0.0
    h1 = 0.0
    for t in range(6):
        dv = fv[t] - sv[t]
        dg = fg[t] - sg[t]
        l2 += float(np.einsum("q,ecq,ecq->", space.wq, dv, dv))
        h1 += float(np.einsum("q,eqcd,eqcd->", space.wq, dg, dg))
    return float(np.sqrt(l2)), float(np.sqrt(h1))


def pressure_error(q: np.ndarray, field: sp.ScalarSpectralField,
                   space: TaylorHoodSpace) -> float:
    sampler = spectral_sampler(space, field.N)
    sv = sampler.scalar_values(field)
    err = 0.0
    for t in range(6):
        fv = np.einsum("ep,qp->eq", q[space.pmap[t]], space.pphi)
        d = fv - sv[t]
        err += float(np.einsum("q,eq,eq->", space.wq, d, d))
    return float(np.sqrt(err))


@dataclass(frozen=True)
class RateRecord:
    """Log-log regression slopes of projection errors over a mesh ladder."""

    n_levels: tuple
    h_levels: tuple
    velocity_l2_errors: tuple
    velocity_h1_errors: tuple
    pressure_l2_errors: tuple
    velocity_l2_slope: float
    velocity_h1_slope: float
    pressure_l2_slope: float


def _slope(h: np.ndarray, e: np.ndarray) -> float:
    A = np.vstack([np.log(h), np.ones(len(h))]).T
    return float(np.linalg.lstsq(A, np.log(e), rcond=None)[0][0])


def projection_error_rates(velocity_field: sp.SpectralField,
                           pressure_field: sp.ScalarSpectralField,
                           n_list) -> RateRecord:
    """Observed approximation orders of the projections over a mesh ladder."""
    n_list = sorted(n_list)
    if len(n_list) < 3:
        raise ValueError("need at least 3 mesh levels for a rate fit")
    hs, el2, eh1, ep = [], [], [], []
    for n in n_list:
        _, space = build_space(n)
        ops = assemble_static(space)
        state = project_l2_divfree(velocity_field, space, ops)
        a, b = error_vs_spectral(state, velocity_field, space)
        q = project_pressure(pressure_field, space, ops)
        c = pressure_error(q, pressure_field, space)
        hs.append(space.mesh.h)
        el2.append(a)
        eh1.append(b)
        ep.append(c)
    hs_a = np.array(hs)
    return RateRecord(
        n_levels=tuple(n_list), h_levels=tuple(hs),
        velocity_l2_errors=tuple(el2), velocity_h1_errors=tuple(eh1),
        pressure_l2_errors=tuple(ep),
        velocity_l2_slope=_slope(hs_a, np.array(el2)),
        velocity_h1_slope=_slope(hs_a, np.array(eh1)),
        pressure_l2_slope=_slope(hs_a, np.array(ep)),
    )
