"""Semi-implicit time stepping in the Taylor-Hood space.

One step solves the saddle-point system

    (M + tau*mu*A + tau*C(u_prev)) u + B^T p = M u_prev + (Phi(u_prev) dW, phi),
    B u = 0,  mean(p) = 0,

by sparse direct factorisation.  The noise enters through quadrature-point
evaluation of the diffusion coefficient at the FEM iterate itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import noise as noise_mod
from ..stepper import SolverError, StepConfig, discrete_stop_index
from .assemble import (StaticOperators, assemble_convection,
                       divergence_residual, kkt_factor, kkt_solve)
from .projection import (DIV_FLAG_TOL, FemState, field_values_at_quadrature,
                         project_l2_divfree, velocity_load_vector)
from .space import TaylorHoodSpace


class NoiseEval:
    """Diffusion fields at quadrature points for one (space, basis) pair."""

    def __init__(self, space: TaylorHoodSpace, basis,
                 dcfg: noise_mod.DiffusionConfig):
        self.space = space
        self.basis = basis
        self.dcfg = dcfg
        a = space.mesh.a
        pts = (a * space.mesh.cube_coords[None, None, :, :]
               + space.offsets[:, :, None, :]).reshape(-1, 3)
        prof = noise_mod.profile_values(basis, pts)  # (J, 6*nq*ncube)
        ncube = space.gmap.shape[1]
        prof = prof.reshape(dcfg.J, 6, space.nq, ncube)
        self.profiles = np.transpose(prof, (0, 1, 3, 2))  # (J, 6, ncube, nq)
        self.lam = np.array([m.amplitude for m in basis])

    def field(self, u_values: np.ndarray, incr: np.ndarray) -> np.ndarray:
        """Phi(u) dW at quadrature points; u_values shaped (6, ncube, 3, nq)."""
        weight = np.tensordot(self.lam * incr, self.profiles, axes=(0, 0))
        factor = noise_mod.state_factor(self.dcfg,
                                        np.moveaxis(u_values, 2, 0))
        out = self.dcfg.gamma * factor * weight[None, ...]
        return np.moveaxis(out, 0, 2)  # back to (6, ncube, 3, nq)


def step_fem(u_prev: FemState, noise_values, cfg: StepConfig,
             space: TaylorHoodSpace, ops: StaticOperators,
             step_index: int | None = None) -> FemState:
    """One semi-implicit Taylor-Hood step; noise_values at quadrature or None."""
    if not u_prev.div_free and divergence_residual(ops, u_prev.velocity) > 1e-6:
        raise ValueError("previous state must be discretely divergence-free")
    C = assemble_convection(space, ops, u_prev.velocity)
    K = (ops.M + cfg.tau * cfg.mu * ops.A + cfg.tau * C).tocsc()
    rhs = ops.M @ u_prev.velocity
    if noise_values is not None:
        rhs = rhs + velocity_load_vector(space, noise_values)
    try:
        lu = kkt_factor(K, ops)
        u, p = kkt_solve(lu, ops, rhs)
    except RuntimeError as err:  # singular factorisation
        raise SolverError(f"saddle-point factorisation failed: {err}",
                          step_index=step_index) from None
    if not np.all(np.isfinite(u)):
        raise SolverError("saddle-point solve produced non-finite values",
                          step_index=step_index)
    return FemState(space.n, u, p,
                    divergence_residual(ops, u) <= DIV_FLAG_TOL)


@dataclass
class FemTrajectory:
    """Discrete FEM states with mass/stiffness energy diagnostics."""

    cfg: StepConfig
    states: list[FemState]
    l2_norms: np.ndarray      # (M+1,) sqrt(u^T M u)
    h1_semi: np.ndarray       # (M+1,) sqrt(u^T A u)
    div_residuals: np.ndarray  # (M+1,)


def run_fem_trajectory(u0: FemState, path: noise_mod.NoisePath, cfg: StepConfig,
                       dcfg: noise_mod.DiffusionConfig, basis,
                       space: TaylorHoodSpace, ops: StaticOperators
                       ) -> FemTrajectory:
    """Iterate step_fem along a noise path, noise evaluated on the FEM iterate."""
    if path.M != cfg.M:
        raise ValueError(f"path has {path.M} steps, config wants {cfg.M}")
    noise_eval = NoiseEval(space, basis, dcfg) if dcfg.gamma > 0 else None
    M = cfg.M
    states = [u0]
    l2 = np.empty(M + 1)
    h1 = np.empty(M + 1)
    divres = np.empty(M + 1)
    u = u0
    l2[0] = np.sqrt(u.velocity @ (ops.M @ u.velocity))
    h1[0] = np.sqrt(max(u.velocity @ (ops.A @ u.velocity), 0.0))
    divres[0] = divergence_residual(ops, u.velocity)
    for m in range(1, M + 1):
        if noise_eval is not None:
            uq = space.velocity_at_quadrature(u.velocity)
            nv = noise_eval.field(uq, path.increments[m - 1])
        else:
            nv = None
        u = step_fem(u, nv, cfg, space, ops, step_index=m)
        states.append(u)
        l2[m] = np.sqrt(u.velocity @ (ops.M @ u.velocity))
        h1[m] = np.sqrt(max(u.velocity @ (ops.A @ u.velocity), 0.0))
        divres[m] = divergence_residual(ops, u.velocity)
    return FemTrajectory(cfg, states, l2, h1, divres)


def initial_state(field, space: TaylorHoodSpace, ops: StaticOperators) -> FemState:
    """Discretely divergence-free projection of an initial velocity field."""
    return project_l2_divfree(field, space, ops)


FEM_ERROR_CSV_COLUMNS = ("path", "m", "h", "n", "errL2", "errH1")
