"""Spatial convergence: Taylor-Hood iterates against the spectral time scheme.

Per path one noise realisation drives both the spectral trajectory at the
reference resolution and the FEM trajectories at every mesh level, the
diffusion coefficient evaluated on each backend's own iterate.  The error

    E_h = max_{m <= jR} ||u_m - u_{h,m}||_L2^2
        + sum_{m <= jR} tau ||grad(u_m - u_{h,m})||_L2^2

is capped by the spectral trajectory's stopping index jR.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import fem, noise as noise_mod
from ..stepper import StepConfig, run_trajectory
from .config import ConfigError, RunConfig
from .report import (ErrorRow, ErrorTable, RateFit, fit_loglog,
                     median_log_weight)


@dataclass
class SpatialResult:
    table: ErrorTable
    fit: RateFit
    xi: float
    exceed_fraction: dict
    hs: tuple
    tau: float
    fem_rows: list  # (path, m, h, n, errL2, errH1)


def run_spatial_study(cfg: RunConfig) -> SpatialResult:
    n_levels = tuple(sorted(cfg.n_ladder))
    if len(n_levels) < 3:
        raise ConfigError("spatial study needs a mesh ladder with >= 3 levels")
    if cfg.N_ref < 4 * max(n_levels):
        raise ConfigError(
            f"reference resolution too coarse: N_ref = {cfg.N_ref} < "
            f"4 * max(n) = {4 * max(n_levels)}")
    tau = max(cfg.tau_ladder)
    M = round(cfg.T / tau)
    dcfg = cfg.diffusion()
    basis = cfg.basis()
    u0 = cfg.initial_field(cfg.N_ref)

    spaces = {}
    for n in n_levels:
        _, space = fem.build_space(n)
        spaces[n] = (space, fem.assemble_static(space))

    n_paths = 1 if dcfg.gamma == 0.0 else cfg.paths
    raw = []
    fem_rows = []
    for p in range(n_paths):
        path = noise_mod.sample_path(cfg.seed, p, M, tau, dcfg.J)
        spec_cfg = StepConfig(mu=cfg.mu, tau=tau, M=M, R=cfg.R)
        spec_traj = run_trajectory(u0, path, spec_cfg, dcfg, basis)
        jr = spec_traj.stop_index
        for li, n in enumerate(n_levels):
            space, ops = spaces[n]
            u0h = fem.initial_state(u0, space, ops)
            fem_traj = fem.run_fem_trajectory(u0h, path, spec_cfg, dcfg, basis,
                                              space, ops)
            maxsq = 0.0
            sumsq = 0.0
            for m in range(1, jr + 1):
                el2, eh1 = fem.error_vs_spectral(fem_traj.states[m],
                                                 spec_traj.states[m], space)
                fem_rows.append((p, m, space.mesh.h, n, el2, eh1))
                maxsq = max(maxsq, el2**2)
                sumsq += tau * eh1**2
            raw.append((p, li, space.mesh.h, maxsq, sumsq, jr))

    hs = tuple(spaces[n][0].mesh.h for n in n_levels)
    totals = {li: [] for li in range(len(n_levels))}
    for _, li, _, maxsq, sumsq, _ in raw:
        totals[li].append(maxsq + sumsq)
    medians = np.array([np.median(totals[li]) for li in range(len(n_levels))])

    xi = cfg.xi
    if xi is None:
        xi = float(medians[0] / hs[0] ** (2 * cfg.beta))
    rows = []
    for p, li, h, maxsq, sumsq, jr in raw:
        exceed = (maxsq + sumsq) > xi * h ** (2 * cfg.beta)
        rows.append(ErrorRow(p, li, h, maxsq, sumsq, jr, exceed))
    table = ErrorTable(rows)

    weights = np.array([median_log_weight(np.array(totals[li]))
                        for li in range(len(n_levels))])
    fit = fit_loglog(np.array(hs), medians, weights)
    return SpatialResult(table=table, fit=fit, xi=xi,
                         exceed_fraction=table.exceed_fraction_by_level(),
                         hs=hs, tau=tau, fem_rows=fem_rows)
