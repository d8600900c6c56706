"""Temporal self-convergence study with coupled noise ladders.

Each path draws one fine noise realisation, runs the reference trajectory at
the smallest step size, then re-runs the scheme on exact coarsenings of the
same noise at every coarser ladder level.  The error functional is the
stopped energy error

    E_tau = max_{m <= m*} ||u_ref(t_m) - u_m||_L2^2
          + sum_{m <= m*} tau ||grad(u_ref(t_m) - u_m)||_L2^2,

where m* caps both trajectories at the blow-up radius: the minimum of the
coarse run's own stopping index and the reference stopping time mapped to the
coarse grid (the computable stand-in for the continuous-time cap).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import noise as noise_mod
from .. import spectral
from ..stepper import StepConfig, run_trajectory
from .config import ConfigError, RunConfig
from .report import (ErrorRow, ErrorTable, RateFit, fit_loglog,
                     median_log_weight)


@dataclass
class TemporalResult:
    table: ErrorTable
    fit: RateFit
    xi: float
    exceed_fraction: dict
    taus: tuple
    reference_tau: float


def stopped_energy_error(ref_states, coarse_states, factor: int, tau: float,
                         m_star: int) -> tuple[float, float]:
    """(max L2^2, sum tau*H1seminorm^2) of state differences up to m_star."""
    max_l2sq = 0.0
    sum_h1sq = 0.0
    for m in range(1, m_star + 1):
        ref = ref_states[m * factor]
        diff = spectral.SpectralField(ref.N, ref.coeffs - coarse_states[m].coeffs)
        max_l2sq = max(max_l2sq, spectral.l2_norm(diff) ** 2)
        sum_h1sq += tau * spectral.sobolev_seminorm(diff, 1) ** 2
    return max_l2sq, sum_h1sq


def run_temporal_study(cfg: RunConfig) -> TemporalResult:
    counts = cfg.step_counts()          # coarsest first
    if len(counts) < 3:
        raise ConfigError("temporal study needs a tau ladder with >= 3 levels")
    m_ref = counts[-1]
    tau_ref = cfg.T / m_ref
    levels = counts[:-1]                # compared against the finest
    dcfg = cfg.diffusion()
    basis = cfg.basis()
    u0 = cfg.initial_field(cfg.N_ref)

    n_paths = 1 if dcfg.gamma == 0.0 else cfg.paths
    raw = []  # (path, level_index, tau, maxsq, sumsq, m_star)
    for p in range(n_paths):
        fine = noise_mod.sample_path(cfg.seed, p, m_ref, tau_ref, dcfg.J)
        ref_cfg = StepConfig(mu=cfg.mu, tau=tau_ref, M=m_ref, R=cfg.R)
        ref = run_trajectory(u0, fine, ref_cfg, dcfg, basis)
        for li, m_lvl in enumerate(levels):
            factor = m_ref // m_lvl
            tau = cfg.T / m_lvl
            coarse = noise_mod.coarsen_path(fine, factor)
            lvl_cfg = StepConfig(mu=cfg.mu, tau=tau, M=m_lvl, R=cfg.R)
            traj = run_trajectory(u0, coarse, lvl_cfg, dcfg, basis)
            m_star = min(int(np.floor(ref.stop_time / tau + 1e-12)),
                         traj.stop_index)
            maxsq, sumsq = stopped_energy_error(ref.states, traj.states,
                                                factor, tau, m_star)
            raw.append((p, li, tau, maxsq, sumsq, m_star))

    taus = tuple(cfg.T / m for m in levels)
    totals = {li: [] for li in range(len(levels))}
    for _, li, _, maxsq, sumsq, _ in raw:
        totals[li].append(maxsq + sumsq)
    medians = np.array([np.median(totals[li]) for li in range(len(levels))])

    xi = cfg.xi
    if xi is None:
        xi = float(medians[0] / taus[0] ** (2 * cfg.alpha))
    rows = []
    for p, li, tau, maxsq, sumsq, m_star in raw:
        exceed = (maxsq + sumsq) > xi * tau ** (2 * cfg.alpha)
        rows.append(ErrorRow(p, li, tau, maxsq, sumsq, m_star, exceed))
    table = ErrorTable(rows)

    weights = np.array([median_log_weight(np.array(totals[li]))
                        for li in range(len(levels))])
    fit = fit_loglog(np.array(taus), medians, weights)
    return TemporalResult(table=table, fit=fit, xi=xi,
                          exceed_fraction=table.exceed_fraction_by_level(),
                          taus=taus, reference_tau=tau_ref)
