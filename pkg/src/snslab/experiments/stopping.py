"""Monte Carlo law of the early-stopping event [s_R^d <= ell*tau]."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import noise as noise_mod
from ..stepper import StepConfig, run_trajectory, stopping_record
from .config import ConfigError, RunConfig
from .report import wilson_interval

STOPPING_CSV_COLUMNS = ("tau", "R", "ell", "p_hat", "std_err",
                        "wilson_lo", "wilson_hi", "paths")


@dataclass
class StoppingResult:
    rows: list            # per-(tau) cells: (tau, R, ell, p, se, lo, hi, n)
    trend_ok: bool        # non-increasing in tau within 2 standard errors

    def probabilities(self) -> list:
        return [r[3] for r in self.rows]


def run_stopping_study(cfg: RunConfig) -> StoppingResult:
    if cfg.paths < 32:
        raise ConfigError("stopping study needs >= 32 paths per cell")
    dcfg = cfg.diffusion()
    basis = cfg.basis()
    u0 = cfg.initial_field(cfg.N_ref)
    rows = []
    for m_steps in cfg.step_counts():   # coarsest tau first
        tau = cfg.T / m_steps
        hits = 0
        for p in range(cfg.paths):
            path = noise_mod.sample_path(cfg.seed, p, m_steps, tau, dcfg.J)
            scfg = StepConfig(mu=cfg.mu, tau=tau, M=m_steps, R=cfg.R)
            traj = run_trajectory(u0, path, scfg, dcfg, basis,
                                  store_states=False)
            rec = stopping_record(traj, cfg.ell, p)
            hits += int(rec.stopped_early)
        p_hat = hits / cfg.paths
        se = float(np.sqrt(p_hat * (1 - p_hat) / cfg.paths))
        lo, hi = wilson_interval(hits, cfg.paths)
        rows.append((tau, cfg.R, cfg.ell, p_hat, se, lo, hi, cfg.paths))

    trend_ok = True
    for (t0, _, _, p0, s0, *_), (t1, _, _, p1, s1, *_) in zip(rows, rows[1:]):
        # tau decreases along the ladder; allow 2 combined standard errors
        if p1 > p0 + 2.0 * float(np.hypot(s0, s1)):
            trend_ok = False
    return StoppingResult(rows=rows, trend_ok=trend_ok)
