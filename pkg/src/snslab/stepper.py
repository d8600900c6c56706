"""Semi-implicit temporal schemes on the spectral backend.

One step solves, for divergence-free test functions,

    <u_m, phi> + tau*mu <grad u_m, grad phi> - tau <u_m (x) u_{m-1}, grad phi>
        = <u_{m-1}, phi> + <Phi(u_{m-1}) dW_m, phi>,

which in projected spectral form reads
    (1 + tau*mu*|k|^2) uhat_m + tau P[(u_{m-1}.grad) u_m]^ = uhat_{m-1} + P[noise]^.
The truncated variant multiplies convection and noise by a smooth cutoff of
the running W^{2,2} norm at radius R, which leaves the scheme untouched until
the blow-up stopping index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy.sparse.linalg import LinearOperator, gmres

from . import noise as noise_mod
from . import spectral
from .spectral import ScalarSpectralField, SpectralField


class SolverError(RuntimeError):
    """Linear solve failed to converge; carries the failing step index."""

    def __init__(self, message: str, step_index: int | None = None):
        super().__init__(message)
        self.step_index = step_index


@dataclass(frozen=True)
class StepConfig:
    """Time-stepping parameters; R = inf runs the plain scheme without cutoff."""

    mu: float
    tau: float
    M: int
    R: float = np.inf
    variant: str = "plain"
    tol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        if self.mu <= 0 or self.tau <= 0 or self.M < 1:
            raise ValueError("require mu > 0, tau > 0, M >= 1")
        if self.R <= 0:
            raise ValueError("truncation radius R must be positive")
        if self.variant not in ("plain", "truncated"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if not (0.0 < self.tol <= 1e-6):
            raise ValueError("solver tolerance must lie in (0, 1e-6]")

    @property
    def T(self) -> float:
        return self.tau * self.M


def cutoff_zeta(x: float, R: float) -> float:
    """Smooth cutoff: 1 on [0, R], 0 on [2R, inf), quintic smoothstep between.

    C^2 at the seams and monotone non-increasing.
    """
    if x < 0:
        raise ValueError("cutoff argument must be nonnegative")
    if R <= 0:
        raise ValueError("radius must be positive")
    if not np.isfinite(R) or x <= R:
        return 1.0
    if x >= 2.0 * R:
        return 0.0
    t = (x - R) / R
    return 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t**2)


def _solve_step(u_prev: SpectralField, noise_grid, cfg: StepConfig,
                zeta: float) -> tuple[SpectralField, int]:
    """Shared linear solve; zeta scales convection and noise."""
    N = u_prev.N
    kvec, k2, _, mask = spectral.wavegrids(N)
    diag = 1.0 + cfg.tau * cfg.mu * k2
    n3 = N**3

    # frozen advecting velocity, dealiased once per step
    w_hat = u_prev.coeffs * mask
    w_grid = np.real(sfft.ifftn(w_hat * n3, axes=(-3, -2, -1)))
    tz = cfg.tau * zeta
    shape = (3, N, N, N)
    size = 3 * n3

    k2safe = np.where(k2 == 0.0, 1.0, k2)

    def leray(c):
        kdot = (kvec * c).sum(axis=0)
        out = c - kvec * (kdot / k2safe)[None, ...]
        out[:, 0, 0, 0] = c[:, 0, 0, 0]
        return out

    def convected(c):
        ch = c * mask
        grad = np.real(sfft.ifftn(
            (1j * kvec[None, :, ...] * ch[:, None, ...]) * n3, axes=(-3, -2, -1)))
        prod = np.einsum("jxyz,cjxyz->cxyz", w_grid, grad)
        return (sfft.fftn(prod, axes=(-3, -2, -1)) / n3) * mask

    matvecs = 0

    def matvec(x):
        nonlocal matvecs
        matvecs += 1
        c = x.reshape(shape)
        out = diag[None, ...] * c
        if tz != 0.0:
            out = out + tz * leray(convected(c))
        return out.ravel()

    rhs = np.array(u_prev.coeffs)
    if noise_grid is not None and zeta != 0.0:
        noise_hat = sfft.fftn(np.asarray(noise_grid), axes=(-3, -2, -1)) / n3
        rhs = rhs + zeta * leray(noise_hat)
    b = rhs.ravel()

    x0 = (rhs / diag[None, ...]).ravel()
    if tz == 0.0 or np.linalg.norm(w_hat) == 0.0:
        out = leray((rhs / diag[None, ...]))
        return SpectralField(N, out, div_free=True), 0

    op = LinearOperator((size, size), matvec=matvec, dtype=np.complex128)
    pre = LinearOperator(
        (size, size),
        matvec=lambda x: (x.reshape(shape) / diag[None, ...]).ravel(),
        dtype=np.complex128,
    )
    sol, info = gmres(op, b, x0=x0, M=pre, rtol=cfg.tol, atol=0.0,
                      maxiter=cfg.max_iter, restart=min(cfg.max_iter, 50))
    if info != 0:
        raise SolverError(
            f"semi-implicit solve did not reach rtol={cfg.tol} within "
            f"{cfg.max_iter} iterations (info={info}); tau may be too large "
            f"for the current state norm")
    out = leray(sol.reshape(shape))
    return SpectralField(N, out, div_free=True), matvecs


def step_semi_implicit(u_prev: SpectralField, noise_grid, cfg: StepConfig
                       ) -> SpectralField:
    """One plain semi-implicit step; noise_grid is the Phi(u_prev) dW field."""
    out, _ = _solve_step(u_prev, noise_grid, cfg, zeta=1.0)
    return out


def step_truncated(u_prev: SpectralField, noise_grid, cfg: StepConfig
                   ) -> SpectralField:
    """Truncated step: convection and noise scaled by the W^{2,2} cutoff.

    Coincides bit for bit with the plain step while ||u_prev||_{W^{2,2}} <= R.
    """
    zeta = cutoff_zeta(spectral.sobolev_norm(u_prev, 2), cfg.R)
    out, _ = _solve_step(u_prev, noise_grid, cfg, zeta=zeta)
    return out


def discrete_stop_index(norms, R: float) -> int:
    """Smallest m with max_{n<=m} norms[n] >= R; len(norms)-1 if never reached."""
    norms = np.asarray(norms, dtype=np.float64)
    if norms.size == 0:
        raise ValueError("norm sequence must include index 0")
    hits = np.nonzero(norms >= R)[0]
    if hits.size == 0:
        return norms.size - 1
    return int(hits[0])


@dataclass
class Trajectory:
    """Discrete states u_0..u_M with per-step diagnostics and stopping index."""

    cfg: StepConfig
    states: list[SpectralField] | None
    norms: np.ndarray          # (M+1, 3): W^{0,2}, W^{1,2}, W^{2,2}
    inc_h1: np.ndarray         # (M,): ||grad(u_m - u_{m-1})||_L2
    inc_l2: np.ndarray         # (M,): ||u_m - u_{m-1}||_L2
    solver_iters: np.ndarray   # (M,)
    stop_index: int

    @property
    def stop_time(self) -> float:
        return self.stop_index * self.cfg.tau


@dataclass(frozen=True)
class StoppingRecord:
    """Outcome of one path for the early-stopping event [s_R^d <= ell*tau]."""

    tau: float
    R: float
    ell: int
    stopped_early: bool
    path_id: int


def stopping_record(traj: Trajectory, ell: int, path_id: int) -> StoppingRecord:
    return StoppingRecord(traj.cfg.tau, traj.cfg.R, ell,
                          traj.stop_index <= ell, path_id)


def run_trajectory(u0: SpectralField, path: noise_mod.NoisePath, cfg: StepConfig,
                   dcfg: noise_mod.DiffusionConfig, basis,
                   store_states: bool = True) -> Trajectory:
    """Iterate the configured step M times, recording norms and diagnostics.

    The noise coefficient for step m is evaluated at u_{m-1}, so recomputing a
    step from the stored previous state and the increment row reproduces it.
    """
    if path.M != cfg.M:
        raise ValueError(f"path has {path.M} steps, config wants {cfg.M}")
    if not u0.div_free and spectral.divergence_defect(u0) > 1e-10:
        raise ValueError("initial state must be divergence-free")
    truncated = cfg.variant == "truncated"
    M = cfg.M
    norms = np.empty((M + 1, 3))
    inc_h1 = np.empty(M)
    inc_l2 = np.empty(M)
    iters = np.zeros(M, dtype=np.int64)
    states = [u0] if store_states else None

    u = u0
    norms[0] = [spectral.sobolev_norm(u0, k) for k in (0, 1, 2)]
    for m in range(1, M + 1):
        if dcfg.gamma > 0.0:
            noise_grid = noise_mod.apply_diffusion(
                dcfg, basis, u, path.increments[m - 1])
        else:
            noise_grid = None
        zeta = cutoff_zeta(norms[m - 1, 2], cfg.R) if truncated else 1.0
        try:
            u_next, its = _solve_step(u, noise_grid, cfg, zeta=zeta)
        except SolverError as err:
            raise SolverError(str(err), step_index=m) from None
        diff = SpectralField(u.N, u_next.coeffs - u.coeffs)
        inc_l2[m - 1] = spectral.l2_norm(diff)
        inc_h1[m - 1] = spectral.sobolev_seminorm(diff, 1)
        iters[m - 1] = its
        u = u_next
        norms[m] = [spectral.sobolev_norm(u, k) for k in (0, 1, 2)]
        if store_states:
            states.append(u)

    stop = discrete_stop_index(norms[:, 2], cfg.R)
    return Trajectory(cfg, states, norms, inc_h1, inc_l2, iters, stop)


def discrete_pressure(u_m: SpectralField, u_prev: SpectralField,
                      dcfg: noise_mod.DiffusionConfig, basis):
    """Pressure pair of one time step.

    pi_det = -invLap div div(u_m (x) u_prev), zero mean; phi_pi[j] =
    -grad invLap div(Phi(u_prev) e_j), a gradient field per noise mode.
    """
    for f, name in ((u_m, "u_m"), (u_prev, "u_prev")):
        if not f.div_free and spectral.divergence_defect(f) > 1e-10:
            raise ValueError(f"{name} must be divergence-free")
    if u_m.N != u_prev.N:
        raise ValueError("resolution mismatch")
    N = u_m.N
    kvec, k2, _, mask = spectral.wavegrids(N)
    n3 = N**3
    a = np.real(sfft.ifftn(u_m.coeffs * mask * n3, axes=(-3, -2, -1)))
    b = np.real(sfft.ifftn(u_prev.coeffs * mask * n3, axes=(-3, -2, -1)))
    tensor = a[:, None] * b[None, :]  # (i, j, N, N, N)
    that = sfft.fftn(tensor, axes=(-3, -2, -1)) / n3
    divdiv = -np.einsum("iabc,jabc,ijabc->abc", kvec, kvec, that)
    k2safe = np.where(k2 == 0.0, 1.0, k2)
    pi = divdiv / k2safe
    pi[0, 0, 0] = 0.0
    pi_det = ScalarSpectralField(N, pi)

    mode_fields = noise_mod.diffusion_mode_fields(dcfg, basis, spectral.to_grid(u_prev))
    phi_pi = []
    for g in mode_fields:
        gf = spectral.from_grid(g)
        phi_pi.append(SpectralField(N, -spectral.gradient_part(gf).coeffs))
    return pi_det, phi_pi


@dataclass(frozen=True)
class MomentReport:
    """Monte Carlo moment diagnostics over a trajectory collection."""

    q: int
    paths: int
    energy_moment: float        # E[max ||u||_{L2}^{2^q} + tau sum ||u||^{2^q-2} ||grad u||^2]
    energy_moment_se: float
    h1_moment_stopped: float    # W^{1,2} analogue up to the stopping index
    h1_moment_stopped_se: float
    h2_moment_stopped: float    # W^{2,2} analogue up to the stopping index
    h2_moment_stopped_se: float
    increment_moment: float     # E[(sum_{m<=jR} ||grad(u_m-u_{m-1})||^2)^q]
    increment_moment_se: float
    holder_quotient: float      # E[max_m ||u_m - u_{m-1}||_{L2} / tau^(1/2)]


def _mc(values: np.ndarray) -> tuple[float, float]:
    n = values.size
    mean = float(values.mean())
    se = float(values.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return mean, se


def moment_report(trajectories, q: int = 1) -> MomentReport:
    """Statistics mirroring the uniform-in-M a-priori bounds of the schemes."""
    trajs = list(trajectories)
    if not trajs:
        raise ValueError("empty trajectory collection")
    if q < 1:
        raise ValueError("moment order q must be >= 1")
    tau = trajs[0].cfg.tau
    p = 2**q
    energy, h1s, h2s, incs, holder = [], [], [], [], []
    for t in trajs:
        if t.cfg.tau != tau:
            raise ValueError("trajectories must share the step configuration")
        l2 = t.norms[1:, 0]
        h1 = t.norms[1:, 1]
        h2 = t.norms[1:, 2]
        # gradient seminorm^2 = H1 norm^2 - L2 norm^2 in the Bessel convention
        grad2 = np.maximum(h1**2 - l2**2, 0.0)
        lap2 = np.maximum(h2**2 - h1**2, 0.0)  # proxy for ||grad^2 u||^2 weight
        energy.append(np.max(l2**p) + tau * np.sum(l2 ** (p - 2) * grad2))
        j = t.stop_index
        if j >= 1:
            h1s.append(np.max(h1[:j] ** p) + tau * np.sum(h1[:j] ** (p - 2) * lap2[:j]))
            h2s.append(np.max(h2[:j] ** p))
            incs.append(np.sum(t.inc_h1[:j] ** 2) ** q)
        else:
            h1s.append(0.0)
            h2s.append(0.0)
            incs.append(0.0)
        holder.append(np.max(t.inc_l2) / np.sqrt(tau))
    e, ese = _mc(np.array(energy))
    a, ase = _mc(np.array(h1s))
    b, bse = _mc(np.array(h2s))
    c, cse = _mc(np.array(incs))
    h, _ = _mc(np.array(holder))
    return MomentReport(q, len(trajs), e, ese, a, ase, b, bse, c, cse, h)


TRAJECTORY_CSV_COLUMNS = ("path", "m", "t", "normL2", "normH1", "normH2",
                          "incH1", "jR_flag", "solver_iters")


def trajectory_rows(traj: Trajectory, path_id: int):
    """Per-step summary rows matching TRAJECTORY_CSV_COLUMNS."""
    for m in range(traj.cfg.M + 1):
        yield (path_id, m, m * traj.cfg.tau,
               traj.norms[m, 0], traj.norms[m, 1], traj.norms[m, 2],
               traj.inc_h1[m - 1] if m >= 1 else 0.0,
               int(m >= traj.stop_index),
               int(traj.solver_iters[m - 1]) if m >= 1 else 0)
