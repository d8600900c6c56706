"""Truncated cylindrical Wiener process and the diffusion coefficient family.

The auxiliary Hilbert space is realised as the span of J abstract modes e_j.
Each mode carries an integer wavevector k_j, an amplitude lam_j =
(1+|k_j|^2)^(-r), and a cos/sin spatial profile.  Two diffusion families are
provided: an additive one, Phi e_j = gamma lam_j sigma_j(x) (1,1,1)/sqrt(3),
and a multiplicative one, Phi(u) e_j = gamma lam_j sigma_j(x) f(u(x)) with
f(v) = (sin v1, sin v2, sin v3).  Both have bounded derivatives, so Lipschitz
and linear-growth bounds hold uniformly; the module ships numerical sweeps to
measure those constants.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np
from numpy.random import Generator, Philox

from . import spectral


@dataclass(frozen=True)
class NoiseBasisMode:
    """One abstract noise mode: index, wavevector, amplitude, cos/sin profile."""

    index: int
    wavevector: tuple[int, int, int]
    amplitude: float
    profile: Literal["cos", "sin"]


def _half_space_wavevectors(count: int) -> list[tuple[int, int, int]]:
    """First `count` nonzero wavevectors with positive leading entry.

    Sorted by |k|^2, then lexicographically with the axis-aligned direction
    (1,0,0) first within each shell.
    """
    vecs: list[tuple[int, int, int]] = []
    kmax = 1
    while True:
        vecs = []
        for kx in range(-kmax, kmax + 1):
            for ky in range(-kmax, kmax + 1):
                for kz in range(-kmax, kmax + 1):
                    k = (kx, ky, kz)
                    if k == (0, 0, 0):
                        continue
                    lead = next(c for c in k if c != 0)
                    if lead > 0:
                        vecs.append(k)
        vecs.sort(key=lambda k: (k[0] ** 2 + k[1] ** 2 + k[2] ** 2,
                                 (-k[0], -k[1], -k[2])))
        # only shells fully inside the cube are trustworthy in sorted order
        full = [k for k in vecs if k[0] ** 2 + k[1] ** 2 + k[2] ** 2 <= kmax**2]
        if len(full) >= count:
            return full[:count]
        kmax += 1


def build_basis(J: int, r: float) -> list[NoiseBasisMode]:
    """Ordered noise basis: per wavevector a cos then a sin mode, J modes total."""
    if J < 1:
        raise ValueError("mode count J must be >= 1")
    if r < 2:
        raise ValueError("spectral decay exponent r must be >= 2")
    n_vecs = (J + 1) // 2
    vecs = _half_space_wavevectors(n_vecs)
    modes: list[NoiseBasisMode] = []
    for k in vecs:
        lam = (1.0 + k[0] ** 2 + k[1] ** 2 + k[2] ** 2) ** (-r)
        for profile in ("cos", "sin"):
            if len(modes) == J:
                break
            modes.append(NoiseBasisMode(len(modes) + 1, k, lam, profile))
    return modes


def hs_weight_partial_sum(J: int, r: float) -> float:
    """Partial sum of lam_j^2 (1+|k_j|^2)^2, the W^{2,2} Hilbert-Schmidt weight."""
    total = 0.0
    for mode in build_basis(J, r):
        k2 = sum(c * c for c in mode.wavevector)
        total += mode.amplitude**2 * (1.0 + k2) ** 2
    return total


@dataclass(frozen=True)
class NoisePath:
    """One realisation of the truncated Wiener increments, shape (M, J).

    increments[m, j] is the Gaussian increment of the j-th scalar Brownian
    motion over step m, variance tau.  The seed descriptor (seed, path_index)
    regenerates the array bit for bit.
    """

    M: int
    tau: float
    J: int
    increments: np.ndarray
    seed: int
    path_index: int

    def __post_init__(self):
        if self.increments.shape != (self.M, self.J):
            raise ValueError("increments must have shape (M, J)")
        arr = np.ascontiguousarray(self.increments, dtype=np.float64)
        arr.flags.writeable = False
        object.__setattr__(self, "increments", arr)


def sample_path(seed: int, path_index: int, M: int, tau: float, J: int) -> NoisePath:
    """Draw a noise path from counter-based streams.

    Step m is generated by its own Philox stream keyed on (seed, path_index)
    with the step index placed in the counter, so rows are reproducible and
    independent of the order in which they are generated; extending J keeps
    the leading columns unchanged.
    """
    if M < 1:
        raise ValueError("step count M must be >= 1")
    if tau <= 0:
        raise ValueError("step size tau must be positive")
    key = np.array([seed, path_index], dtype=np.uint64)
    root = tau**0.5
    rows = np.empty((M, J))
    for m in range(M):
        gen = Generator(Philox(counter=np.array([0, 0, 0, m], dtype=np.uint64), key=key))
        rows[m] = gen.standard_normal(J)
    return NoisePath(M, tau, J, rows * root, seed, path_index)


def coarsen_path(path: NoisePath, factor: int) -> NoisePath:
    """Sum groups of `factor` fine increments into one coarse increment.

    Powers of two are reduced by repeated pairwise halving, so dyadic
    coarsenings compose bit for bit: coarsen(coarsen(p,2),2) == coarsen(p,4).
    """
    if factor < 1 or path.M % factor != 0:
        raise ValueError(f"factor {factor} does not divide M = {path.M}")
    arr = np.array(path.increments)
    remaining = factor
    while remaining % 2 == 0:
        arr = arr.reshape(arr.shape[0] // 2, 2, path.J)
        arr = arr[:, 0, :] + arr[:, 1, :]
        remaining //= 2
    if remaining > 1:
        arr = arr.reshape(arr.shape[0] // remaining, remaining, path.J)
        acc = np.array(arr[:, 0, :])
        for i in range(1, remaining):
            acc += arr[:, i, :]
        arr = acc
    return NoisePath(path.M // factor, path.tau * factor, path.J, arr,
                     path.seed, path.path_index)


def dump_path(path: NoisePath, file) -> None:
    """Write increments as little-endian float64, step-major, for audit."""
    data = np.ascontiguousarray(path.increments, dtype="<f8")
    if hasattr(file, "write"):
        file.write(data.tobytes())
    else:
        with open(file, "wb") as fh:
            fh.write(data.tobytes())


@dataclass(frozen=True)
class DiffusionConfig:
    """Diffusion coefficient family: kind, decay r, overall scale gamma, modes J."""

    kind: Literal["additive", "multiplicative"]
    r: float = 2.0
    gamma: float = 0.5
    J: int = 16

    def __post_init__(self):
        if self.kind not in ("additive", "multiplicative"):
            raise ValueError(f"unknown diffusion kind {self.kind!r}")
        if self.r < 2:
            raise ValueError("spectral decay exponent r must be >= 2")
        if self.gamma < 0:
            raise ValueError("noise scale gamma must be nonnegative")
        if self.J < 1:
            raise ValueError("mode count J must be >= 1")


@lru_cache(maxsize=8)
def _profiles_on_grid(basis_key: tuple, N: int) -> np.ndarray:
    """sigma_j on the N^3 collocation grid, shape (J, N, N, N)."""
    x = spectral.grid_points(N)
    out = np.empty((len(basis_key), N, N, N))
    for j, (kvec, profile) in enumerate(basis_key):
        phase = kvec[0] * x[0] + kvec[1] * x[1] + kvec[2] * x[2]
        out[j] = np.cos(phase) if profile == "cos" else np.sin(phase)
    out.flags.writeable = False
    return out


def _basis_key(basis) -> tuple:
    return tuple((m.wavevector, m.profile) for m in basis)


def profile_values(basis, points: np.ndarray) -> np.ndarray:
    """sigma_j at arbitrary points (P, 3), shape (J, P)."""
    points = np.asarray(points, dtype=np.float64)
    out = np.empty((len(basis), points.shape[0]))
    for j, mode in enumerate(basis):
        phase = points @ np.asarray(mode.wavevector, dtype=np.float64)
        out[j] = np.cos(phase) if mode.profile == "cos" else np.sin(phase)
    return out


_ADDITIVE_DIRECTION = np.array([1.0, 1.0, 1.0]) / np.sqrt(3.0)


def state_factor(cfg: DiffusionConfig, u_values: np.ndarray) -> np.ndarray:
    """The u-dependent vector factor of the diffusion, on any point layout.

    u_values has components on the leading axis; returns an array of the same
    shape: sin(u) componentwise for the multiplicative family, the constant
    direction (1,1,1)/sqrt(3) broadcast for the additive one.
    """
    if cfg.kind == "multiplicative":
        return np.sin(u_values)
    shape = (3,) + (1,) * (u_values.ndim - 1)
    return np.broadcast_to(_ADDITIVE_DIRECTION.reshape(shape), u_values.shape).copy()


def _as_grid_values(u, N: int) -> np.ndarray:
    if isinstance(u, spectral.SpectralField):
        if u.N != N:
            raise ValueError("field resolution mismatch")
        return spectral.to_grid(u)
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (3, N, N, N):
        raise ValueError("grid values must have shape (3, N, N, N)")
    return u


def apply_diffusion(cfg: DiffusionConfig, basis, u, incr: np.ndarray,
                    N: int | None = None) -> np.ndarray:
    """Realise Phi(u) dW = sum_j Phi(u) e_j dbeta_j on the collocation grid.

    u may be a SpectralField or grid values; incr is the length-J increment
    vector.  Returns grid values (3, N, N, N); the result is a general field,
    not necessarily divergence-free.
    """
    incr = np.asarray(incr, dtype=np.float64)
    if incr.shape != (cfg.J,) or len(basis) != cfg.J:
        raise ValueError(f"expected {cfg.J} modes/increments, got "
                         f"{len(basis)} modes and {incr.shape} increments")
    if N is None:
        if not isinstance(u, spectral.SpectralField):
            N = np.asarray(u).shape[1]
        else:
            N = u.N
    u_grid = _as_grid_values(u, N)
    lam = np.array([m.amplitude for m in basis])
    profiles = _profiles_on_grid(_basis_key(basis), N)
    # sum_j lam_j sigma_j dbeta_j factors out of the state-dependent part
    weight = np.tensordot(lam * incr, profiles, axes=(0, 0))
    return cfg.gamma * state_factor(cfg, u_grid) * weight[None, ...]


def diffusion_mode_fields(cfg: DiffusionConfig, basis, u, N: int | None = None
                          ) -> np.ndarray:
    """All Phi(u) e_j as grid fields, shape (J, 3, N, N, N)."""
    if N is None:
        N = u.N if isinstance(u, spectral.SpectralField) else np.asarray(u).shape[1]
    u_grid = _as_grid_values(u, N)
    lam = np.array([m.amplitude for m in basis])
    profiles = _profiles_on_grid(_basis_key(basis), N)
    factor = state_factor(cfg, u_grid)
    return cfg.gamma * lam[:, None, None, None, None] * profiles[:, None] * factor[None]


def diffusion_hs_norm(cfg: DiffusionConfig, basis, u, k: int,
                      N: int | None = None) -> float:
    """Hilbert-Schmidt norm (sum_j ||Phi(u) e_j||_{W^{k,2}}^2)^(1/2), spectrally."""
    if k not in (0, 1, 2):
        raise ValueError("Sobolev order must be in {0, 1, 2}")
    fields = diffusion_mode_fields(cfg, basis, u, N)
    total = 0.0
    for g in fields:
        total += spectral.sobolev_norm(spectral.from_grid(g), k) ** 2
    return float(np.sqrt(total))


def lipschitz_sweep(cfg: DiffusionConfig, basis, N: int, pairs: int,
                    seed: int = 0) -> np.ndarray:
    """Ratios ||Phi(u)-Phi(v)||_HS(L2) / ||u-v||_L2 over random field pairs."""
    rng = np.random.default_rng(seed)
    ratios = np.empty(pairs)
    for i in range(pairs):
        u = spectral.random_divfree_field(N, int(rng.integers(2**31)),
                                          amplitude=float(rng.uniform(0.1, 3.0)))
        v = spectral.random_divfree_field(N, int(rng.integers(2**31)),
                                          amplitude=float(rng.uniform(0.1, 3.0)))
        fu = diffusion_mode_fields(cfg, basis, u)
        fv = diffusion_mode_fields(cfg, basis, v)
        diff = 0.0
        for j in range(cfg.J):
            diff += spectral.l2_norm(spectral.from_grid(fu[j] - fv[j])) ** 2
        du = spectral.l2_norm(
            spectral.SpectralField(N, u.coeffs - v.coeffs))
        ratios[i] = np.sqrt(diff) / du
    return ratios


def growth_sweep(cfg: DiffusionConfig, basis, N: int, samples: int,
                 seed: int = 0) -> np.ndarray:
    """Ratios ||Phi(u)||_HS(W^{1,2}) / (1 + ||u||_W^{1,2}) over random fields."""
    rng = np.random.default_rng(seed)
    ratios = np.empty(samples)
    for i in range(samples):
        u = spectral.random_divfree_field(N, int(rng.integers(2**31)),
                                          amplitude=float(rng.uniform(0.05, 8.0)))
        hs = diffusion_hs_norm(cfg, basis, u, 1)
        ratios[i] = hs / (1.0 + spectral.sobolev_norm(u, 1))
    return ratios
