"""Divergence-free spectral Galerkin fields on the periodic box [0, 2pi)^3.

Velocity fields are stored as truncated Fourier coefficients u(x) = sum_k
uhat_k exp(i k.x) with integer wavevectors k.  The module provides the FFT
transform pair, the Leray projector, the periodic inverse Laplacian, Sobolev
norms, the dealiased convection operator and the pressure decomposition that
splits the pressure response into a convective part and a per-noise-mode
gradient part.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft as sfft

# Torus convention: period 2*pi per axis, volume (2*pi)**3, integer wavevectors.
VOLUME = (2.0 * np.pi) ** 3


@lru_cache(maxsize=None)
def wavegrids(N: int):
    """Cached wavevector arrays for resolution N (FFT layout).

    Returns (kvec, k2, band, mask) where kvec has shape (3, N, N, N) with
    integer entries, k2 = |k|^2, band = floor(N/3) and mask keeps the modes
    with every |k_i| <= band (the 2/3-rule band).
    """
    if N % 2 != 0 or N < 4:
        raise ValueError(f"resolution must be even and >= 4, got {N}")
    k1 = np.fft.fftfreq(N, d=1.0 / N).astype(np.int64)
    kx, ky, kz = np.meshgrid(k1, k1, k1, indexing="ij")
    kvec = np.stack([kx, ky, kz]).astype(np.float64)
    k2 = (kvec**2).sum(axis=0)
    band = N // 3
    mask = (np.abs(kx) <= band) & (np.abs(ky) <= band) & (np.abs(kz) <= band)
    kvec.flags.writeable = False
    k2.flags.writeable = False
    mask.flags.writeable = False
    return kvec, k2, band, mask


def grid_axes(N: int) -> np.ndarray:
    """Collocation points 2*pi*j/N along one axis."""
    return 2.0 * np.pi * np.arange(N) / N


def grid_points(N: int) -> np.ndarray:
    """Full collocation grid, shape (3, N, N, N)."""
    x = grid_axes(N)
    return np.stack(np.meshgrid(x, x, x, indexing="ij"))


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SpectralField:
    """Velocity field as Fourier coefficients, shape (3, N, N, N), FFT layout."""

    N: int
    coeffs: np.ndarray
    div_free: bool = False

    def __post_init__(self):
        if self.coeffs.shape != (3, self.N, self.N, self.N):
            raise ValueError("coefficient array must have shape (3, N, N, N)")
        object.__setattr__(self, "coeffs", _freeze(self.coeffs.astype(np.complex128)))


@dataclass(frozen=True)
class ScalarSpectralField:
    """Scalar field as Fourier coefficients, shape (N, N, N), FFT layout."""

    N: int
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != (self.N, self.N, self.N):
            raise ValueError("coefficient array must have shape (N, N, N)")
        object.__setattr__(self, "coeffs", _freeze(self.coeffs.astype(np.complex128)))

    @property
    def mean_mode(self) -> complex:
        return complex(self.coeffs[0, 0, 0])


def from_grid(values: np.ndarray, div_free: bool = False) -> SpectralField:
    """Transform real grid values (3, N, N, N) to coefficients."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 4 or values.shape[0] != 3:
        raise ValueError("expected grid values of shape (3, N, N, N)")
    N = values.shape[1]
    wavegrids(N)  # validates N
    coeffs = sfft.fftn(values, axes=(-3, -2, -1)) / N**3
    return SpectralField(N, coeffs, div_free=div_free)


def to_grid(field: SpectralField) -> np.ndarray:
    """Transform coefficients back to real grid values (3, N, N, N)."""
    N = field.N
    return np.real(sfft.ifftn(field.coeffs * N**3, axes=(-3, -2, -1)))


def scalar_from_grid(values: np.ndarray) -> ScalarSpectralField:
    values = np.asarray(values, dtype=np.float64)
    N = values.shape[0]
    wavegrids(N)
    return ScalarSpectralField(N, sfft.fftn(values) / N**3)


def scalar_to_grid(field: ScalarSpectralField) -> np.ndarray:
    return np.real(sfft.ifftn(field.coeffs * field.N**3))


def hermitian_defect(coeffs: np.ndarray) -> float:
    """Relative deviation from uhat(-k) = conj(uhat(k))."""
    flipped = np.conj(
        np.roll(coeffs[..., ::-1, ::-1, ::-1], shift=1, axis=(-3, -2, -1))
    )
    scale = np.linalg.norm(coeffs)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(coeffs - flipped) / scale)


def divergence_defect(field: SpectralField) -> float:
    """Relative size of k.uhat_k over the whole spectrum."""
    kvec, _, _, _ = wavegrids(field.N)
    div = (1j * kvec * field.coeffs).sum(axis=0)
    scale = np.linalg.norm(field.coeffs)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(div) / scale)


def leray_project(v: SpectralField) -> SpectralField:
    """Remove the gradient part: uhat_k -> uhat_k - k (k.uhat_k)/|k|^2."""
    kvec, k2, _, _ = wavegrids(v.N)
    k2safe = np.where(k2 == 0.0, 1.0, k2)
    kdotu = (kvec * v.coeffs).sum(axis=0)
    out = v.coeffs - kvec * (kdotu / k2safe)[None, ...]
    # mode k = 0 has no gradient part and passes through unchanged
    out[:, 0, 0, 0] = v.coeffs[:, 0, 0, 0]
    return SpectralField(v.N, out, div_free=True)


def inv_laplacian(s: ScalarSpectralField) -> ScalarSpectralField:
    """Zero-mean solution of Laplace(p) = s, multiplier -1/|k|^2.

    Rejects input whose mean mode is not negligible; the periodic problem is
    only solvable for zero-mean right-hand sides.
    """
    _, k2, _, _ = wavegrids(s.N)
    scale = np.linalg.norm(s.coeffs)
    if abs(s.mean_mode) > 1e-12 * max(scale, 1e-300):
        raise ValueError("inverse Laplacian requires a zero-mean field")
    k2safe = np.where(k2 == 0.0, 1.0, k2)
    out = -s.coeffs / k2safe
    out[0, 0, 0] = 0.0
    return ScalarSpectralField(s.N, out)


def sobolev_norm(v: SpectralField, k: int) -> float:
    """Bessel-potential norm ( (2pi)^3 sum (1+|k|^2)^k |uhat|^2 )^(1/2), k in 0..3."""
    if k not in (0, 1, 2, 3):
        raise ValueError("Sobolev order must be in {0, 1, 2, 3}")
    _, k2, _, _ = wavegrids(v.N)
    weight = (1.0 + k2) ** k
    return float(np.sqrt(VOLUME * np.sum(weight * np.abs(v.coeffs) ** 2)))


def sobolev_seminorm(v: SpectralField, order: int) -> float:
    """Homogeneous seminorm ( (2pi)^3 sum |k|^(2*order) |uhat|^2 )^(1/2)."""
    _, k2, _, _ = wavegrids(v.N)
    return float(np.sqrt(VOLUME * np.sum(k2**order * np.abs(v.coeffs) ** 2)))


def scalar_sobolev_norm(s: ScalarSpectralField, k: int) -> float:
    if k not in (0, 1, 2, 3):
        raise ValueError("Sobolev order must be in {0, 1, 2, 3}")
    _, k2, _, _ = wavegrids(s.N)
    weight = (1.0 + k2) ** k
    return float(np.sqrt(VOLUME * np.sum(weight * np.abs(s.coeffs) ** 2)))


def l2_norm(v: SpectralField) -> float:
    return sobolev_norm(v, 0)


def dealias(coeffs: np.ndarray, N: int) -> np.ndarray:
    """Zero every mode with any |k_i| > N/3 (2/3 rule)."""
    _, _, _, mask = wavegrids(N)
    return coeffs * mask


def convect(u: SpectralField, v: SpectralField) -> SpectralField:
    """Dealiased pseudo-spectral (u . grad) v.

    Both inputs are truncated to the 2/3 band before the product is formed on
    the grid, and the output is truncated again, so retained modes carry no
    aliasing error.  The result is generally not divergence-free.
    """
    if u.N != v.N:
        raise ValueError(f"resolution mismatch: {u.N} vs {v.N}")
    N = u.N
    kvec, _, _, mask = wavegrids(N)
    uh = u.coeffs * mask
    vh = v.coeffs * mask
    u_grid = np.real(sfft.ifftn(uh * N**3, axes=(-3, -2, -1)))
    grad_vh = 1j * kvec[None, :, ...] * vh[:, None, ...]  # (comp, deriv, N,N,N)
    grad_v = np.real(sfft.ifftn(grad_vh * N**3, axes=(-3, -2, -1)))
    out_grid = np.einsum("jxyz,cjxyz->cxyz", u_grid, grad_v)
    out = sfft.fftn(out_grid, axes=(-3, -2, -1)) / N**3
    return SpectralField(N, out * mask, div_free=False)


def divergence(v: SpectralField) -> ScalarSpectralField:
    kvec, _, _, _ = wavegrids(v.N)
    return ScalarSpectralField(v.N, (1j * kvec * v.coeffs).sum(axis=0))


def gradient(s: ScalarSpectralField) -> SpectralField:
    kvec, _, _, _ = wavegrids(s.N)
    return SpectralField(s.N, 1j * kvec * s.coeffs[None, ...])


def gradient_part(v: SpectralField) -> SpectralField:
    """The component removed by the Leray projector: grad invLap div v."""
    kvec, k2, _, _ = wavegrids(v.N)
    k2safe = np.where(k2 == 0.0, 1.0, k2)
    kdotu = (kvec * v.coeffs).sum(axis=0)
    out = kvec * (kdotu / k2safe)[None, ...]
    out[:, 0, 0, 0] = 0.0
    return SpectralField(v.N, out)


def pressure_decompose(u: SpectralField, cfg, basis):
    """Pressure response of the momentum balance at state u.

    Returns (pi_det, phi_pi) where pi_det = -invLap div((u.grad)u) and
    phi_pi[j] = -grad invLap div(Phi(u) e_j), one gradient field per noise
    mode.  Requires a divergence-free input.
    """
    from . import noise as noise_mod

    if not u.div_free and divergence_defect(u) > 1e-10:
        raise ValueError("pressure decomposition requires a divergence-free field")
    conv = convect(u, u)
    pi_det = inv_laplacian(divergence(conv))
    pi_det = ScalarSpectralField(u.N, -pi_det.coeffs)
    mode_fields = noise_mod.diffusion_mode_fields(cfg, basis, to_grid(u))
    phi_pi = []
    for g in mode_fields:
        gf = from_grid(g)
        phi_pi.append(SpectralField(u.N, -gradient_part(gf).coeffs))
    return pi_det, phi_pi


def evaluate_at_points(v: SpectralField, points: np.ndarray) -> np.ndarray:
    """Exact evaluation of the truncated series at arbitrary points (P, 3)."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    k1 = np.fft.fftfreq(v.N, d=1.0 / v.N)
    out = np.empty((points.shape[0], 3))
    # chunked 3-axis contraction keeps intermediates small
    for lo in range(0, points.shape[0], 2048):
        chunk = points[lo : lo + 2048]
        e1 = np.exp(1j * np.outer(chunk[:, 0], k1))
        e2 = np.exp(1j * np.outer(chunk[:, 1], k1))
        e3 = np.exp(1j * np.outer(chunk[:, 2], k1))
        vals = np.einsum(
            "pa,pb,pc,iabc->pi", e1, e2, e3, v.coeffs, optimize=True
        )
        out[lo : lo + 2048] = np.real(vals)
    return out


# --- snapshot file format -------------------------------------------------
#
# Header: little-endian uint32 N, uint32 flags (bit 0 = divergence-free),
# then 3*N^3 complex128 values, little endian, in lexicographic k order
# (k1 slowest, each axis running -N/2 .. N/2-1), components innermost.

_SNAP_HEADER = struct.Struct("<II")


def save_snapshot(field: SpectralField, path) -> None:
    flags = 1 if field.div_free else 0
    shifted = np.fft.fftshift(field.coeffs, axes=(-3, -2, -1))
    lex = np.moveaxis(shifted, 0, -1)  # (N, N, N, 3), k lexicographic
    with open(path, "wb") as fh:
        fh.write(_SNAP_HEADER.pack(field.N, flags))
        fh.write(np.ascontiguousarray(lex, dtype="<c16").tobytes())


def load_snapshot(path) -> SpectralField:
    with open(path, "rb") as fh:
        N, flags = _SNAP_HEADER.unpack(fh.read(_SNAP_HEADER.size))
        data = np.frombuffer(fh.read(), dtype="<c16")
    lex = data.reshape(N, N, N, 3)
    coeffs = np.fft.ifftshift(np.moveaxis(lex, -1, 0), axes=(-3, -2, -1))
    return SpectralField(N, coeffs.astype(np.complex128), div_free=bool(flags & 1))


# --- field constructors ----------------------------------------------------


def zero_field(N: int) -> SpectralField:
    return SpectralField(N, np.zeros((3, N, N, N), dtype=np.complex128), div_free=True)


def constant_field(N: int, value) -> SpectralField:
    coeffs = np.zeros((3, N, N, N), dtype=np.complex128)
    coeffs[:, 0, 0, 0] = np.asarray(value, dtype=np.float64)
    return SpectralField(N, coeffs, div_free=True)


def single_mode_field(N: int, amplitude: float = 1.0) -> SpectralField:
    """The shear mode amplitude * sin(x1) e2 (divergence-free)."""
    x = grid_points(N)
    vals = np.zeros((3, N, N, N))
    vals[1] = amplitude * np.sin(x[0])
    return from_grid(vals, div_free=True)


def taylor_green_field(N: int, amplitude: float = 1.0) -> SpectralField:
    """Planar Taylor-Green vortex A (sin x1 cos x2, -cos x1 sin x2, 0)."""
    x = grid_points(N)
    vals = np.zeros((3, N, N, N))
    vals[0] = amplitude * np.sin(x[0]) * np.cos(x[1])
    vals[1] = -amplitude * np.cos(x[0]) * np.sin(x[1])
    return from_grid(vals, div_free=True)


def random_divfree_field(
    N: int, seed: int, amplitude: float = 1.0, band_limited: bool = True,
    decay: float = 2.0
) -> SpectralField:
    """Seeded random smooth divergence-free field (Leray-projected noise).

    Coefficients decay like (1+|k|^2)^(-decay); the default 2 gives a field
    with a healthy W^{2,2} norm, while decay 1.75 sits at the W^{2,2}
    summability edge (rough data for worst-case rate experiments).  With
    band_limited the spectrum is confined to the 2/3 band.
    """
    rng = np.random.default_rng(seed)
    _, k2, _, mask = wavegrids(N)
    vals = rng.standard_normal((3, N, N, N))
    f = from_grid(vals)
    coeffs = f.coeffs / (1.0 + k2) ** decay
    if band_limited:
        coeffs = coeffs * mask
    field = leray_project(SpectralField(N, coeffs))
    norm = l2_norm(field)
    if norm == 0.0:
        return field
    return SpectralField(N, field.coeffs * (amplitude / norm), div_free=True)


def rescale_to_norm(field: SpectralField, k: int, target: float) -> SpectralField:
    """Scale a field so its W^{k,2} norm equals target."""
    current = sobolev_norm(field, k)
    if current == 0.0:
        raise ValueError("cannot rescale the zero field")
    return SpectralField(field.N, field.coeffs * (target / current), field.div_free)
