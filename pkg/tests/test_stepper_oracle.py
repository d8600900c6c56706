"""Dense divergence-free Galerkin oracle for the semi-implicit step.

The oracle assembles the step operator analytically in coefficient space:
diffusion as a diagonal multiplier, convection as a direct convolution sum
restricted to the dealiasing band, and the projector as an explicit
orthonormal basis of the divergence-free subspace.  The resulting dense
system is solved with a direct factorisation, independent of the FFT
pseudo-spectral product and Krylov path used by the production step.
"""

import numpy as np
import pytest

import snslab.spectral as sp
from snslab.stepper import StepConfig, step_semi_implicit


def all_modes(N):
    k1 = np.fft.fftfreq(N, d=1.0 / N).astype(int)
    return [(a, b, c) for a in k1 for b in k1 for c in k1]


def divfree_basis(N):
    """Orthonormal complex basis of the divergence-free coefficient space."""
    modes = all_modes(N)
    idx = {k: i for i, k in enumerate(modes)}
    cols = []
    for k in modes:
        kv = np.array(k, dtype=float)
        if k == (0, 0, 0):
            for c in range(3):
                e = np.zeros((3, len(modes)), dtype=complex)
                e[c, idx[k]] = 1.0
                cols.append(e.ravel())
            continue
        a = np.array([1.0, 0.0, 0.0])
        if abs(np.dot(a, kv)) > 0.9 * np.linalg.norm(kv):
            a = np.array([0.0, 1.0, 0.0])
        t1 = np.cross(kv, a)
        t1 /= np.linalg.norm(t1)
        t2 = np.cross(kv, t1)
        t2 /= np.linalg.norm(t2)
        for t in (t1, t2):
            e = np.zeros((3, len(modes)), dtype=complex)
            e[:, idx[k]] = t
            cols.append(e.ravel())
    return modes, idx, np.array(cols).T  # (3*N^3, dim)


def dense_step_operator(w_field, cfg, N):
    """Full step matrix on stacked coefficients, built by direct convolution."""
    modes = all_modes(N)
    idx = {k: i for i, k in enumerate(modes)}
    band = N // 3
    nm = len(modes)
    in_band = {k: all(abs(c) <= band for c in k) for k in modes}
    w_hat = np.array(w_field.coeffs.reshape(3, nm))
    for k in modes:
        if not in_band[k]:
            w_hat[:, idx[k]] = 0.0

    conv = np.zeros((nm, nm), dtype=complex)  # scalar block, same per component
    for k in modes:
        if not in_band[k]:
            continue
        for q in modes:
            if not in_band[q]:
                continue
            p = (k[0] - q[0], k[1] - q[1], k[2] - q[2])
            if p not in idx or not in_band[p]:
                continue
            conv[idx[k], idx[q]] += 1j * (
                q[0] * w_hat[0, idx[p]] + q[1] * w_hat[1, idx[p]]
                + q[2] * w_hat[2, idx[p]])

    # Leray projector, block per mode
    P = np.zeros((3 * nm, 3 * nm), dtype=complex)
    for k in modes:
        i = idx[k]
        kv = np.array(k, dtype=float)
        block = np.eye(3)
        k2 = kv @ kv
        if k2 > 0:
            block = block - np.outer(kv, kv) / k2
        for a in range(3):
            for b in range(3):
                P[a * nm + i, b * nm + i] = block[a, b]

    diag = np.zeros(3 * nm)
    for k in modes:
        k2 = k[0] ** 2 + k[1] ** 2 + k[2] ** 2
        for c in range(3):
            diag[c * nm + idx[k]] = 1.0 + cfg.tau * cfg.mu * k2
    C3 = np.kron(np.eye(3), conv)
    return np.diag(diag) + cfg.tau * (P @ C3), P


def oracle_step(u_prev, noise_grid, cfg):
    """Dense Galerkin solve of the semi-implicit step on the div-free basis."""
    N = u_prev.N
    nm = N**3
    A, P = dense_step_operator(u_prev, cfg, N)
    _, _, B = divfree_basis(N)
    rhs = u_prev.coeffs.reshape(3, nm).ravel().astype(complex)
    if noise_grid is not None:
        noise_hat = sp.from_grid(noise_grid).coeffs.reshape(3, nm).ravel()
        rhs = rhs + P @ noise_hat
    G = B.conj().T @ A @ B
    y = np.linalg.solve(G, B.conj().T @ rhs)
    out = (B @ y).reshape(3, N, N, N)
    return sp.SpectralField(N, out, div_free=True)


@pytest.mark.parametrize("seed", range(20))
def test_step_matches_dense_galerkin(seed):
    N = 4
    rng = np.random.default_rng(1000 + seed)
    u_prev = sp.random_divfree_field(N, seed=seed, amplitude=1.0 + seed / 10.0)
    noise = 0.3 * rng.standard_normal((3, N, N, N))
    cfg = StepConfig(mu=1.0, tau=1 / 16, M=1)
    got = step_semi_implicit(u_prev, noise, cfg)
    want = oracle_step(u_prev, noise, cfg)
    scale = sp.l2_norm(want)
    diff = sp.SpectralField(N, got.coeffs - want.coeffs)
    assert sp.l2_norm(diff) < 1e-9 * max(scale, 1.0)


def test_oracle_agrees_with_closed_form_decay():
    N = 4
    cfg = StepConfig(mu=0.7, tau=1 / 8, M=1)
    u0 = sp.single_mode_field(N, amplitude=1.3)
    out = oracle_step(u0, None, cfg)
    want = sp.single_mode_field(N, amplitude=1.3 / (1 + 0.7 / 8))
    assert np.allclose(out.coeffs, want.coeffs, atol=1e-12)
