import numpy as np
import pytest

import snslab.noise as nz
import snslab.spectral as sp


def l2_inner(a, b):
    return float(np.real(np.sum(np.conj(a.coeffs) * b.coeffs)) * sp.VOLUME)


def test_from_grid_constant():
    f = sp.from_grid(np.broadcast_to(
        np.array([1.0, 0.0, 0.0])[:, None, None, None], (3, 8, 8, 8)).copy())
    assert f.coeffs[0, 0, 0, 0] == pytest.approx(1.0)
    c = np.array(f.coeffs)
    c[0, 0, 0, 0] = 0.0
    assert np.max(np.abs(c)) < 1e-15


def test_from_grid_single_sine():
    N = 8
    x = sp.grid_points(N)
    vals = np.zeros((3, N, N, N))
    vals[1] = np.sin(x[0])
    f = sp.from_grid(vals)
    assert f.coeffs[1, 1, 0, 0] == pytest.approx(-0.5j, abs=1e-14)
    assert f.coeffs[1, N - 1, 0, 0] == pytest.approx(0.5j, abs=1e-14)
    live = np.abs(f.coeffs) > 1e-14
    assert live.sum() == 2


def test_roundtrip_and_parseval():
    rng = np.random.default_rng(0)
    vals = rng.standard_normal((3, 16, 16, 16))
    f = sp.from_grid(vals)
    back = sp.to_grid(f)
    assert np.max(np.abs(back - vals)) < 1e-12
    grid_l2 = np.sqrt(np.sum(vals**2) / 16**3 * sp.VOLUME)
    assert sp.l2_norm(f) == pytest.approx(grid_l2, rel=1e-12)


def test_odd_resolution_rejected():
    with pytest.raises(ValueError):
        sp.wavegrids(7)
    with pytest.raises(ValueError):
        sp.wavegrids(2)


def test_leray_annihilates_gradients():
    N = 16
    x = sp.grid_points(N)
    s = sp.scalar_from_grid(-np.cos(x[0]))
    g = sp.gradient(s)  # sin(x1) e1
    assert sp.l2_norm(sp.leray_project(g)) < 1e-13 * sp.l2_norm(g)


def test_leray_fixes_divergence_free_and_idempotent():
    v = sp.single_mode_field(16)
    pv = sp.leray_project(v)
    assert np.allclose(pv.coeffs, v.coeffs, atol=1e-15)
    w = sp.random_divfree_field(16, seed=4)
    rough = sp.SpectralField(16, w.coeffs + sp.gradient(
        sp.scalar_from_grid(np.sin(sp.grid_points(16)[2]))).coeffs)
    p1 = sp.leray_project(rough)
    p2 = sp.leray_project(p1)
    assert np.max(np.abs(p2.coeffs - p1.coeffs)) < 1e-14 * np.max(np.abs(p1.coeffs))


def test_leray_self_adjoint():
    rng = np.random.default_rng(3)
    for _ in range(5):
        v = sp.from_grid(rng.standard_normal((3, 8, 8, 8)))
        w = sp.from_grid(rng.standard_normal((3, 8, 8, 8)))
        lhs = l2_inner(sp.leray_project(v), w)
        rhs = l2_inner(v, sp.leray_project(w))
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_inv_laplacian_single_modes():
    N = 8
    x = sp.grid_points(N)
    s = sp.scalar_from_grid(np.sin(x[0]))
    out = sp.scalar_to_grid(sp.inv_laplacian(s))
    assert np.allclose(out, -np.sin(x[0]), atol=1e-13)
    s2 = sp.scalar_from_grid(np.cos(2 * x[1]))
    out2 = sp.scalar_to_grid(sp.inv_laplacian(s2))
    assert np.allclose(out2, -np.cos(2 * x[1]) / 4.0, atol=1e-13)


def test_inv_laplacian_rejects_mean():
    s = sp.scalar_from_grid(np.ones((8, 8, 8)))
    with pytest.raises(ValueError):
        sp.inv_laplacian(s)


def test_inv_laplacian_two_sided():
    rng = np.random.default_rng(1)
    vals = rng.standard_normal((16, 16, 16))
    vals -= vals.mean()
    s = sp.scalar_from_grid(vals)
    _, k2, _, _ = sp.wavegrids(16)
    p = sp.inv_laplacian(s)
    recon = sp.ScalarSpectralField(16, -k2 * p.coeffs)
    assert np.linalg.norm(recon.coeffs - s.coeffs) < 1e-12 * np.linalg.norm(s.coeffs)


def test_sobolev_norms_single_mode():
    f = sp.single_mode_field(16)
    assert sp.sobolev_norm(f, 0) == pytest.approx(np.sqrt(sp.VOLUME / 2))
    assert sp.sobolev_norm(f, 1) == pytest.approx((2 * np.pi) ** 1.5)
    assert sp.sobolev_norm(sp.zero_field(8), 3) == 0.0
    with pytest.raises(ValueError):
        sp.sobolev_norm(f, 4)


def test_sobolev_norm_monotone_in_order():
    f = sp.random_divfree_field(16, seed=8)
    norms = [sp.sobolev_norm(f, k) for k in range(4)]
    assert norms == sorted(norms)


def test_convect_constant_advection():
    N = 16
    u = sp.constant_field(N, (1.0, 0.0, 0.0))
    v = sp.single_mode_field(N)
    out = sp.to_grid(sp.convect(u, v))
    x = sp.grid_points(N)
    want = np.zeros((3, N, N, N))
    want[1] = np.cos(x[0])
    assert np.max(np.abs(out - want)) < 1e-13


def test_convect_constant_field_gives_zero():
    u = sp.single_mode_field(16)
    v = sp.constant_field(16, (0.3, -0.2, 0.9))
    assert sp.l2_norm(sp.convect(u, v)) < 1e-14


def test_convect_resolution_mismatch():
    with pytest.raises(ValueError):
        sp.convect(sp.single_mode_field(8), sp.single_mode_field(16))


def test_convect_skew_symmetry():
    # quadrature check of int (u.grad)v . v = 0 for dealiased fields
    for seed in range(5):
        u = sp.random_divfree_field(16, seed=seed, amplitude=2.0)
        v = sp.random_divfree_field(16, seed=seed + 100, amplitude=1.5)
        val = abs(l2_inner(sp.convect(u, v), v))
        assert val < 1e-11 * max(sp.l2_norm(u) * sp.sobolev_norm(v, 1) ** 2, 1.0)


def test_convect_dealias_band():
    # a product mode just outside the retained band is zeroed
    N = 12
    band = N // 3
    x = sp.grid_points(N)
    vals = np.zeros((3, N, N, N))
    vals[1] = np.sin(band * x[0])
    u = sp.constant_field(N, (1.0, 0.0, 0.0))
    v = sp.from_grid(vals)
    out = sp.convect(u, v)  # cos(band x1): inside band, must be exact
    want = np.zeros((3, N, N, N))
    want[1] = band * np.cos(band * x[0])
    assert np.max(np.abs(sp.to_grid(out) - want)) < 1e-12 * band
    vals2 = np.zeros((3, N, N, N))
    vals2[1] = np.sin((band + 1) * x[0])
    out2 = sp.convect(u, sp.from_grid(vals2))  # input outside band: zeroed
    assert sp.l2_norm(out2) < 1e-13


def test_pressure_decompose_zero_state_additive():
    N = 8
    dcfg = nz.DiffusionConfig("additive", gamma=0.8, J=4)
    basis = nz.build_basis(4, 2.0)
    pi, phi_pi = sp.pressure_decompose(sp.zero_field(N), dcfg, basis)
    assert sp.scalar_sobolev_norm(pi, 0) == 0.0
    mode_fields = nz.diffusion_mode_fields(dcfg, basis, sp.to_grid(sp.zero_field(N)))
    for j, g in enumerate(phi_pi):
        gf = sp.from_grid(mode_fields[j])
        want = sp.SpectralField(N, -sp.gradient_part(gf).coeffs)
        assert np.allclose(g.coeffs, want.coeffs, atol=1e-14)


def test_pressure_decompose_shear_mode():
    # oracle: brute-force divergence of the dealiased self-advection
    N = 16
    u = sp.single_mode_field(N)
    dcfg = nz.DiffusionConfig("additive", gamma=0.0, J=2)
    basis = nz.build_basis(2, 2.0)
    pi, _ = sp.pressure_decompose(u, dcfg, basis)
    conv = sp.convect(u, u)
    div = sp.divergence(conv)
    assert np.linalg.norm(div.coeffs) < 1e-13
    assert sp.scalar_sobolev_norm(pi, 0) < 1e-13


def test_pressure_decompose_gradient_parts():
    dcfg = nz.DiffusionConfig("multiplicative", gamma=0.6, J=6)
    basis = nz.build_basis(6, 2.0)
    for seed in range(3):
        u = sp.random_divfree_field(16, seed=seed)
        _, phi_pi = sp.pressure_decompose(u, dcfg, basis)
        for g in phi_pi:
            scale = sp.l2_norm(g)
            if scale > 0:
                assert sp.l2_norm(sp.leray_project(g)) < 1e-11 * scale


def test_pressure_decompose_rejects_non_divfree():
    x = sp.grid_points(8)
    vals = np.zeros((3, 8, 8, 8))
    vals[0] = np.sin(x[0])
    bad = sp.from_grid(vals)
    dcfg = nz.DiffusionConfig("additive", J=2)
    with pytest.raises(ValueError):
        sp.pressure_decompose(bad, dcfg, nz.build_basis(2, 2.0))


def test_pressure_norm_bound_sweep():
    # || pi_det ||_W12 <= C ||u||_W12 ||u||_W22 with C stable under refinement
    dcfg = nz.DiffusionConfig("additive", gamma=0.0, J=2)
    basis = nz.build_basis(2, 2.0)
    ratio = {}
    for N in (8, 16):
        rng = np.random.default_rng(12)
        worst = 0.0
        for _ in range(10):
            u = sp.random_divfree_field(N, int(rng.integers(2**31)),
                                        amplitude=float(rng.uniform(0.5, 3.0)))
            pi, _ = sp.pressure_decompose(u, dcfg, basis)
            worst = max(worst, sp.scalar_sobolev_norm(pi, 1)
                        / (sp.sobolev_norm(u, 1) * sp.sobolev_norm(u, 2)))
        ratio[N] = worst
    assert 0.5 <= ratio[16] / ratio[8] <= 2.0


def test_evaluate_at_points():
    f = sp.single_mode_field(16)
    val = sp.evaluate_at_points(f, np.array([[np.pi / 2, 0.0, 0.0]]))
    assert np.allclose(val, [[0.0, 1.0, 0.0]], atol=1e-13)
    # matches collocation values at grid points
    g = sp.random_divfree_field(8, seed=5)
    grid = sp.to_grid(g)
    x = sp.grid_points(8)
    pts = np.stack([x[0].ravel(), x[1].ravel(), x[2].ravel()], axis=1)[:37]
    vals = sp.evaluate_at_points(g, pts)
    flat = grid.reshape(3, -1)[:, :37].T
    assert np.max(np.abs(vals - flat)) < 1e-12
    c = sp.constant_field(8, (1.0, 2.0, -3.0))
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, 2 * np.pi, size=(100, 3))
    assert np.allclose(sp.evaluate_at_points(c, pts),
                       np.tile([1.0, 2.0, -3.0], (100, 1)), atol=1e-13)


def test_snapshot_roundtrip(tmp_path):
    f = sp.random_divfree_field(8, seed=11, amplitude=2.0)
    path = tmp_path / "field.snap"
    sp.save_snapshot(f, path)
    g = sp.load_snapshot(path)
    assert g.N == f.N and g.div_free == f.div_free
    assert np.array_equal(g.coeffs, f.coeffs)


def test_hermitian_and_divergence_defects():
    f = sp.random_divfree_field(16, seed=2)
    assert sp.hermitian_defect(f.coeffs) < 1e-13
    assert sp.divergence_defect(f) < 1e-13
    bad = np.array(f.coeffs)
    bad[0, 1, 2, 3] += 1.0
    assert sp.hermitian_defect(bad) > 1e-3
