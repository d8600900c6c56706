import numpy as np
import pytest

import snslab.fem as fem
import snslab.spectral as sp


@pytest.fixture(scope="module")
def space3():
    _, space = fem.build_space(3)
    return space, fem.assemble_static(space)


def test_project_constant_exact(space3):
    space, ops = space3
    f = sp.constant_field(12, (1.0, 2.0, 3.0))
    state = fem.project_l2_divfree(f, space, ops)
    el2, eh1 = fem.error_vs_spectral(state, f, space)
    assert el2 < 1e-12 and eh1 < 1e-11
    assert state.div_free


def test_projection_is_idempotent(space3):
    space, ops = space3
    state = fem.project_l2_divfree(sp.single_mode_field(12), space, ops)
    again, _ = fem.kkt_solve(space._cache["kkt_mass"], ops,
                             ops.M @ state.velocity)
    assert np.linalg.norm(again - state.velocity) < 1e-10 * np.linalg.norm(
        state.velocity)


def test_projection_mass_orthogonality(space3):
    # <f - Pi f, w_h>_M = 0 for discretely divergence-free w_h
    space, ops = space3
    f = sp.single_mode_field(12, amplitude=1.4)
    state = fem.project_l2_divfree(f, space, ops)
    load = fem.projection.velocity_load_vector(
        space, fem.projection.field_values_at_quadrature(space, f))
    rng = np.random.default_rng(8)
    for _ in range(5):
        z = rng.standard_normal(space.n_velocity)
        w, _ = fem.kkt_solve(space._cache["kkt_mass"], ops, ops.M @ z)
        defect = load @ w - state.velocity @ (ops.M @ w)
        assert abs(defect) < 1e-9 * np.linalg.norm(load) * np.linalg.norm(w)


def test_projection_callable_evaluator(space3):
    space, ops = space3
    f = sp.single_mode_field(12)

    def evaluator(pts):
        out = np.zeros((pts.shape[0], 3))
        out[:, 1] = np.sin(pts[:, 0])
        return out

    s1 = fem.project_l2_divfree(f, space, ops)
    s2 = fem.project_l2_divfree(evaluator, space, ops)
    assert np.allclose(s1.velocity, s2.velocity, atol=1e-11)


def test_projection_rates_in_bands():
    vel = sp.single_mode_field(12)
    x = sp.grid_points(12)
    pressure = sp.scalar_from_grid(np.cos(x[0] + x[1]))
    rec = fem.projection_error_rates(vel, pressure, [2, 3, 4, 6])
    assert 1.7 <= rec.velocity_l2_slope <= 2.3
    assert 0.8 <= rec.velocity_h1_slope <= 1.3
    assert 1.7 <= rec.pressure_l2_slope <= 2.3
    assert all(np.diff(rec.velocity_l2_errors) < 0)


def test_projection_rates_need_three_levels():
    vel = sp.single_mode_field(12)
    pressure = sp.scalar_from_grid(np.cos(sp.grid_points(12)[0]))
    with pytest.raises(ValueError):
        fem.projection_error_rates(vel, pressure, [2, 4])


def test_h1_stability_of_projection():
    # ||Pi_h v||_H1 <= C ||v||_H1 with C stable across the mesh family
    consts = []
    for n in (2, 3, 4):
        _, space = fem.build_space(n)
        ops = fem.assemble_static(space)
        worst = 0.0
        for seed in range(4):
            v = sp.random_divfree_field(12, seed=seed, amplitude=2.0)
            state = fem.project_l2_divfree(v, space, ops)
            h1 = np.sqrt(state.velocity @ (ops.M @ state.velocity)
                         + state.velocity @ (ops.A @ state.velocity))
            worst = max(worst, h1 / sp.sobolev_norm(v, 1))
        consts.append(worst)
    assert max(consts) < 2.0
    assert max(consts) / min(consts) < 2.0


def test_error_vs_spectral_triangle_and_zero(space3):
    space, ops = space3
    z = fem.zero_state(space)
    assert fem.error_vs_spectral(z, sp.zero_field(12), space) == (0.0, 0.0)
    a = fem.project_l2_divfree(sp.single_mode_field(12), space, ops)
    b = fem.project_l2_divfree(sp.taylor_green_field(12), space, ops)
    fa = sp.single_mode_field(12)
    fc = sp.taylor_green_field(12)
    e_ac = fem.error_vs_spectral(a, fc, space)
    e_ab = np.sqrt((a.velocity - b.velocity) @ (ops.M @ (a.velocity - b.velocity)))
    e_bc = fem.error_vs_spectral(b, fc, space)
    assert e_ac[0] <= e_ab + e_bc[0] + 1e-10


def test_sampler_fast_path_matches_generic():
    _, space = fem.build_space(2)  # 2 divides 8: fast path available
    f = sp.random_divfree_field(8, seed=3)
    fast = fem.spectral_sampler(space, 8)
    assert fast.fast
    vals_fast = fast.values(f)
    vals_gen = fast._generic_eval(f.coeffs)
    vals_gen = np.transpose(vals_gen, (1, 3, 0, 2))
    assert np.max(np.abs(vals_fast - vals_gen)) < 1e-11


def test_sampler_gradients_match_spectral_derivatives():
    _, space = fem.build_space(2)
    f = sp.random_divfree_field(8, seed=5)
    sampler = fem.spectral_sampler(space, 8)
    vals, grads = sampler.values_and_gradients(f)
    kvec, _, _, _ = sp.wavegrids(8)
    for d in range(3):
        df = sp.SpectralField(8, 1j * kvec[d] * f.coeffs)
        dv = sampler.values(df)
        assert np.max(np.abs(grads[..., d] - np.transpose(
            dv, (0, 1, 3, 2)))) < 1e-11
