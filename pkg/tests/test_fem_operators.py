import numpy as np
import pytest

import snslab.fem as fem
import snslab.spectral as sp


@pytest.fixture(scope="module")
def space2():
    _, space = fem.build_space(2)
    return space, fem.assemble_static(space)


def test_mass_partition_of_unity(space2):
    space, ops = space2
    one = np.zeros(space.n_velocity)
    one[:space.n_scalar] = 1.0
    assert one @ (ops.M @ one) == pytest.approx((2 * np.pi) ** 3, rel=1e-12)


def test_stiffness_kernel_and_psd(space2):
    space, ops = space2
    one = np.zeros(space.n_velocity)
    one[:space.n_scalar] = 1.0
    assert np.max(np.abs(ops.A @ one)) < 1e-12
    rng = np.random.default_rng(1)
    for _ in range(100):
        u = rng.standard_normal(space.n_velocity)
        assert u @ (ops.A @ u) >= -1e-12 * (u @ u)


def test_divergence_operator_kernel(space2):
    space, ops = space2
    # constants are discretely divergence-free; B^T annihilates constants
    const = np.zeros(space.n_velocity)
    const[:space.n_scalar] = 1.0
    assert np.max(np.abs(ops.B @ const)) < 1e-12
    assert np.max(np.abs(ops.B.T @ np.ones(space.n_pressure))) < 1e-12


def test_divergence_full_rank_on_zero_mean(space2):
    space, ops = space2
    # second-smallest Schur eigenvalue strictly positive = full row rank
    # on the zero-mean pressure subspace
    c = fem.infsup_constant(space, ops)
    assert c > 1e-3


def test_infsup_positive_and_uniform():
    vals = {}
    for n in (2, 3, 4):
        _, space = fem.build_space(n)
        vals[n] = fem.infsup_constant(space)
        assert vals[n] > 1e-3
    assert min(vals.values()) / max(vals.values()) >= 0.5


def test_infsup_zero_with_constant_pressure(space2):
    space, ops = space2
    val = fem.infsup_constant(space, ops, include_constant_pressure=True)
    assert val < 1e-6


def test_convection_zero_velocity(space2):
    space, ops = space2
    C = fem.assemble_convection(space, ops, np.zeros(space.n_velocity))
    assert C.nnz == 0 or np.max(np.abs(C.data)) < 1e-15


def test_convection_skew_for_any_velocity(space2):
    # the half-divergence form integrates a perfect divergence: u^T C(w) u = 0
    # to quadrature exactness for every w, not only solenoidal ones
    space, ops = space2
    rng = np.random.default_rng(5)
    for _ in range(10):
        w = rng.standard_normal(space.n_velocity)
        u = rng.standard_normal(space.n_velocity)
        C = fem.assemble_convection(space, ops, w)
        assert abs(u @ (C @ u)) < 1e-11 * (u @ u) * max(1.0, np.abs(w).max())


def test_convection_consistency_with_spectral():
    # constant transport of the nodally interpolated sine shear mode:
    # C(w) u matches the load vector of cos(x1) e2 with O(h^2) consistency
    errs = []
    levels = (3, 4, 6)  # n = 2 leaves sin(x1) barely representable
    for n in levels:
        _, space = fem.build_space(n)
        ops = fem.assemble_static(space)
        w = fem.interpolate_velocity(sp.constant_field(12, (1.0, 0.0, 0.0)),
                                     space)
        u = fem.interpolate_velocity(sp.single_mode_field(12), space)
        C = fem.assemble_convection(space, ops, w)
        lhs = C @ u
        # oracle: quadrature load vector of the analytic advected field
        target = sp.convect(sp.constant_field(12, (1.0, 0.0, 0.0)),
                            sp.single_mode_field(12))
        rhs = fem.projection.velocity_load_vector(
            space, fem.projection.field_values_at_quadrature(space, target))
        scale = np.linalg.norm(rhs)
        errs.append(np.linalg.norm(lhs - rhs) / scale)
    errs = np.array(errs)
    assert np.all(np.diff(np.log(errs)) < 0)  # decreases under refinement
    hs = np.array([2 * np.pi * np.sqrt(3) / n for n in levels])
    slope = np.linalg.lstsq(np.vstack([np.log(hs), np.ones(len(levels))]).T,
                            np.log(errs), rcond=None)[0][0]
    assert slope > 1.6  # O(h^2) consistency


def test_scatter_pattern_reuse(space2):
    space, ops = space2
    rng = np.random.default_rng(0)
    w = rng.standard_normal(space.n_velocity)
    c1 = fem.assemble_convection(space, ops, w)
    c2 = fem.assemble_convection(space, ops, w)
    assert (c1 != c2).nnz == 0
