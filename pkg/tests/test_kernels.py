import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ridgeless_dae.kernels import (
    GRAM_JITTER,
    KernelSpec,
    TrainingGrid,
    gram_factor,
    gram_matrix,
    integrated_kernel_matrix,
    integrated_kernel_row,
    kernel_eval,
    kernel_integral,
    kernel_integral_quad,
    kernel_matrix,
    rkhs_norm_sq,
)

NUS = st.sampled_from([0.5, 1.5, 2.5])
ELLS = st.floats(0.5, 30.0)
SIGMAS = st.floats(0.2, 3.0)


def test_kernel_at_zero_distance_is_variance():
    assert kernel_eval(KernelSpec(0.5, 10.0, 2.0), 3.0, 3.0) == pytest.approx(4.0)


@pytest.mark.parametrize(
    "nu, expected",
    [
        (0.5, math.exp(-1.0)),
        (1.5, (1 + math.sqrt(3)) * math.exp(-math.sqrt(3))),
        (2.5, (1 + math.sqrt(5) + 5.0 / 3.0) * math.exp(-math.sqrt(5))),
    ],
)
def test_kernel_one_lengthscale_apart(nu, expected):
    # textbook Matern forms evaluated at |t - t'| = ell
    assert kernel_eval(KernelSpec(nu, 7.0), 0.0, 7.0) == pytest.approx(expected, rel=1e-14)


def test_kernel_rejects_bad_parameters():
    with pytest.raises(ValueError):
        KernelSpec(nu=1.0)
    with pytest.raises(ValueError):
        KernelSpec(lengthscale=0.0)
    with pytest.raises(ValueError):
        KernelSpec(scale=-1.0)


def test_exponential_kernel_integral_by_hand():
    # int_0^u exp(-|tau - c| / ell) dtau split at c
    ell, u, c = 10.0, 25.0, 7.0
    by_hand = ell * (1 - math.exp(-c / ell)) + ell * (1 - math.exp(-(u - c) / ell))
    assert kernel_integral(KernelSpec(0.5, ell), u, c) == pytest.approx(by_hand, rel=1e-14)


@pytest.mark.parametrize("nu", [0.5, 1.5, 2.5])
def test_integral_matches_high_precision_quadrature(nu):
    spec = KernelSpec(nu, 4.0, 1.3)
    k = lambda s: spec.variance * _mp_profile(nu, abs(s - 3) * math.sqrt(2 * nu) / 4.0)  # noqa: E731
    exact = mpmath.quad(k, [0, 3, 11])
    assert kernel_integral(spec, 11.0, 3.0) == pytest.approx(float(exact), abs=1e-13)


def _mp_profile(nu, z):
    z = mpmath.mpf(z)
    poly = {0.5: 1, 1.5: 1 + z, 2.5: 1 + z + z * z / 3}[nu]
    return poly * mpmath.e ** (-z)


@settings(max_examples=60, deadline=None)
@given(nu=NUS, ell=ELLS, sigma=SIGMAS, upper=st.floats(0.0, 80.0), center=st.floats(0.0, 80.0))
def test_closed_form_integral_agrees_with_quadrature(nu, ell, sigma, upper, center):
    spec = KernelSpec(nu, ell, sigma)
    assert abs(kernel_integral(spec, upper, center) - kernel_integral_quad(spec, upper, center)) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(nu=NUS, ell=ELLS, center=st.floats(0.0, 50.0))
def test_integral_vanishes_at_zero_and_derivative_is_kernel(nu, ell, center):
    spec = KernelSpec(nu, ell)
    assert kernel_integral(spec, 0.0, center) == 0.0
    u, h = 13.7, 1e-5
    fd = (kernel_integral(spec, u + h, center) - kernel_integral(spec, u - h, center)) / (2 * h)
    assert fd == pytest.approx(kernel_eval(spec, u, center), abs=1e-8)


def test_integral_rejects_negative_upper_limit():
    with pytest.raises(ValueError):
        kernel_integral(KernelSpec(), -1.0, 0.0)
    with pytest.raises(ValueError):
        integrated_kernel_row(KernelSpec(), -0.5, TrainingGrid([0.0, 1.0]))


@settings(max_examples=40, deadline=None)
@given(
    nu=NUS,
    ell=ELLS,
    sigma=SIGMAS,
    pts=st.lists(st.floats(0.0, 60.0), min_size=2, max_size=25, unique=True),
)
def test_gram_matrix_is_symmetric_psd(nu, ell, sigma, pts):
    spec = KernelSpec(nu, ell, sigma)
    K = gram_matrix(spec, TrainingGrid(np.sort(pts)))
    assert np.allclose(K, K.T)
    assert np.allclose(np.diag(K), spec.variance)
    assert np.linalg.eigvalsh(K).min() >= -1e-10 * spec.variance * len(pts)


@settings(max_examples=30, deadline=None)
@given(nu=NUS, ell=ELLS, n=st.integers(2, 40))
def test_gram_factor_reconstructs_jittered_gram(nu, ell, n):
    spec = KernelSpec(nu, ell)
    K = gram_matrix(spec, TrainingGrid.equispaced(40.0, n))
    L = gram_factor(K, spec.variance)
    target = K + GRAM_JITTER * np.eye(n)
    assert np.allclose(L @ L.T, target, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(nu=NUS, ell=ELLS, coeffs=st.lists(st.floats(-5, 5), min_size=6, max_size=6))
def test_rkhs_norm_nonnegative(nu, ell, coeffs):
    K = gram_matrix(KernelSpec(nu, ell), TrainingGrid.equispaced(10.0, 6))
    assert rkhs_norm_sq(K, coeffs) >= -1e-10


def test_rkhs_norm_dimension_mismatch():
    K = gram_matrix(KernelSpec(), TrainingGrid.equispaced(10.0, 4))
    with pytest.raises(ValueError):
        rkhs_norm_sq(K, np.ones(3))


def test_rkhs_norm_of_single_atom_is_variance():
    spec = KernelSpec(1.5, 3.0, 2.0)
    K = gram_matrix(spec, TrainingGrid([0.0, 5.0]))
    assert rkhs_norm_sq(K, [1.0, 0.0]) == pytest.approx(4.0)


def test_matrix_helpers_shapes_and_consistency():
    spec = KernelSpec(2.5, 6.0)
    grid = TrainingGrid.equispaced(20.0, 9)
    t = np.array([0.0, 3.3, 25.0])
    K = kernel_matrix(spec, t, grid)
    I = integrated_kernel_matrix(spec, t, grid)
    assert K.shape == I.shape == (3, 9)
    assert np.allclose(I[1], integrated_kernel_row(spec, 3.3, grid))
    assert np.allclose(I[0], 0.0)


def test_training_grid_validation():
    with pytest.raises(ValueError):
        TrainingGrid([0.0])
    with pytest.raises(ValueError):
        TrainingGrid([0.0, 2.0, 1.0])
    with pytest.raises(ValueError):
        TrainingGrid([-1.0, 1.0])
    g = TrainingGrid.equispaced(40.0, 41)
    assert len(g) == 41 and g.horizon == 40.0


def test_uniform_grid_is_seeded_and_contains_zero():
    a = TrainingGrid.uniform_iid(40.0, 20, seed=3)
    b = TrainingGrid.uniform_iid(40.0, 20, seed=3)
    c = TrainingGrid.uniform_iid(40.0, 20, seed=4)
    assert np.array_equal(a.points, b.points)
    assert not np.array_equal(a.points, c.points)
    assert a.points[0] == 0.0 and a.points[-1] <= 40.0
