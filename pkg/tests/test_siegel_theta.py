import numpy as np
import pytest

from src.special.siegel_theta import (
    PeriodMatrix,
    TruncationPolicy,
    addition_residual,
    half_characteristics,
    kummer_map,
    quasiperiodicity_residual,
    random_period_matrix,
    theta_batch,
    theta_char_derivatives,
    theta_eval,
    theta_jet,
    theta_with_char,
    theta_with_char_general,
)
from src.utils.errors import InvalidPeriodMatrix, TruncationInsufficient
from src.utils.helpers import observed_order


def brute_theta_1d(z, tau, a=0.0, b=0.0, M=50):
    m = np.arange(-M, M + 1) + a
    return np.sum(np.exp(1j * np.pi * m * m * tau + 2j * np.pi * m * (z + b)))


def random_point(rng, g, im=0.3):
    return rng.uniform(-0.5, 0.5, g) + 1j * rng.uniform(-im, im, g)


def test_theta_at_origin_square(square_period, policy):
    assert abs(theta_eval([0.0], square_period, policy) - 1.0864348112133080) < 1e-12


@pytest.mark.parametrize("z", [0.3 + 0.2j, -0.41 + 0.05j, 0.77 - 0.3j])
def test_theta_matches_brute_force(z, policy):
    B = PeriodMatrix([[0.2 + 0.9j]])
    assert abs(theta_eval([z], B, policy) - brute_theta_1d(z, 0.2 + 0.9j)) < 1e-12


@pytest.mark.parametrize("g", [1, 2, 3])
def test_evenness(g, rng, policy):
    B = random_period_matrix(g, rng)
    for _ in range(5):
        z = random_point(rng, g)
        assert abs(theta_eval(-z, B, policy) - theta_eval(z, B, policy)) <= 2e-12 * max(1, abs(theta_eval(z, B, policy)))


def test_block_diagonal_factorization(policy):
    z = np.array([0.13 + 0.07j, -0.31 + 0.11j])
    B = PeriodMatrix(np.diag([1j, 2j]))
    expected = brute_theta_1d(z[0], 1j) * brute_theta_1d(z[1], 2j)
    assert abs(theta_eval(z, B, policy) - expected) < 1e-12


def test_determinism(rng, policy):
    B = random_period_matrix(2, rng)
    z = random_point(rng, 2)
    assert theta_eval(z, B, policy) == theta_eval(z, B, policy)


def test_batch_matches_single_evaluations(rng, policy):
    B = random_period_matrix(2, rng)
    zs = np.array([random_point(rng, 2) for _ in range(20)])
    seq = theta_batch(zs, B, policy, threads=1, chunk=7)
    par = theta_batch(zs, B, policy, threads=3, chunk=7)
    assert np.array_equal(seq, par)
    single = np.array([theta_eval(z, B, policy) for z in zs])
    np.testing.assert_allclose(seq, single, rtol=1e-13, atol=1e-13)


QUASI_TOLERANCES = {1: 1e-10, 2: 1e-9, 3: 1e-9}


@pytest.mark.parametrize("g", [1, 2, 3])
def test_quasiperiodicity(g, rng, policy):
    B = random_period_matrix(g, rng)
    for _ in range(6):
        z = random_point(rng, g)
        m = rng.integers(-3, 4, g)
        n = rng.integers(-2, 3, g)
        assert quasiperiodicity_residual(z, m, n, B, policy) <= QUASI_TOLERANCES[g]


def test_quasiperiodicity_square_example(square_period, policy):
    assert quasiperiodicity_residual([0.3 + 0.2j], [0], [1], square_period, policy) <= 1e-10


def test_integer_periodicity(rng, policy):
    B = random_period_matrix(2, rng)
    z = random_point(rng, 2)
    assert quasiperiodicity_residual(z, [2, -1], [0, 0], B, policy) <= 2e-12


@pytest.mark.parametrize("g", [1, 2])
def test_addition_formula(g, rng, policy):
    B = random_period_matrix(g, rng)
    for _ in range(5):
        z, w = random_point(rng, g), random_point(rng, g)
        assert addition_residual(z, w, B, policy) <= (1e-10 if g == 1 else 1e-9)


def test_addition_formula_at_zero_shift(rng, policy):
    B = random_period_matrix(2, rng)
    assert addition_residual(random_point(rng, 2), np.zeros(2), B, policy) <= 1e-10


def test_second_order_theta_normalization(square_period, policy):
    assert abs(theta_with_char((0.0,), [0.0], square_period, policy) - brute_theta_1d(0.0, 2j)) < 1e-12
    z = 0.21 + 0.08j
    expected = brute_theta_1d(2 * z, 2j, a=0.5)
    assert abs(theta_with_char((0.5,), [z], square_period, policy) - expected) < 1e-12


@pytest.mark.parametrize("eps", half_characteristics(2))
def test_second_order_theta_is_even(eps, rng, policy):
    B = random_period_matrix(2, rng)
    z = random_point(rng, 2)
    assert abs(theta_with_char(eps, -z, B, policy) - theta_with_char(eps, z, B, policy)) < 1e-11


def test_general_characteristic_reduces_to_theta(rng, policy):
    B = random_period_matrix(2, rng)
    z = random_point(rng, 2)
    assert abs(theta_with_char_general([0, 0], [0, 0], z, B, policy) - theta_eval(z, B, policy)) < 1e-12
    # θ[0,1/2](z) = θ(z + 1/2)
    shifted = theta_eval(z + np.array([0.5, 0.5]), B, policy)
    assert abs(theta_with_char_general([0, 0], [0.5, 0.5], z, B, policy) - shifted) < 1e-12


def test_characteristic_order_is_binary_counting():
    assert half_characteristics(2) == [(0.0, 0.0), (0.0, 0.5), (0.5, 0.0), (0.5, 0.5)]


def test_kummer_map(rng, policy):
    B = random_period_matrix(2, rng)
    z = random_point(rng, 2)
    K = kummer_map(z, B, policy)
    assert K.shape == (4,)
    np.testing.assert_allclose(kummer_map(-z, B, policy), K, atol=1e-10)

    K0 = theta_char_derivatives([0.0], PeriodMatrix([[1j]]), pol=policy)
    assert np.all(K0.real > 0) and np.all(np.abs(K0.imag) < 1e-14)


def test_jet_order_zero_matches_theta_eval(rng, policy):
    B = random_period_matrix(2, rng)
    z = random_point(rng, 2)
    jet = theta_jet(z, B, [np.array([1.0, 0.3]), np.array([0.2, -0.7])], 4, policy)
    assert jet[(0, 0)] == theta_eval(z, B, policy)


def test_odd_derivatives_vanish_at_origin(rng, policy):
    B = random_period_matrix(2, rng)
    U = np.array([0.7, -0.4])
    jet = theta_jet(np.zeros(2), B, [U], 3, policy)
    assert abs(jet[(1,)]) < 1e-11
    assert abs(jet[(3,)]) < 1e-10


def test_mixed_partials_commute(rng, policy):
    B = random_period_matrix(2, rng)
    z = random_point(rng, 2)
    U, V = np.array([1.0, 0.2]), np.array([-0.3, 0.8])
    a = theta_jet(z, B, [U, V], 2, policy)[(1, 1)]
    b = theta_jet(z, B, [V, U], 2, policy)[(1, 1)]
    assert abs(a - b) < 1e-10


def test_second_derivative_matches_finite_difference(square_period, policy):
    z, h = 0.17 + 0.05j, 1e-4
    jet = theta_jet([z], square_period, [np.array([1.0])], 2, policy)
    fd = (theta_eval([z + h], square_period, policy) - 2 * theta_eval([z], square_period, policy)
          + theta_eval([z - h], square_period, policy)) / h ** 2
    assert abs(jet[(2,)] - fd) < 1e-5


def test_first_derivative_convergence_order(rng, policy):
    B = random_period_matrix(2, rng)
    z = random_point(rng, 2)
    U = np.array([0.6, 0.9])
    exact = theta_jet(z, B, [U], 1, policy)[(1,)]
    errors = []
    for h in (1e-2, 5e-3, 2.5e-3):
        fd = (theta_eval(z + h * U, B, policy) - theta_eval(z - h * U, B, policy)) / (2 * h)
        errors.append(abs(fd - exact))
    assert min(observed_order(errors)) >= 1.9


def test_jet_rejects_high_order(square_period):
    with pytest.raises(ValueError):
        theta_jet([0.1], square_period, [np.array([1.0])], 5)


def test_invalid_period_matrix_reports_indices():
    with pytest.raises(InvalidPeriodMatrix, match=r"B\[0,1\]"):
        PeriodMatrix([[1j, 0.3], [0.1, 1j]])
    with pytest.raises(InvalidPeriodMatrix):
        PeriodMatrix([[1j, 0], [0, -1j]])


def test_period_matrix_from_config_shape_check():
    with pytest.raises(InvalidPeriodMatrix, match="B_im"):
        PeriodMatrix.from_config({"g": 2, "B_re": [[0, 0], [0, 0]], "B_im": [[1]]})
    B = PeriodMatrix.from_config({"g": 1, "B_re": [[0.0]], "B_im": [[1.0]]})
    assert B.g == 1


def test_argument_outside_window(square_period):
    pol = TruncationPolicy(target_abs_tol=1e-12, im_window=2.0)
    with pytest.raises(TruncationInsufficient):
        theta_eval([0.1 + 3.0j], square_period, pol)


def test_tolerance_is_relative_to_envelope(square_period):
    z = 0.1 + 1.9j
    value = theta_eval([z], square_period, TruncationPolicy(target_abs_tol=1e-12, im_window=2.0))
    reference = theta_eval([z], square_period, TruncationPolicy(target_abs_tol=1e-15, im_window=3.0))
    envelope = np.exp(np.pi * z.imag ** 2)
    assert abs(reference) > 1e3
    assert abs(value - reference) <= 1e-12 * envelope


def test_fixed_radius_too_small(square_period):
    with pytest.raises(TruncationInsufficient):
        theta_eval([0.0], square_period, TruncationPolicy(target_abs_tol=1e-12, radius=0.5))
