import numpy as np
import pytest

from src.divisor.series import BiSeries


@pytest.fixture
def xi():
    return BiSeries.variable("x", ns=2, nx=6)


@pytest.fixture
def s():
    return BiSeries.variable("s", ns=2, nx=6)


def test_log_of_exp_is_identity(xi, s):
    f = 0.3 + 0.7 * xi - 0.2j * s + 0.1 * xi * s
    back = f.exp().log()
    assert np.max(np.abs(back.c - f.c)) < 1e-13


def test_reciprocal(xi, s):
    f = 2.0 - xi + 0.5 * s * xi
    one = f * f.reciprocal()
    expected = BiSeries.constant(1.0, 2, 6)
    assert np.max(np.abs(one.c - expected.c)) < 1e-14


def test_geometric_series(xi):
    g = 1 / (1 - xi)
    assert np.allclose(g.c[0], np.ones(7))
    assert np.allclose(g.c[1:], 0.0)


def test_log_one_plus_x(xi):
    coeffs = (1 + xi).log().c[0]
    expected = [0.0] + [(-1) ** (n + 1) / n for n in range(1, 7)]
    assert np.allclose(coeffs, expected)


def test_compose_shift(xi, s):
    f = xi * xi
    shift = 0.5 * s
    composed = f.compose_x(shift)
    # (ξ + s/2)² = ξ² + ξs + s²/4
    assert composed.c[0, 2] == pytest.approx(1.0)
    assert composed.c[1, 1] == pytest.approx(1.0)
    assert composed.c[2, 0] == pytest.approx(0.25)


def test_compose_requires_vanishing_shift(xi):
    with pytest.raises(ValueError):
        xi.compose_x(BiSeries.constant(0.1, 2, 6))


def test_derivatives_and_division(xi, s):
    f = xi * (1 + s) + xi ** 3
    assert f.deriv("x")(0.0, 0.0) == pytest.approx(1.0)
    assert f.deriv("s").c[0, 1] == pytest.approx(1.0)
    g = f.divide_x()
    assert g(0.0, 0.0) == pytest.approx(1.0)
    with pytest.raises(ZeroDivisionError):
        (1 + xi).divide_x()


def test_numpy_scalars_multiply(xi):
    f = np.complex128(2.0) * xi
    assert isinstance(f, BiSeries)
    assert f.c[0, 1] == 2.0


def test_evaluation_matches_polynomial(xi, s):
    f = 1 + 2 * xi + 3 * s * xi
    assert f(0.1, 0.2) == pytest.approx(1 + 0.2 + 3 * 0.02)


def test_log_of_zero_constant_fails(xi):
    with pytest.raises(ZeroDivisionError):
        xi.log()
