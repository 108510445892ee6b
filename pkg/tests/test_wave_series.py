import numpy as np
import pytest

from src.divisor.tau_divisor import TauLine, laurent_u
from src.solutions.wave_series import (
    ChebyshevPath,
    PotentialStrip,
    PoleTerm,
    lax_coefficients,
    obstruction_propagation_gap,
    panel_integral,
    residue_obstruction,
    wave_recursion,
    xi1_along,
)
from src.special.siegel_theta import PeriodMatrix
from src.special.weierstrass import wp, wp_prime, zeta_w
from src.utils.errors import ConfigInvalid, ResidueObstruction

UNIT_WINDOW = (-0.05 - 0.05j, 0.95 + 0.95j)
Z0 = 0.5 + 0.5j


def _genus_one_line(square_period, V=0.3, Z=0.0):
    return TauLine(B=square_period, U=[1.0], V=[V], Z=[Z], window=UNIT_WINDOW)


@pytest.fixture(scope="module")
def generic_line():
    B = PeriodMatrix([[1.1j, 0.3 + 0.2j], [0.3 + 0.2j, 0.9j]])
    return TauLine(B=B, U=[1.0, 0.4 + 0.1j], V=[0.2, -0.5], Z=[0.13, -0.21 + 0.1j],
                   window=(-0.6 - 0.6j, 0.6 + 0.6j))


def test_path_validation():
    with pytest.raises(ConfigInvalid):
        ChebyshevPath(0j, 0.0, 32)
    with pytest.raises(ConfigInvalid):
        ChebyshevPath(0j, 1.0, 4)


def test_path_integral_and_mean():
    path = ChebyshevPath(0.2j, 2.0, 32)
    coeffs = path.coeffs(path.x ** 2)
    assert path.mean(coeffs, period=1.0) == pytest.approx(((1 + 0.2j) ** 3 - (0.2j) ** 3) / 3, abs=1e-12)


def test_zero_potential_gives_trivial_series():
    path = ChebyshevPath(0j, 1.0, 32)
    series = wave_recursion(None, S=3, strip=PotentialStrip.constant(0.0, ns=4, path=path))
    assert series.order == 3
    for s in range(1, 4):
        np.testing.assert_allclose(series.coeffs[s], 0.0, atol=1e-14)


def test_constant_potential_polynomials():
    c = 0.7 - 0.2j
    path = ChebyshevPath(0.1j, 1.0, 32)
    series = wave_recursion(None, S=2, strip=PotentialStrip.constant(c, ns=3, path=path))
    x = path.x0 + 0.63
    assert series(1, x) == pytest.approx(c * 0.63 / 2, abs=1e-12)
    assert series(2, x) == pytest.approx(c * c * 0.63 ** 2 / 8, abs=1e-12)


def test_requires_line_or_strip():
    with pytest.raises(ConfigInvalid):
        wave_recursion(None, S=2)
    with pytest.raises(ConfigInvalid):
        wave_recursion(None, S=9, strip=PotentialStrip.constant(0.0, ns=10, path=ChebyshevPath(0j, 1.0, 16)))


def test_genus_one_obstructions_vanish(square_period):
    series = wave_recursion(_genus_one_line(square_period), S=6)
    assert series.halted_at is None
    assert series.order == 6
    zero = series.zeros[0]
    assert zero.q == pytest.approx(Z0, abs=1e-9)
    for s in range(7):
        assert abs(residue_obstruction(series, zero, s)) <= 1e-6
    for s in range(6):
        assert obstruction_propagation_gap(series, zero, s) <= 1e-6


def test_generic_second_obstruction_follows_pole_dynamics(generic_line):
    series = wave_recursion(generic_line, S=2)
    assert series.zeros
    for zero in series.zeros:
        entry = series.local_for(zero)
        assert abs(residue_obstruction(series, zero, 1)) <= 1e-8
        assert entry.r(1) == pytest.approx(-1.0, abs=1e-10)
        expected = 0.5 * (entry.q_ddot - 2 * entry.w)
        assert residue_obstruction(series, zero, 2) == pytest.approx(expected, rel=1e-6, abs=1e-9)
        assert obstruction_propagation_gap(series, zero, 1) <= 1e-8


def test_generic_line_halts(generic_line):
    series = wave_recursion(generic_line, S=3)
    assert series.halted_at == 2
    assert series.deviations
    with pytest.raises(ResidueObstruction) as info:
        wave_recursion(generic_line, S=3, strict=True)
    assert info.value.order == 2


def test_periodic_normalization(square_period):
    series = wave_recursion(_genus_one_line(square_period), S=3, periodic=True, x0=0j, length=2.0)
    assert series.b == pytest.approx(0.0, abs=1e-10)
    for s in range(1, 4):
        assert series.periodicity_defect(s) <= 1e-8


def test_periodic_requires_integer_direction(square_period):
    line = TauLine(B=square_period, U=[0.5], V=[0.3], Z=[0.0], window=(-0.1 - 0.1j, 1.9 + 1.9j))
    with pytest.raises(ConfigInvalid):
        wave_recursion(line, S=2, periodic=True)


def test_lax_coefficients_genus_one(square_period, square_lattice):
    series = wave_recursion(_genus_one_line(square_period, V=0.0), S=2)
    path = series.strip.path
    assert path.x0.imag == pytest.approx(0.225)
    x = path.x0 + 0.4
    lax = lax_coefficients(series, x)
    expected_u = 2 * wp(x - Z0, square_lattice) + 4 * square_lattice.eta1
    assert lax["u"] == pytest.approx(expected_u, rel=1e-8)
    assert lax["w3"] == pytest.approx(1.5 * wp_prime(x - Z0, square_lattice), rel=1e-7)


def test_lax_needs_two_orders(square_period):
    series = wave_recursion(_genus_one_line(square_period), S=1)
    with pytest.raises(ValueError):
        lax_coefficients(series, 0.3 + 0.2j)


def test_panel_integral_matches_zeta(square_period, square_lattice):
    line = _genus_one_line(square_period, V=0.0)
    a, c = 0.1 + 0.45j, 0.9 + 0.45j
    expected = 2 * zeta_w(a - Z0, square_lattice) - 2 * zeta_w(c - Z0, square_lattice) \
        + 4 * square_lattice.eta1 * (c - a)
    assert panel_integral(line, [a, c]) == pytest.approx(expected, rel=1e-9)


def test_pole_term_regular_part(square_period, square_lattice):
    line = _genus_one_line(square_period, V=0.0)
    series = wave_recursion(line, S=1)
    pole = PoleTerm.from_zero(line, series.zeros[0])
    assert pole.q == pytest.approx(Z0, abs=1e-9)
    x = Z0 + 0.03 - 0.02j
    expected = 2 * wp(x - Z0, square_lattice) + 4 * square_lattice.eta1 - pole.singular(x)
    value = np.polynomial.polynomial.polyval(x - pole.q, pole.taylor)
    assert value == pytest.approx(expected, rel=1e-8, abs=1e-8)
    data = laurent_u(line, series.zeros[0])
    assert pole.taylor[0] == pytest.approx(data.v, rel=1e-9, abs=1e-9)
    assert pole.taylor[1] == pytest.approx(data.w, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("level", [0.45, 0.55])
def test_xi1_does_not_depend_on_route(square_period, level):
    line = _genus_one_line(square_period, V=0.0)
    series = wave_recursion(line, S=1)
    start = series.strip.path.x0
    end = start + 1.0
    route = [start, complex(0.2, level), complex(0.8, level), end]
    assert xi1_along(series, line, route) == pytest.approx(series(1, end), rel=1e-8, abs=1e-10)
    assert xi1_along(series, line, [start, end]) == pytest.approx(series(1, end), rel=1e-10, abs=1e-12)


def test_route_checks(square_period):
    line = _genus_one_line(square_period, V=0.0)
    with pytest.raises(ConfigInvalid):
        panel_integral(line, [0.3 + 0.5j, 0.7 + 0.5j])
    with pytest.raises(ConfigInvalid):
        panel_integral(line, [0.3 + 0.2j])
    series = wave_recursion(line, S=1)
    with pytest.raises(ConfigInvalid):
        xi1_along(series, line, [0.1 + 0.1j, 0.9 + 0.1j])
