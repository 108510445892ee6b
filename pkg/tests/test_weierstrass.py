import numpy as np
import pytest

from src.special.weierstrass import (
    BlochMultipliers,
    EllipticLattice,
    bloch_multiplier,
    half_period_values,
    invariants,
    lame_residual,
    phi_lame,
    phi_lame_derivatives,
    sigma,
    wp,
    wp_laurent_coefficients,
    wp_prime,
    zeta_w,
)
from src.utils.errors import InvalidLattice, NearSingularInput, PoleAtLatticePoint


def eisenstein_invariants(lat, N=200):
    """Oráculo lento: g2 = 60 Σ' w^-4, g3 = 140 Σ' w^-6 sobre una caja simétrica."""
    m, n = np.meshgrid(np.arange(-N, N + 1), np.arange(-N, N + 1))
    w = 2 * m * lat.omega1 + 2 * n * lat.omega2
    w = w[(m != 0) | (n != 0)]
    return 60 * np.sum(w ** -4.0), 140 * np.sum(w ** -6.0)


def random_points(rng, lat, count):
    a = rng.uniform(-0.45, 0.45, count)
    b = rng.uniform(-0.45, 0.45, count)
    pts = 2 * a * lat.omega1 + 2 * b * lat.omega2
    return pts[np.abs(pts) > 0.05]


@pytest.fixture(params=["square", "skew"])
def lattice(request, square_lattice, skew_lattice):
    return square_lattice if request.param == "square" else skew_lattice


def test_invalid_orientation():
    with pytest.raises(InvalidLattice):
        EllipticLattice(0.5, -0.5j)


def test_legendre_relation(lattice):
    assert lattice.legendre_residual <= 1e-12


def test_legendre_defect_rejected_at_construction(monkeypatch):
    exact = EllipticLattice.zeta
    monkeypatch.setattr(EllipticLattice, "zeta", lambda self, x: exact(self, x) + 1e-11)
    with pytest.raises(InvalidLattice):
        EllipticLattice(0.5, 0.5j)


@pytest.mark.parametrize("omega2", [0.5j, 0.17 + 0.62j, 0.3 + 1.2j, -0.2 + 0.45j])
def test_legendre_relation_at_construction(omega2):
    assert EllipticLattice(0.5, omega2).legendre_residual <= 1e-12


def test_from_config_round_trip(skew_lattice):
    lat = EllipticLattice.from_config(skew_lattice.to_config())
    assert lat.omega2 == skew_lattice.omega2


def test_sigma_normalization(lattice):
    assert sigma(0.0, lattice) == 0
    for x in (1e-3, 1e-4j, 1e-5 * (1 + 1j)):
        assert abs(sigma(x, lattice) / x - 1) < 1e-8


def test_parity(lattice, rng):
    x = random_points(rng, lattice, 100)
    assert np.max(np.abs(sigma(-x, lattice) + sigma(x, lattice))) < 1e-10
    assert np.max(np.abs(zeta_w(-x, lattice) + zeta_w(x, lattice))) < 1e-10
    assert np.max(np.abs(wp(-x, lattice) - wp(x, lattice))) < 1e-10


def test_sigma_quasiperiodicity(lattice, rng):
    w1, eta1 = lattice.omega1, lattice.eta1
    for x in random_points(rng, lattice, 10):
        lhs = sigma(x + 2 * w1, lattice)
        rhs = -sigma(x, lattice) * np.exp(2 * eta1 * (x + w1))
        assert abs(lhs - rhs) <= 1e-10 * max(1, abs(rhs))


def test_wp_periodic_far_from_cell(lattice):
    x = 0.13 + 0.07j
    far = x + 6 * lattice.omega1 - 4 * lattice.omega2
    assert abs(wp(far, lattice) - wp(x, lattice)) < 1e-9


def test_half_period_values_sum_to_zero(lattice):
    assert abs(sum(half_period_values(lattice))) < 1e-9


def test_invariants_against_lattice_sums(lattice):
    g2, g3 = invariants(lattice)
    o2, o3 = eisenstein_invariants(lattice)
    assert abs(g2 - o2) < 1e-4 * abs(g2)
    assert abs(g3 - o3) < 1e-3 * max(1, abs(g3))


def test_differential_equation(lattice, rng):
    g2, g3 = invariants(lattice)
    for x in random_points(rng, lattice, 20):
        p, dp = wp(x, lattice), wp_prime(x, lattice)
        assert abs(dp ** 2 - (4 * p ** 3 - g2 * p - g3)) <= 1e-8 * max(1, abs(dp) ** 2)


def test_laurent_normalization(lattice):
    c = wp_laurent_coefficients(lattice, 6)
    for x in (5e-2, 3e-2 * 1j):
        series = x ** -2 + sum(c[n] * x ** (2 * n - 2) for n in range(2, 7))
        assert abs(wp(x, lattice) - series) < 1e-9


def test_pole_guard(square_lattice):
    with pytest.raises(PoleAtLatticePoint):
        wp(2 * square_lattice.omega1 + 1e-12, square_lattice)


def test_phi_has_no_constant_term(lattice):
    z = 0.31 + 0.22j
    xs = np.array([1e-2, 1e-3, 1e-4, 1e-5]) * (1 + 0.5j)
    dev = np.abs(np.array([phi_lame(x, z, lattice) for x in xs]) - 1 / xs)
    slope = np.polyfit(np.log(np.abs(xs)), np.log(dev), 1)[0]
    assert slope >= 0.9


def test_phi_periodic_in_spectral_parameter(lattice):
    x, z = 0.21 - 0.1j, 0.3 + 0.15j
    assert abs(phi_lame(x, z + 2 * lattice.omega1, lattice) - phi_lame(x, z, lattice)) < 1e-10


@pytest.mark.parametrize("alpha", [1, 2])
def test_phi_bloch_property(lattice, alpha):
    x, z = 0.21 - 0.1j, 0.3 + 0.15j
    shift = 2 * lattice.half_period(alpha)
    lhs = phi_lame(x + shift, z, lattice)
    rhs = bloch_multiplier(alpha, z, lattice) * phi_lame(x, z, lattice)
    assert abs(lhs - rhs) <= 1e-10 * max(1, abs(rhs))


def test_bloch_multiplier_inversion(lattice):
    z = 0.27 + 0.11j
    assert abs(bloch_multiplier(1, -z, lattice) * bloch_multiplier(1, z, lattice) - 1) < 1e-12


def test_phi_derivative_matches_finite_difference(square_lattice):
    x, z, h = 0.2 + 0.1j, 0.35 - 0.2j, 1e-5
    _, d1, _ = phi_lame_derivatives(x, z, square_lattice)
    fd = (phi_lame(x + h, z, square_lattice) - phi_lame(x - h, z, square_lattice)) / (2 * h)
    assert abs(d1 - fd) < 1e-7


def test_phi_near_singular(square_lattice):
    with pytest.raises(NearSingularInput):
        phi_lame(0.3, 0.3, square_lattice)


def test_lame_residual_grid(lattice):
    grid = np.linspace(0.25, 0.75, 10)
    for a in grid:
        for b in grid:
            x = 2 * a * lattice.omega1 + 2 * b * lattice.omega2
            z = 2 * (0.3 + 0.4 * b) * lattice.omega1 + 2 * (0.2 + 0.5 * a) * lattice.omega2
            if lattice.lattice_distance(z - x) < 1e-3:
                continue
            assert lame_residual(x, z, lattice) <= 1e-6


def test_lame_residual_near_half_period(square_lattice):
    assert lame_residual(0.23 + 0.1j, square_lattice.omega1 + 1e-3, square_lattice) <= 1e-6


def test_lame_residual_shift_invariant(square_lattice):
    x, z = 0.23 + 0.1j, 0.41 - 0.17j
    r0 = lame_residual(x, z, square_lattice)
    r1 = lame_residual(x + 2 * square_lattice.omega1, z, square_lattice)
    assert abs(r0 - r1) < 1e-6


def test_multiplier_gauge(square_lattice):
    z = 0.27 + 0.11j
    bm = BlochMultipliers(bloch_multiplier(1, z, square_lattice), bloch_multiplier(2, z, square_lattice))
    gauged = bm.gauge(0.3, square_lattice)
    assert abs(gauged.B1 - bm.B1 * np.exp(0.6 * square_lattice.omega1)) < 1e-12
    value, branch = bm.equivalence_invariant(square_lattice)
    assert np.isfinite(value) and len(branch) == 2
