import numpy as np
import pytest

from src.special.weierstrass import bloch_multiplier
from src.systems.double_bloch import double_bloch_assemble, heat_to_lax_reduction
from src.systems.pole_systems import CMState
from src.utils.errors import DegenerateEigenvalue, NearSingularInput

HEAT_TOLERANCES = {1: 1e-6, 2: 1e-5, 3: 1e-5}


@pytest.mark.parametrize("alpha", [1, 2])
def test_double_bloch_shift(alpha, skew_lattice):
    psi = double_bloch_assemble([0.1 + 0.05j, 0.42 + 0.3j], [1.0, -0.4 + 0.2j], 0.27 + 0.19j, 0.35 - 0.1j,
                                skew_lattice)
    for x in (0.25 - 0.1j, 0.6 + 0.2j):
        assert psi.shift_residual(x, alpha) <= 1e-9


def test_residue_normalization(square_lattice):
    q, k = 0.2 + 0.1j, 0.4
    psi = double_bloch_assemble([q], [1.0], 0.31 + 0.17j, k, square_lattice)
    eps = 1e-6
    numeric = eps * psi(q + eps)
    assert abs(numeric - np.exp(k * q)) < 1e-5
    assert psi.residue(0) == pytest.approx(np.exp(k * q))


def test_gauge_maps_multipliers(square_lattice):
    z, k, a = 0.31 + 0.17j, 0.2, 0.15
    base = double_bloch_assemble([0.2], [1.0], z, k, square_lattice).multipliers()
    gauged = double_bloch_assemble([0.2], [1.0], z, k + a, square_lattice).multipliers()
    expected = base.gauge(a, square_lattice)
    assert abs(gauged.B1 - expected.B1) < 1e-12
    assert abs(gauged.B2 - expected.B2) < 1e-12
    assert abs(base.B1 - bloch_multiplier(1, z, square_lattice) * np.exp(2 * square_lattice.omega1 * k)) < 1e-12


def test_repeated_poles_rejected(square_lattice):
    with pytest.raises(NearSingularInput):
        double_bloch_assemble([0.2, 0.2 + 2 * square_lattice.omega1], [1, 1], 0.3 + 0.1j, 0.0, square_lattice)


def test_single_particle_reduction(square_lattice):
    s = CMState(q=[0.2 + 0.1j], p=[0.4], lat=square_lattice)
    res = heat_to_lax_reduction(s, 0.31 + 0.17j)
    assert res.k == pytest.approx(-0.2)
    assert res.residual_L < 1e-14
    assert res.heat_residual <= HEAT_TOLERANCES[1]


@pytest.mark.parametrize("N,q,p", [
    (2, [0.12 + 0.08j, 0.55 + 0.31j], [0.3, -0.2]),
    (3, [0.1 + 0.05j, 0.5 + 0.2j, 0.3 + 0.7j], [0.2, -0.1, 0.05]),
])
def test_reduction_every_eigenvalue(N, q, p, skew_lattice):
    s = CMState(q=q, p=p, lat=skew_lattice)
    z = 0.29 + 0.21j
    for index in range(N):
        res = heat_to_lax_reduction(s, z, eigen_index=index)
        assert res.residual_L <= 1e-12
        assert res.residual_M <= 1e-9
        assert res.heat_residual <= HEAT_TOLERANCES[N]


def test_perturbed_nullspace_vector_fails(skew_lattice):
    s = CMState(q=[0.12 + 0.08j, 0.55 + 0.31j], p=[0.3, -0.2], lat=skew_lattice)
    worst = max(heat_to_lax_reduction(s, 0.29 + 0.21j, c_noise=1e-2, seed=seed).heat_residual
                for seed in range(3))
    assert worst > 1e-2


def test_explicit_k_away_from_spectrum(skew_lattice):
    s = CMState(q=[0.12 + 0.08j, 0.55 + 0.31j], p=[0.3, -0.2], lat=skew_lattice)
    res = heat_to_lax_reduction(s, 0.29 + 0.21j, k=5.0)
    assert res.residual_L > 1e-3
    assert res.heat_residual > 1e-3


def test_degenerate_eigenvalue_reported(square_lattice):
    # el discriminante (p1 - p2)² + 16(℘(z) - ℘(q12)) se anula: bloque de Jordan
    q, z = [0.1, 0.35 + 0.2j], 0.29 + 0.21j
    d = 4 * np.sqrt(complex(square_lattice.wp(q[0] - q[1]) - square_lattice.wp(z)))
    s = CMState(q=q, p=[d / 2, -d / 2], lat=square_lattice)
    with pytest.raises(DegenerateEigenvalue):
        heat_to_lax_reduction(s, z, degeneracy_tol=1e-6)
