import math

import numpy as np
import pytest

from src.conditions.genus_one import (
    classical_zero,
    genus_one_bdhe_datum,
    genus_one_bdhe_grid,
    genus_one_curve_datum,
    genus_one_kp_datum,
    genus_one_toda_datum,
)
from src.solutions.baker_akhiezer import (
    CurveDatum,
    MarkedPoint,
    adjoint_residual,
    ba_eval,
    ba_linear_residual,
    bdhe_tau_residual,
    discrete_schrodinger_residual,
    gauge_residual,
    gauge_transform,
    heat_wave,
    kp_residual,
    linear_residual_bdhe,
    linear_residual_kp,
    linear_residual_toda,
    toda_layout_comparison,
    toda_residual,
)
from src.special.siegel_theta import PeriodMatrix, random_period_matrix
from src.special.weierstrass import phi_lame
from src.utils.errors import ConfigInvalid, CurveDatumInvalid

A_POINT = [0.21 + 0.13j]
HEAT_GRID = [(0.1, 0.0), (0.35 + 0.1j, 0.2), (-0.2 + 0.05j, 0.5)]
KP_POINT = (0.1, 0.0, 0.0)
TODA_GRID = [(0, 0.1, 0.05), (1, -0.2 + 0.1j, 0.15), (-1, 0.05, -0.1)]


@pytest.fixture(scope="module")
def curve(square_period):
    return genus_one_curve_datum(square_period)


# --- función de Baker-Akhiezer de un punto -----------------------------------------

def test_ba_normalized_at_origin(curve):
    assert ba_eval(curve, {(0, 1): 0.0, (0, 2): 0.0}, (0, 3.0)) == pytest.approx(1.0, abs=1e-12)


def test_ba_matches_lame_kernel(curve, square_period, square_lattice):
    k = 4.0
    q0 = complex(curve.Z[0]) - classical_zero(square_period)
    for x in (0.3 + 0.1j, -0.12 + 0.2j):
        expected = phi_lame(x - q0, 1 / k, square_lattice) / phi_lame(-q0, 1 / k, square_lattice)
        assert ba_eval(curve, {(0, 1): x}, (0, k)) == pytest.approx(complex(expected), rel=1e-8)


def test_ba_linear_problem(curve):
    report = ba_linear_residual(curve, [(0.1, 0.0), (0.25 + 0.05j, 0.1)], k=4.0)
    assert report.max <= 1e-6


def test_abel_consistency_enforced(square_period):
    bad = MarkedPoint(abel0=[0.0], U=[np.zeros(1), np.array([-1.0]), np.zeros(1)], omega={},
                      abel=np.array([[2.0 + 0j]]))
    with pytest.raises(CurveDatumInvalid):
        CurveDatum(B=square_period, points=[bad], Z=[0.1])


def test_abel_check_can_be_skipped(square_period):
    bad = MarkedPoint(abel0=[0.0], U=[np.zeros(1), np.array([-1.0]), np.zeros(1)], omega={},
                      abel=np.array([[2.0 + 0j]]))
    CurveDatum(B=square_period, points=[bad], Z=[0.1], validate=False)


def test_too_many_marked_points(square_period):
    with pytest.raises(CurveDatumInvalid):
        genus_one_curve_datum(square_period, marked=(0.0, 0.1, 0.2, 0.3))


def test_curve_config_round_trip(square_period):
    cd = genus_one_curve_datum(square_period, marked=(0.0, 0.31 + 0.17j), trunc=6)
    back = CurveDatum.from_config(cd.to_config())
    assert back.to_config() == cd.to_config()
    times = {(0, 1): 0.2, (1, 1): -0.1}
    assert ba_eval(back, times, (1, 5.0)) == pytest.approx(ba_eval(cd, times, (1, 5.0)))


def test_missing_omega_expansion(square_period):
    pt = MarkedPoint(abel0=[0.0], U=[np.zeros(1), np.array([-1.0])], omega={})
    cd = CurveDatum(B=square_period, points=[pt], Z=[0.1])
    with pytest.raises(ConfigInvalid):
        ba_eval(cd, {(0, 1): 0.1}, (0, 4.0))


# --- KP y Toda 2D ---------------------------------------------------------------

def test_kp_genus_one(curve, square_lattice):
    report = kp_residual(curve, [KP_POINT, (0.23, 0.1, 0.05), (-0.15 + 0.05j, 0.3, 0.2)])
    assert report.max <= 1e-4
    assert report.extras["const"] == pytest.approx(-4 * square_lattice.eta1, rel=1e-4)


def test_kp_finite_difference_order(curve, square_lattice):
    const = -4 * square_lattice.eta1
    coarse = kp_residual(curve, [KP_POINT], h=2e-2, use_richardson=False, const=const).max
    fine = kp_residual(curve, [KP_POINT], h=1e-2, use_richardson=False, const=const).max
    assert math.log2(coarse / fine) >= 1.9


def test_kp_wrong_flow_direction(square_period):
    cd = genus_one_curve_datum(square_period)
    cd.points[0].U[2] = np.array([5.0 + 0j])
    assert kp_residual(cd, [KP_POINT, (0.23, 0.1, 0.05)]).max > 0.1


def test_kp_trivial_tau():
    cd = genus_one_curve_datum(PeriodMatrix([[50j]]))
    assert kp_residual(cd, [KP_POINT]).max <= 1e-10


def test_kp_random_curves_fail():
    values = []
    for seed in (3, 11, 19):
        rng = np.random.default_rng(seed)
        B = random_period_matrix(2, rng)
        vec = lambda: rng.normal(size=2) + 0.3j * rng.normal(size=2)
        pt = MarkedPoint(abel0=np.zeros(2), U=[np.zeros(2), vec(), vec(), vec()], omega={})
        cd = CurveDatum(B=B, points=[pt], Z=vec())
        values.append(kp_residual(cd, [KP_POINT, (0.2, 0.1, 0.05)]).max)
    assert np.median(values) > 1e-2


def test_toda_forward_layout(square_period):
    cd = genus_one_curve_datum(square_period, marked=(0.0, 0.31 + 0.17j))
    comparison = toda_layout_comparison(cd, TODA_GRID)
    assert comparison["satisfied"] == "forward"
    assert comparison["forward"].max <= 1e-4
    assert comparison["backward"].max > 1e-2
    assert toda_residual(cd, TODA_GRID).extras["layout"] == "forward"


def test_toda_needs_two_points(curve):
    with pytest.raises(ConfigInvalid):
        toda_residual(curve, TODA_GRID, layout="forward")
    with pytest.raises(ConfigInvalid):
        toda_residual(curve, TODA_GRID, layout="sideways")


# --- problemas lineales desde datos secantes ---------------------------------------------

def test_linear_residuals_genus_one(square_period):
    kp = genus_one_kp_datum(square_period, U=[1.0], V=[0.4], A=A_POINT, seed=3)
    toda = genus_one_toda_datum(square_period, U=[0.37 + 0.05j], V=[0.6], A=A_POINT, seed=5)
    bdhe = genus_one_bdhe_datum(square_period, U=[0.31 + 0.02j], V=[0.17 + 0.23j], A=[0.41 + 0.29j], seed=9)
    Z = [0.1 + 0.05j]
    assert linear_residual_kp(kp, HEAT_GRID, Z).max <= 1e-5
    assert linear_residual_toda(toda, HEAT_GRID, Z).max <= 1e-5
    assert linear_residual_bdhe(bdhe, [(0.1, 0), (0.35 + 0.1j, 1), (-0.2, -2)], Z).max <= 1e-5
    assert adjoint_residual(kp, HEAT_GRID, Z).max <= 1e-5


def test_gauge_shifts_operator(square_period):
    d = genus_one_kp_datum(square_period, U=[1.0], V=[0.4], A=A_POINT, seed=3)
    Z = [0.1 + 0.05j]
    wave = gauge_transform(heat_wave(d, Z), c=lambda t: np.exp(0.7 * t * t),
                           c_dot=lambda t: 1.4 * t * np.exp(0.7 * t * t))
    grid = [(0.1, 0.2), (0.35 + 0.1j, 0.5)]
    assert gauge_residual(d, wave, grid, Z, shifted=True).max <= 1e-6
    assert gauge_residual(d, wave, grid, Z, shifted=False).max > 1e-3


# --- residuos discretos -------------------------------------------------------------

def test_bdhe_tau_genus_one_box(square_period):
    tau_grid, info = genus_one_bdhe_grid(square_period, shifts=(0.31 + 0.02j, 0.17 + 0.23j, 0.41 + 0.29j),
                                         Z=[0.1 + 0.05j], seed=4)
    assert info["singular_ratio"] <= 1e-10
    assert bdhe_tau_residual(tau_grid).max <= 1e-8
    tau_grid[1, 1, 1] *= 1.01
    assert bdhe_tau_residual(tau_grid).max > 1e-3


def test_bdhe_tau_constant_box():
    assert bdhe_tau_residual(np.ones((3, 2, 2))).max == pytest.approx(1.0, rel=1e-9)
    with pytest.raises(ConfigInvalid):
        bdhe_tau_residual(np.ones((2, 2, 2)))


def test_discrete_schrodinger_constant():
    assert discrete_schrodinger_residual(np.ones((4, 4)), 0.37 - 0.2j).max == 0.0


def test_discrete_schrodinger_exponential():
    a, b = 1.3 + 0.2j, 0.7 - 0.1j
    n, m = np.meshgrid(np.arange(5), np.arange(5), indexing="ij")
    psi = a ** n * b ** m
    u = (a * b - 1) / (a - b)
    assert discrete_schrodinger_residual(psi, u).max <= 1e-12


def test_discrete_schrodinger_random(rng):
    psi = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    assert discrete_schrodinger_residual(psi, 0.3).max > 1e-2
