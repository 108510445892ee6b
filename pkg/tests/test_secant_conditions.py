import dataclasses

import numpy as np
import pytest

from src.conditions.genus_one import (
    classical_divisor_sample,
    classical_zero,
    genus_one_bdhe_datum,
    genus_one_kp_datum,
    genus_one_prym_datum,
    genus_one_toda_datum,
)
from src.conditions.secant_conditions import (
    SecantDatum,
    bdhe_a_constants,
    bdhe_b_constants,
    bdhe_condition_C_residual,
    cm_condition_C_residual,
    congruent,
    flex_residual_B,
    linear_problem_residual_kp,
    negative_control_median,
    quadrisecant_residual,
    rs_condition_C_residual,
    sample_theta_divisor,
    tangent_trisecant_residual_B,
    trisecant_residual_B,
)
from src.divisor.tau_divisor import TauLine, find_zeros, meromorphic_chain_residual, pole_dynamics_residual
from src.special.siegel_theta import PeriodMatrix, theta_eval
from src.utils.errors import ConfigInvalid, FactorVanishes, FitDegenerate, GridHitsDivisor, TrackingLost

A_POINT = [0.21 + 0.13j]
GRID = [(0.1, 0.0), (0.35 + 0.1j, 0.2), (-0.2 + 0.05j, 0.5), (0.6 - 0.1j, -0.3)]
GENERIC_B = PeriodMatrix([[1.1j, 0.3 + 0.2j], [0.3 + 0.2j, 0.9j]])
GENERIC_U = [1.0, 0.4 + 0.1j]
GENERIC_V = [0.2, -0.5]

TOLERANCES = {
    "linear": 1e-5,
    "flex": 1e-8,
    "C": 1e-7,
    "tangent": 1e-7,
    "trisecant": 1e-7,
    "quadrisecant": 1e-6,
}


@pytest.fixture(scope="module")
def kp_datum(square_period):
    return genus_one_kp_datum(square_period, U=[1.0], V=[0.4], A=A_POINT, seed=3)


@pytest.fixture(scope="module")
def toda_datum(square_period):
    return genus_one_toda_datum(square_period, U=[0.37 + 0.05j], V=[0.6], A=A_POINT, seed=5)


@pytest.fixture(scope="module")
def bdhe_datum(square_period):
    return genus_one_bdhe_datum(square_period, U=[0.31 + 0.02j], V=[0.17 + 0.23j], A=[0.41 + 0.29j], seed=9)


@pytest.fixture(scope="module")
def divisor_sample(square_period):
    return classical_divisor_sample(square_period, 4)


# --- dato y muestras -----------------------------------------------------------------

def test_datum_validation(square_period):
    with pytest.raises(ConfigInvalid):
        SecantDatum(B=square_period, U=[0.0], V=[0.1], A=A_POINT)
    with pytest.raises(ConfigInvalid):
        SecantDatum(B=square_period, U=[0.3], V=[0.1], A=[1.3 + 1j], mode="toda")
    with pytest.raises(ConfigInvalid):
        SecantDatum(B=square_period, U=[0.3], V=[0.2 + 1j], A=[0.2], mode="bdhe")
    with pytest.raises(ConfigInvalid):
        SecantDatum(B=square_period, U=[0.3], V=[0.1], A=A_POINT, mode="mkdv")
    SecantDatum(B=square_period, U=[0.0], V=[0.0], A=[0.0], mode="prym")


def test_congruence(square_period):
    assert congruent([0.2 + 0.1j], [1.2 - 0.9j], square_period)
    assert not congruent([0.2], [0.7], square_period)


def test_datum_config_round_trip(kp_datum):
    cfg = kp_datum.to_config()
    back = SecantDatum.from_config(cfg)
    assert back.to_config() == cfg
    assert back.digest() == kp_datum.digest()
    assert len(kp_datum.digest()) == 16


def test_factory_records_provenance(kp_datum):
    prov = kp_datum.provenance
    assert prov["factory"] == "genus_one_kp"
    assert prov["seed"] == 3
    assert prov["rank"] == 2
    assert prov["validation_max"] <= 1e-8


def test_sample_on_divisor(square_period):
    sample = sample_theta_divisor(square_period, [1.0], count=3, seed=4)
    assert len(sample) == 3
    z0 = classical_zero(square_period)
    for Z, prov in zip(sample.points, sample.provenance):
        assert abs(theta_eval(Z, square_period)) <= 1e-8
        assert congruent(Z, [z0], square_period)
        assert "Z0" in prov and "x" in prov


def test_empty_sample(square_period):
    sample = sample_theta_divisor(square_period, [1.0], count=0)
    assert len(sample) == 0


def test_sample_split(square_period):
    first, second = classical_divisor_sample(square_period, 5).split()
    assert len(first) == 2 and len(second) == 3


# --- forma (A) y su equivalencia con (B) ------------------------------------------------

def test_linear_problem_positive(kp_datum):
    assert linear_problem_residual_kp(kp_datum, [0.1 + 0.05j], GRID) <= TOLERANCES["linear"]


def test_linear_problem_independent_of_shift(kp_datum, rng):
    for _ in range(5):
        Z = [rng.uniform(-0.5, 0.5) + 1j * rng.uniform(-0.5, 0.5)]
        assert linear_problem_residual_kp(kp_datum, Z, GRID) <= TOLERANCES["linear"]


def test_linear_problem_hits_divisor(kp_datum, square_period):
    with pytest.raises(GridHitsDivisor):
        linear_problem_residual_kp(kp_datum, [classical_zero(square_period)], [(0.0, 0.0)])


def test_flex_positive(kp_datum):
    assert flex_residual_B(kp_datum) <= TOLERANCES["flex"]


@pytest.mark.parametrize("field_name, delta", [("p", 0.3), ("E", 0.5 - 0.2j)])
def test_flex_and_linear_fail_together(kp_datum, field_name, delta):
    bad = dataclasses.replace(kp_datum, **{field_name: getattr(kp_datum, field_name) + delta})
    assert flex_residual_B(bad) > 1e-3
    assert linear_problem_residual_kp(bad, [0.1 + 0.05j], GRID) > 1e-3


def test_scaling_refit(square_period, kp_datum):
    lam = 1.7
    scaled = genus_one_kp_datum(square_period, U=[lam], V=[0.4 * lam ** 2], A=A_POINT, seed=3)
    assert abs(scaled.p - lam * kp_datum.p) <= 1e-8 * (1 + abs(kp_datum.p))
    assert abs(scaled.E - lam ** 2 * kp_datum.E) <= 1e-8 * (1 + abs(kp_datum.E))
    assert flex_residual_B(scaled) <= TOLERANCES["flex"]


def test_fit_degenerate_without_shift(square_period):
    with pytest.raises(FitDegenerate):
        genus_one_kp_datum(square_period, U=[1.0], V=[0.4], A=[0.0])


def test_meromorphic_chain_on_positive_datum(square_period, kp_datum):
    line = TauLine(B=square_period, U=[1.0], V=[0.4], Z=[0.1 + 0.05j], window=(-0.05 - 0.05j, 0.95 + 0.95j))
    zero = find_zeros(line)[0]
    good = meromorphic_chain_residual(line, zero, kp_datum.A, kp_datum.p, kp_datum.E)
    assert good["max"] <= 1e-8
    bad = meromorphic_chain_residual(line, zero, kp_datum.A, kp_datum.p + 0.3, kp_datum.E)
    assert bad["max"] > 1e-3


# --- forma (C) ------------------------------------------------------------------------

def test_cm_condition_positive(kp_datum, divisor_sample):
    assert cm_condition_C_residual(kp_datum.B, kp_datum.U, kp_datum.V, divisor_sample) <= TOLERANCES["C"]


def test_cm_condition_agrees_with_pole_dynamics(square_period, kp_datum, divisor_sample):
    line = TauLine(B=square_period, U=[1.0], V=[0.4], Z=[0.0], window=(-0.05 - 0.05j, 0.95 + 0.95j))
    zero = find_zeros(line)[0]
    assert pole_dynamics_residual(line, zero) <= 1e-6
    assert cm_condition_C_residual(square_period, [1.0], [0.4], [line.point(zero.q)]) <= TOLERANCES["C"]

    generic = TauLine(B=GENERIC_B, U=GENERIC_U, V=GENERIC_V, Z=[0.13, -0.21 + 0.1j],
                      window=(-0.6 - 0.6j, 0.6 + 0.6j))
    checked = 0
    for zero in [z for z in find_zeros(generic) if z.simple][:3]:
        try:
            dynamics = pole_dynamics_residual(generic, zero) <= 1e-6
        except TrackingLost:
            continue
        condition = cm_condition_C_residual(GENERIC_B, GENERIC_U, GENERIC_V, [generic.point(zero.q)]) <= 1e-7
        assert dynamics == condition
        checked += 1
    assert checked


def test_rs_condition_positive(toda_datum, divisor_sample):
    assert rs_condition_C_residual(toda_datum.B, toda_datum.U, toda_datum.V, divisor_sample) <= TOLERANCES["C"]


def test_rs_condition_without_shift(square_period, divisor_sample):
    assert rs_condition_C_residual(square_period, [0.0], [0.6], divisor_sample) <= TOLERANCES["C"]


def test_bdhe_condition_positive(bdhe_datum, divisor_sample):
    assert bdhe_condition_C_residual(bdhe_datum.B, bdhe_datum.U, bdhe_datum.V, divisor_sample) <= TOLERANCES["C"]


def test_bdhe_condition_all_factors_vanish(square_period):
    with pytest.raises(FactorVanishes):
        bdhe_condition_C_residual(square_period, [1.0], [0.3], [[classical_zero(square_period)]])


@pytest.mark.parametrize("evaluator", [cm_condition_C_residual, rs_condition_C_residual])
def test_condition_periodic_in_integer_shifts(evaluator):
    sample = sample_theta_divisor(GENERIC_B, GENERIC_U, count=2, seed=13)
    for Z in sample.points:
        base = evaluator(GENERIC_B, GENERIC_U, GENERIC_V, [Z])
        shifted = evaluator(GENERIC_B, GENERIC_U, GENERIC_V, [Z + np.array([1.0, -1.0])])
        assert shifted == pytest.approx(base, rel=1e-7, abs=1e-12)


# --- Toda y BDHE en forma (B) -------------------------------------------------------------

def test_tangent_trisecant_positive(toda_datum):
    assert tangent_trisecant_residual_B(toda_datum) <= TOLERANCES["tangent"]


def test_tangent_trisecant_limit(square_period):
    quiet = SecantDatum(B=square_period, U=[0.37], V=[0.0], A=A_POINT, p=-60.0, E=0.0, mode="toda")
    assert tangent_trisecant_residual_B(quiet) <= 1e-10
    loud = dataclasses.replace(quiet, V=np.array([0.6 + 0j]))
    assert tangent_trisecant_residual_B(loud) >= 0.99


def test_trisecant_positive(bdhe_datum):
    assert trisecant_residual_B(bdhe_datum) <= TOLERANCES["trisecant"]


def test_bdhe_constant_converter(bdhe_datum):
    pb, eb = bdhe_b_constants(bdhe_datum.p, bdhe_datum.E)
    assert abs(pb - bdhe_datum.p - 1j * np.pi) < 1e-15
    p, E = bdhe_a_constants(pb, eb)
    assert abs(p - bdhe_datum.p) < 1e-14 and abs(E - bdhe_datum.E) < 1e-14


# --- cuadrisecante ---------------------------------------------------------------------

def test_quadrisecant_trivial_symmetry():
    d = SecantDatum(B=GENERIC_B, U=[0, 0], V=[0, 0], A=[0, 0], W=[0, 0], mode="prym",
                    constants={"c1": 1.0, "c2": 1.0, "c3": 1.0})
    top, bottom = quadrisecant_residual(d, [np.array([0.1 + 0.2j, -0.3 + 0.1j])])
    assert top == 0.0 and bottom == 0.0


def test_quadrisecant_genus_one_prym(square_period):
    d = genus_one_prym_datum(square_period, U=[0.23 + 0.05j], V=[0.31 - 0.04j], W=[0.12 + 0.17j])
    top, bottom = quadrisecant_residual(d, classical_divisor_sample(square_period, 6))
    assert top <= TOLERANCES["quadrisecant"]
    assert bottom <= TOLERANCES["quadrisecant"]
    assert d.provenance["factory"] == "genus_one_prym"


def test_quadrisecant_fit_degenerate_in_genus_one(square_period):
    d = genus_one_prym_datum(square_period, U=[0.23 + 0.05j], V=[0.31 - 0.04j], W=[0.12 + 0.17j])
    with pytest.raises(FitDegenerate):
        quadrisecant_residual(d, classical_divisor_sample(square_period, 8), fit=True)


def test_quadrisecant_requires_constants(square_period):
    d = SecantDatum(B=square_period, U=[0.2], V=[0.1], A=[0.0], W=[0.3], mode="prym")
    with pytest.raises(ConfigInvalid):
        quadrisecant_residual(d, classical_divisor_sample(square_period, 2))


# --- controles negativos (semillas fijas, 50 sorteos) ------------------------------------

def _divisor_pair(d):
    return sample_theta_divisor(d.B, d.U, count=2, seed=1, window_size=1.5)


NEGATIVE_DRAWS = 50

NEGATIVE_EVALUATORS = {
    "flex": flex_residual_B,
    "tangent": tangent_trisecant_residual_B,
    "trisecant": trisecant_residual_B,
    "cm": lambda d: cm_condition_C_residual(d.B, d.U, d.V, _divisor_pair(d)),
    "rs": lambda d: rs_condition_C_residual(d.B, d.U, d.V, _divisor_pair(d)),
    "bdhe": lambda d: bdhe_condition_C_residual(d.B, d.U, d.V, _divisor_pair(d)),
}


@pytest.mark.parametrize("name", sorted(NEGATIVE_EVALUATORS))
def test_negative_controls(name):
    assert negative_control_median(NEGATIVE_EVALUATORS[name], g=2, draws=NEGATIVE_DRAWS, seed=100) > 1e-3


def test_negative_control_linear_problem():
    evaluator = lambda d: linear_problem_residual_kp(d, np.zeros(2), [(0.1, 0.0), (0.3, 0.2)])
    assert negative_control_median(evaluator, g=2, draws=NEGATIVE_DRAWS, seed=200) > 1e-2
