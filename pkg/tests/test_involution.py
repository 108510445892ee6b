import numpy as np
import pytest

from src.conditions.genus_one import genus_one_toda_involution_V
from src.conditions.involution import involution_kp_conditions, involution_toda_conditions
from src.special.siegel_theta import PeriodMatrix
from src.utils.errors import InsufficientZeros, ShiftInvariantDivisor

UNIT_WINDOW = (-0.05 - 0.05j, 0.95 + 0.95j)
TODA_U = [0.3]
TODA_WINDOW = (-0.1 - 0.1j, 3.2 + 3.2j)


def test_kp_genus_one_fixed_direction(square_period):
    report = involution_kp_conditions(square_period, [1.0], [0.0], [0.0], UNIT_WINDOW)
    assert len(report.zeros) == 1
    assert report.zeros[0] == pytest.approx(0.5 + 0.5j, abs=1e-9)
    assert report.residual_C <= 1e-7
    assert report.residual_turn <= 1e-7
    assert report.residual_b1 <= 1e-10
    assert report.residual_ort <= 1e-10
    assert set(report.to_config()) >= {"residual_C", "residual_turn", "residual_b1", "residual_ort", "zeros"}


def test_kp_genus_one_moving_direction_fails(square_period):
    report = involution_kp_conditions(square_period, [1.0], [0.3], [0.0], UNIT_WINDOW)
    assert report.residual_C == pytest.approx(0.3 / 1.3, rel=1e-8)


def test_kp_generic_genus_two_fails():
    B = PeriodMatrix([[1.1j, 0.3 + 0.2j], [0.3 + 0.2j, 0.9j]])
    report = involution_kp_conditions(B, [1.0, 0.4 + 0.1j], [0.2, -0.5], [0.13, -0.21 + 0.1j],
                                      (-0.6 - 0.6j, 0.6 + 0.6j))
    assert report.residual_C > 1e-2


def test_kp_window_without_zeros(square_period):
    with pytest.raises(InsufficientZeros):
        involution_kp_conditions(square_period, [1.0], [0.0], [0.0], (0.1 + 0.1j, 0.3 + 0.3j))


def test_toda_genus_one_calibrated_direction(square_period):
    V = genus_one_toda_involution_V(square_period, TODA_U)
    report = involution_toda_conditions(square_period, TODA_U, V, [0.0], TODA_WINDOW)
    assert report.zeros[0] == pytest.approx((0.5 + 0.5j) / 0.3, abs=1e-8)
    assert report.residual_Cd <= 1e-6
    assert report.residual_ortd <= 1e-6
    assert report.shift_distance == pytest.approx(1.0, abs=1e-8)


def test_toda_both_branches(square_period):
    for branch in (1, -1):
        V = genus_one_toda_involution_V(square_period, TODA_U, branch=branch)
        assert involution_toda_conditions(square_period, TODA_U, V, [0.0], TODA_WINDOW).residual_Cd <= 1e-6


def test_toda_wrong_scale_fails(square_period):
    V = 2.0 * genus_one_toda_involution_V(square_period, TODA_U)
    report = involution_toda_conditions(square_period, TODA_U, V, [0.0], TODA_WINDOW)
    assert report.residual_Cd == pytest.approx(0.6, rel=1e-6)


def test_toda_zero_shift_rejected(square_period):
    with pytest.raises(ShiftInvariantDivisor):
        involution_toda_conditions(square_period, [0.0], [0.2], [0.0], UNIT_WINDOW)


def test_toda_report_config(square_period):
    V = genus_one_toda_involution_V(square_period, TODA_U)
    cfg = involution_toda_conditions(square_period, TODA_U, V, [0.0], TODA_WINDOW).to_config()
    assert cfg["provenance"]["fit_points"] >= 2
    assert np.isfinite(cfg["residual_ortd"])
