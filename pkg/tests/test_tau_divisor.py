import numpy as np
import pytest

from src.divisor.tau_divisor import (
    TauLine,
    find_zeros,
    laurent_u,
    local_frame,
    pole_dynamics,
    pole_dynamics_residual,
    scan_zeros,
    tau_eval,
    zeros_table,
)
from src.special.siegel_theta import PeriodMatrix, random_period_matrix
from src.special.weierstrass import EllipticLattice
from src.utils.errors import ConfigInvalid, TrackingLost

CLASSICAL_ZERO = 0.5 + 0.5j


def brute_theta3(z, tau, M=40):
    m = np.arange(-M, M + 1)
    return np.sum(np.exp(1j * np.pi * m * m * tau + 2j * np.pi * m * z))


@pytest.fixture
def square_line(square_period):
    return TauLine(B=square_period, U=[1.0], V=[0.3], Z=[0.0], window=(-0.05 - 0.05j, 0.95 + 0.95j))


def test_tau_is_jacobi_theta(square_period):
    line = TauLine(B=square_period, U=[1.0], V=[0.0], Z=[0.0])
    for x in (0.1 + 0.2j, 0.37 - 0.1j):
        assert abs(tau_eval(line, x) - brute_theta3(x, 1j)) < 1e-12


def test_monodromy_in_x(square_line):
    x, t = 0.21 + 0.13j, 0.1
    tau = tau_eval(square_line, x, t)
    assert abs(tau_eval(square_line, x + 1.0, t) - tau) < 1e-12
    arg = x + 0.3 * t
    factor = np.exp(-1j * np.pi * 1j - 2j * np.pi * arg)
    assert abs(tau_eval(square_line, x + 1j, t) - factor * tau) < 1e-10 * abs(factor * tau)


def test_time_shift_is_z_shift(square_line):
    x, t = 0.31 + 0.2j, 0.4
    moved = square_line.shifted(square_line.Z + t * square_line.V)
    assert abs(tau_eval(square_line, x, t) - tau_eval(moved, x, 0.0)) < 1e-13


def test_array_evaluation_matches_scalar(square_line):
    xs = np.array([0.1 + 0.1j, 0.4 + 0.7j, 0.8 + 0.2j])
    vals = tau_eval(square_line, xs, 0.0)
    assert vals.shape == xs.shape
    for x, v in zip(xs, vals):
        assert v == pytest.approx(tau_eval(square_line, x, 0.0), abs=1e-14)


def test_invalid_lines(square_period):
    with pytest.raises(ConfigInvalid):
        TauLine(B=square_period, U=[0.0], V=[0.0], Z=[0.0])
    with pytest.raises(ConfigInvalid):
        TauLine(B=square_period, U=[1.0], V=[0.0], Z=[0.0], window=(1 + 1j, 0j))


def test_classical_zero_found(square_period):
    line = TauLine(B=square_period, U=[1.0], V=[0.0], Z=[0.0], window=(0j, 1 + 1j))
    scan = scan_zeros(line)
    assert scan.winding == 1
    assert len(scan.zeros) == 1
    zero = scan.zeros[0]
    assert abs(zero.q - CLASSICAL_ZERO) < 1e-10
    assert zero.simple and zero.multiplicity == 1


def test_count_matches_winding(square_period):
    line = TauLine(B=square_period, U=[1.0], V=[0.0], Z=[0.1 + 0.05j], window=(-1.02 - 0.03j, 1.01 + 1.98j))
    scan = scan_zeros(line)
    assert sum(z.multiplicity for z in scan.zeros) == scan.winding == 4
    for z in scan.zeros:
        assert abs(tau_eval(line, z.q)) <= 1e-10 * scan.scale


def test_zeros_sorted_and_reproducible(square_period):
    line = TauLine(B=square_period, U=[1.0], V=[0.0], Z=[0.1 + 0.05j], window=(-1.02 - 0.03j, 1.01 + 1.98j))
    first = [z.q for z in find_zeros(line)]
    second = [z.q for z in find_zeros(line)]
    assert first == second
    keys = [(q.real, q.imag) for q in first]
    assert keys == sorted(keys)


def test_zero_moves_continuously(square_line):
    delta = 1e-4
    q0 = find_zeros(square_line, 0.0)[0]
    q1 = find_zeros(square_line, delta)[0]
    assert abs(q1.q - q0.q) <= 10 * (1 + abs(q0.dq_dt)) * delta
    assert q0.dq_dt == pytest.approx(-0.3, abs=1e-10)


def test_zeros_table_columns(square_line):
    rows = zeros_table(find_zeros(square_line))
    assert len(rows[0]) == 5
    assert rows[0][3] == 1


def test_local_frame_velocity(square_line):
    zero = find_zeros(square_line)[0]
    frame = local_frame(square_line, zero)
    assert abs(frame.q_dot + 0.3) < 1e-10
    assert abs(frame.q_ddot) < 1e-9


def test_laurent_matches_weierstrass(square_line):
    lat = EllipticLattice(0.5, 0.5j)
    zero = find_zeros(square_line)[0]
    data = laurent_u(square_line, zero)
    assert abs(data.v - 4 * lat.eta1) < 1e-8
    assert abs(data.w) < 1e-8
    assert data.route_gap <= 1e-8


def test_laurent_routes_agree_on_generic_line():
    B = PeriodMatrix([[1.1j, 0.3 + 0.2j], [0.3 + 0.2j, 0.9j]])
    line = TauLine(B=B, U=[1.0, 0.4 + 0.1j], V=[0.2, -0.5], Z=[0.13, -0.21 + 0.1j],
                   window=(-0.6 - 0.6j, 0.6 + 0.6j))
    zeros = [z for z in find_zeros(line) if z.simple]
    assert zeros
    data = laurent_u(line, zeros[0])
    assert data.route_gap <= 1e-8


def test_genus_one_pole_dynamics(square_line):
    zero = find_zeros(square_line)[0]
    dyn = pole_dynamics(square_line, zero)
    assert dyn.residual <= 1e-6
    assert dyn.route_gap <= 1e-6


def test_random_genus_two_breaks_pole_dynamics():
    residuals = []
    for seed in (3, 11, 19):
        rng = np.random.default_rng(seed)
        B = random_period_matrix(2, rng)
        U = rng.normal(size=2) + 0.3j * rng.normal(size=2)
        V = rng.normal(size=2)
        line = TauLine(B=B, U=U, V=V, Z=rng.uniform(-0.5, 0.5, 2), window=(-0.8 - 0.8j, 0.8 + 0.8j))
        zeros = [z for z in find_zeros(line) if z.simple]
        values = []
        for z in zeros[:3]:
            try:
                values.append(pole_dynamics_residual(line, z))
            except TrackingLost:
                continue
        residuals.append(max(values))
    assert float(np.median(residuals)) > 1e-2
