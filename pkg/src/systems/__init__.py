"""
Sistemas de polos de theta-lab.

Calogero-Moser, Ruijsenaars-Schneider, ecuaciones de Bethe anidadas y la
reducción doble-Bloch del problema de calor.
"""

from src.systems.pole_systems import (
    CMState,
    RSState,
    LaxPair,
    CMTrajectory,
    RSTrajectory,
    BetheTrajectory,
    rk4_step,
    cm_hamiltonian,
    cm_energy,
    cm_lax,
    cm_m_matrix,
    cm_lax_pair,
    cm_forces,
    calibrate_cm_coupling,
    lax_residual,
    cm_flow,
    spectral_invariants,
    involution_spectrum_residual,
    rs_f,
    rs_hamiltonian,
    rs_lax,
    rs_velocity,
    rs_flow,
    bethe_residual,
    bethe_solve_level,
    bethe_march,
    unit_spacing_trajectory,
)
from src.systems.double_bloch import (
    DoubleBloch,
    ReductionResult,
    double_bloch_assemble,
    heat_residual,
    heat_to_lax_reduction,
)

__all__ = [
    "CMState",
    "RSState",
    "LaxPair",
    "CMTrajectory",
    "RSTrajectory",
    "BetheTrajectory",
    "rk4_step",
    "cm_hamiltonian",
    "cm_energy",
    "cm_lax",
    "cm_m_matrix",
    "cm_lax_pair",
    "cm_forces",
    "calibrate_cm_coupling",
    "lax_residual",
    "cm_flow",
    "spectral_invariants",
    "involution_spectrum_residual",
    "rs_f",
    "rs_hamiltonian",
    "rs_lax",
    "rs_velocity",
    "rs_flow",
    "bethe_residual",
    "bethe_solve_level",
    "bethe_march",
    "unit_spacing_trajectory",
    "DoubleBloch",
    "ReductionResult",
    "double_bloch_assemble",
    "heat_residual",
    "heat_to_lax_reduction",
]
