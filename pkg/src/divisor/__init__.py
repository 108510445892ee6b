"""
Divisor de τ: ceros, marco local, datos de Laurent y dinámica de polos.
"""

from src.divisor.series import BiSeries
from src.divisor.tau_divisor import (
    TauLine,
    DivisorZero,
    LaurentData,
    LocalFrame,
    PoleDynamics,
    ZeroScan,
    tau_eval,
    newton_zero,
    scan_zeros,
    find_zeros,
    zeros_table,
    local_frame,
    laurent_u,
    solution_laurent,
    meromorphic_chain_residual,
    track_zero,
    pole_dynamics,
    pole_dynamics_residual,
)

__all__ = [
    "BiSeries",
    "TauLine",
    "DivisorZero",
    "LaurentData",
    "LocalFrame",
    "PoleDynamics",
    "ZeroScan",
    "tau_eval",
    "newton_zero",
    "scan_zeros",
    "find_zeros",
    "zeros_table",
    "local_frame",
    "laurent_u",
    "solution_laurent",
    "meromorphic_chain_residual",
    "track_zero",
    "pole_dynamics",
    "pole_dynamics_residual",
]
