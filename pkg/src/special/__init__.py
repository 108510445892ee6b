"""
Funciones especiales de theta-lab.

Este modulo exporta la theta de Riemann (con caracteristicas y Kummer)
y las funciones elipticas de Weierstrass.
"""

from src.special.siegel_theta import (
    PeriodMatrix,
    TruncationPolicy,
    DirectionalJet,
    half_characteristics,
    theta_eval,
    theta_batch,
    theta_jet,
    theta_jet_uv,
    theta_directional,
    theta_taylor_coefficients,
    theta_with_char,
    theta_with_char_general,
    theta_char_derivatives,
    kummer_map,
    quasiperiodicity_residual,
    addition_residual,
    random_period_matrix,
)
from src.special.weierstrass import (
    EllipticLattice,
    BlochMultipliers,
    sigma,
    zeta_w,
    wp,
    wp_prime,
    invariants,
    half_period_values,
    wp_laurent_coefficients,
    phi_lame,
    phi_lame_derivatives,
    bloch_multiplier,
    lame_residual,
)

__all__ = [
    "PeriodMatrix",
    "TruncationPolicy",
    "DirectionalJet",
    "half_characteristics",
    "theta_eval",
    "theta_batch",
    "theta_jet",
    "theta_jet_uv",
    "theta_directional",
    "theta_taylor_coefficients",
    "theta_with_char",
    "theta_with_char_general",
    "theta_char_derivatives",
    "kummer_map",
    "quasiperiodicity_residual",
    "addition_residual",
    "random_period_matrix",
    "EllipticLattice",
    "BlochMultipliers",
    "sigma",
    "zeta_w",
    "wp",
    "wp_prime",
    "invariants",
    "half_period_values",
    "wp_laurent_coefficients",
    "phi_lame",
    "phi_lame_derivatives",
    "bloch_multiplier",
    "lame_residual",
]
