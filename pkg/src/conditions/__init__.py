"""
Condiciones de caracterización de theta-lab.

Evaluadores de las formas (A)/(B)/(C), la identidad cuadrisecante, las
condiciones de involución y la fábrica de controles positivos de género 1.
"""

from src.conditions.secant_conditions import (
    SecantDatum,
    ThetaDivisorSample,
    congruent,
    bdhe_a_constants,
    bdhe_b_constants,
    sample_theta_divisor,
    linear_problem_residual_kp,
    flex_residual_B,
    tangent_trisecant_residual_B,
    trisecant_residual_B,
    cm_condition_C_residual,
    rs_condition_C_residual,
    bdhe_condition_C_residual,
    quadrisecant_terms,
    quadrisecant_residual,
    random_secant_datum,
    negative_control_median,
)
from src.conditions.involution import (
    InvolutionKPReport,
    InvolutionTodaReport,
    involution_kp_conditions,
    involution_toda_conditions,
)
from src.conditions.genus_one import (
    genus_one_period,
    genus_one_lattice,
    classical_zero,
    classical_divisor_sample,
    genus_one_kp_datum,
    genus_one_toda_datum,
    genus_one_bdhe_datum,
    genus_one_prym_datum,
    genus_one_toda_involution_V,
    genus_one_bdhe_grid,
    genus_one_curve_datum,
)

__all__ = [
    "SecantDatum",
    "ThetaDivisorSample",
    "congruent",
    "bdhe_a_constants",
    "bdhe_b_constants",
    "sample_theta_divisor",
    "linear_problem_residual_kp",
    "flex_residual_B",
    "tangent_trisecant_residual_B",
    "trisecant_residual_B",
    "cm_condition_C_residual",
    "rs_condition_C_residual",
    "bdhe_condition_C_residual",
    "quadrisecant_terms",
    "quadrisecant_residual",
    "random_secant_datum",
    "negative_control_median",
    "InvolutionKPReport",
    "InvolutionTodaReport",
    "involution_kp_conditions",
    "involution_toda_conditions",
    "genus_one_period",
    "genus_one_lattice",
    "classical_zero",
    "classical_divisor_sample",
    "genus_one_kp_datum",
    "genus_one_toda_datum",
    "genus_one_bdhe_datum",
    "genus_one_prym_datum",
    "genus_one_toda_involution_V",
    "genus_one_bdhe_grid",
    "genus_one_curve_datum",
]
