"""
Condiciones de curvas con involución sobre Y = cierre de {Ux + ζ}.

involution_kp_conditions comprueba ∂_Vθ = 0 sobre Θ ∩ Y, la constancia de
∂_U∂_V ln θ sobre Y, su forma de Kummer y la inmovilidad de los ceros.
involution_toda_conditions comprueba (∂_Vθ)² + θ(z+U)θ(z-U) = 0 sobre
Θ ∩ Y, que Θ ∩ Y no sea invariante por U y la forma de Kummer con (b2, b3).

Ejemplo de uso:
    report = involution_kp_conditions(PeriodMatrix([[1j]]), U=[1.0], V=[0.0],
                                      zeta_shift=[0.1], window=(-0.3 - 0.3j, 0.8 + 0.8j))
    print(report.residual_C, report.residual_turn)
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.divisor.tau_divisor import DivisorZero, TauLine, scan_zeros
from src.special.siegel_theta import (
    TruncationPolicy,
    as_period,
    default_policy,
    theta_char_derivatives,
    theta_eval,
    theta_jet_uv,
)
from src.utils.errors import FitDegenerate, InsufficientZeros, NonSimpleZero, ShiftInvariantDivisor
from src.utils.helpers import complex_pair

logger = logging.getLogger(__name__)

SCALE_FLOOR = 1e-12
SHIFT_RATIO = 1e-6
OFF_DIVISOR_RATIO = 1e-3
_GRID_FRACTIONS = (0.11, 0.33, 0.58, 0.86)


@dataclass
class InvolutionKPReport:
    """
    Residuos de las condiciones de involución del caso KP.

    Attributes:
        zeros: Ceros x de θ(Ux + ζ) en la ventana
        residual_C: max |∂_Vθ|/(|∂_Uθ| + |∂_Vθ|) sobre Θ ∩ Y
        residual_turn: max |q̇| de los ceros en t = 0
        residual_b1: Dispersión relativa de ∂_U∂_V ln θ sobre Y
        b2: Promedio de ∂_U∂_V ln θ sobre Y
        residual_ort: Residuo de la forma de Kummer con β ajustado
        b2_kummer: β/2, comparable con b2
    """

    zeros: List[complex]
    residual_C: float
    residual_turn: float
    residual_b1: float
    b2: complex
    residual_ort: float
    b2_kummer: complex
    provenance: Dict[str, Any] = field(default_factory=dict)

    def residuals(self) -> Dict[str, float]:
        return {"residual_C": self.residual_C, "residual_turn": self.residual_turn,
                "residual_b1": self.residual_b1, "residual_ort": self.residual_ort}

    def to_config(self) -> Dict:
        return {**self.residuals(), "zeros": [complex_pair(q) for q in self.zeros],
                "b2": complex_pair(self.b2), "b2_kummer": complex_pair(self.b2_kummer),
                "provenance": self.provenance}


@dataclass
class InvolutionTodaReport:
    """
    Residuos de las condiciones de involución del caso Toda 2D.

    Attributes:
        zeros: Ceros x de θ(Ux + ζ) en la ventana
        residual_Cd: max |(∂_Vθ)² + θ(z+U)θ(z-U)| normalizado sobre Θ ∩ Y
        shift_distance: Distancia entre los ceros de θ(Ux+ζ) y de θ(Ux+U+ζ)
        residual_ortd: Residuo de validación de la forma de Kummer
        b2, b3: Constantes ajustadas de la forma de Kummer
    """

    zeros: List[complex]
    residual_Cd: float
    shift_distance: float
    residual_ortd: float
    b2: complex
    b3: complex
    provenance: Dict[str, Any] = field(default_factory=dict)

    def residuals(self) -> Dict[str, float]:
        return {"residual_Cd": self.residual_Cd, "residual_ortd": self.residual_ortd}

    def to_config(self) -> Dict:
        return {**self.residuals(), "zeros": [complex_pair(q) for q in self.zeros],
                "shift_distance": self.shift_distance,
                "b2": complex_pair(self.b2), "b3": complex_pair(self.b3),
                "provenance": self.provenance}


def _line(B, U, V, zeta_shift, window, pol) -> TauLine:
    period = as_period(B)
    return TauLine(B=period, U=U, V=V, Z=zeta_shift, window=window, pol=pol or default_policy())


def _simple_zeros(line: TauLine) -> Tuple[List[DivisorZero], float]:
    scan = scan_zeros(line)
    if not scan.zeros:
        raise InsufficientZeros(f"θ(Ux + ζ) no tiene ceros en la ventana {line.window}")
    for zero in scan.zeros:
        if not zero.simple:
            raise NonSimpleZero(f"Θ ∩ Y no es reducido: cero x = {zero.q} de multiplicidad "
                                f"{zero.multiplicity} (|∂xτ| = {zero.dtau:.2e})")
    return scan.zeros, scan.scale


def _off_divisor_points(line: TauLine, zeros: List[DivisorZero], scale: float) -> List[complex]:
    """Malla fija de la ventana sin los puntos donde |θ| es pequeño."""
    lo, hi = line.window
    span = hi - lo
    xs = []
    for a in _GRID_FRACTIONS:
        for b in _GRID_FRACTIONS:
            x = lo + span.real * a + 1j * span.imag * b
            if abs(theta_eval(line.point(x), line.B, line.pol)) > OFF_DIVISOR_RATIO * scale:
                xs.append(complex(x))
    return xs


def _kummer_rows(line: TauLine, xs: List[complex]) -> List[np.ndarray]:
    return [theta_char_derivatives(line.point(x), line.B, pol=line.pol) for x in xs]


def involution_kp_conditions(B, U, V, zeta_shift, window: Tuple[complex, complex],
                             pol: Optional[TruncationPolicy] = None) -> InvolutionKPReport:
    """
    Condiciones de involución con un punto fijo para Y = cierre de {Ux + ζ}.

    Raises:
        InsufficientZeros: Si θ(Ux + ζ) no se anula en la ventana
        NonSimpleZero: Si Θ ∩ Y no es reducido en la ventana
        FitDegenerate: Si todas las proyecciones de Kummer de Θ[ε,0](0) se anulan
    """
    line = _line(B, U, V, zeta_shift, window, pol)
    zeros, scale = _simple_zeros(line)

    residual_C = 0.0
    for zero in zeros:
        jet = theta_jet_uv(line.point(zero.q), line.B, line.U, line.V, 1, line.pol)
        tu, tv = abs(jet[(1, 0)]), abs(jet[(0, 1)])
        residual_C = max(residual_C, tv / (tu + tv + SCALE_FLOOR))
    residual_turn = max(abs(z.dq_dt) for z in zeros)

    xs = _off_divisor_points(line, zeros, scale)
    values = []
    for x in xs:
        j = theta_jet_uv(line.point(x), line.B, line.U, line.V, 2, line.pol)
        values.append((j[(0, 0)] * j[(1, 1)] - j[(1, 0)] * j[(0, 1)]) / j[(0, 0)] ** 2)
    values = np.array(values, dtype=complex)
    b2 = complex(np.mean(values)) if len(values) else 0j
    residual_b1 = float(np.max(np.abs(values - b2)) / (1.0 + abs(b2))) if len(values) else 0.0

    zero_dir = float(np.linalg.norm(line.V)) == 0.0
    a = np.zeros(2 ** line.g, dtype=complex) if zero_dir else \
        theta_char_derivatives(np.zeros(line.g), line.B, [line.U, line.V], [1, 1], line.pol)
    c = theta_char_derivatives(np.zeros(line.g), line.B, pol=line.pol)
    K = _kummer_rows(line, xs)
    ak = np.array([a @ k for k in K])
    ck = np.array([c @ k for k in K])
    den = float(np.sum(np.abs(ck) ** 2))
    if den <= SCALE_FLOOR:
        raise FitDegenerate("Las proyecciones de Kummer de Θ[ε,0](0) se anulan en toda la muestra")
    beta = complex(np.sum(np.conj(ck) * ak) / den)
    residual_ort = max((abs(x - beta * y) / (abs(x) + abs(beta * y) + SCALE_FLOOR) for x, y in zip(ak, ck)),
                       default=0.0)

    logger.info("Involución KP: C = %.2e, giro = %.2e, b1 = %.2e, ort = %.2e",
                residual_C, residual_turn, residual_b1, residual_ort)
    return InvolutionKPReport(
        zeros=[z.q for z in zeros], residual_C=float(residual_C), residual_turn=float(residual_turn),
        residual_b1=residual_b1, b2=b2, residual_ort=float(residual_ort), b2_kummer=beta / 2,
        provenance={"line": line.to_config(), "samples_Y": len(xs)},
    )


def _hausdorff(a: List[complex], b: List[complex]) -> float:
    if not a or not b:
        return float("inf")
    pa, pb = np.array(a), np.array(b)
    dist = np.abs(pa[:, None] - pb[None, :])
    return float(max(dist.min(axis=1).max(), dist.min(axis=0).max()))


def involution_toda_conditions(B, U, V, zeta_shift, window: Tuple[complex, complex],
                               pol: Optional[TruncationPolicy] = None) -> InvolutionTodaReport:
    """
    Condiciones de involución del caso Toda 2D.

    Las constantes (b2, b3) de la forma de Kummer se ajustan sobre la mitad
    de los puntos de Y y el residuo se reporta en la otra mitad.

    Raises:
        ShiftInvariantDivisor: Si U = 0 o los ceros de θ(Ux+ζ) y θ(Ux+U+ζ) coinciden
        InsufficientZeros: Si θ(Ux + ζ) no se anula en la ventana
        NonSimpleZero: Si Θ ∩ Y no es reducido
        FitDegenerate: Si el ajuste de (b2, b3) no tiene rango 2
    """
    period = as_period(B)
    Uv = np.asarray(U, dtype=complex).reshape(period.g)
    if float(np.linalg.norm(Uv)) == 0.0:
        raise ShiftInvariantDivisor("U = 0: Θ ∩ Y coincide trivialmente con (Θ + U) ∩ Y")
    line = _line(period, Uv, V, zeta_shift, window, pol)
    zeros, scale = _simple_zeros(line)
    moved = scan_zeros(line.shifted(line.Z + Uv)).zeros
    lo, hi = line.window
    size = max(hi.real - lo.real, hi.imag - lo.imag)
    distance = _hausdorff([z.q for z in zeros], [z.q for z in moved])
    if distance <= SHIFT_RATIO * size:
        raise ShiftInvariantDivisor(f"Θ ∩ Y es invariante por U (distancia {distance:.2e})")

    residual_Cd = 0.0
    for zero in zeros:
        z = line.point(zero.q)
        tv = theta_jet_uv(z, line.B, line.U, line.V, 1, line.pol)[(0, 1)]
        f = theta_eval(z + Uv, line.B, line.pol) * theta_eval(z - Uv, line.B, line.pol)
        residual_Cd = max(residual_Cd, abs(tv * tv + f) / (abs(tv) ** 2 + abs(f) + SCALE_FLOOR))

    xs = _off_divisor_points(line, zeros, scale)
    zero_dir = float(np.linalg.norm(line.V)) == 0.0
    origin = np.zeros(line.g)
    a = np.zeros(2 ** line.g, dtype=complex) if zero_dir else \
        2.0 * theta_char_derivatives(origin, line.B, [line.V], [2], line.pol)
    cu = theta_char_derivatives(Uv, line.B, pol=line.pol)
    c0 = theta_char_derivatives(origin, line.B, pol=line.pol)
    rows = [(a @ k, cu @ k, c0 @ k) for k in _kummer_rows(line, xs)]
    half = len(rows) // 2
    train, held = rows[:half], rows[half:]
    if len(train) < 2 or not held:
        raise FitDegenerate(f"Solo {len(rows)} puntos de Y fuera del divisor para ajustar (b2, b3)")
    design = np.array([[r[1], r[2]] for r in train])
    rhs = np.array([r[0] for r in train])
    (b2, b3), _, rank, _ = np.linalg.lstsq(design, rhs, rcond=1e-12)
    if rank < 2:
        raise FitDegenerate(f"Ajuste de (b2, b3) de rango {rank} < 2")
    residual_ortd = max(abs(r[0] - b2 * r[1] - b3 * r[2]) /
                        (abs(r[0]) + abs(b2 * r[1]) + abs(b3 * r[2]) + SCALE_FLOOR) for r in held)

    logger.info("Involución Toda: Cd = %.2e, distancia = %.2e, ortd = %.2e (b2 = %s, b3 = %s)",
                residual_Cd, distance, residual_ortd, b2, b3)
    return InvolutionTodaReport(
        zeros=[z.q for z in zeros], residual_Cd=float(residual_Cd), shift_distance=distance,
        residual_ortd=float(residual_ortd), b2=complex(b2), b3=complex(b3),
        provenance={"line": line.to_config(), "samples_Y": len(xs), "fit_points": len(train)},
    )
