"""
Funciones de Baker-Akhiezer, soluciones theta y sus residuos.

Este módulo reúne tres familias de comprobaciones:

- Problemas lineales con ψ construida desde un dato secante (ecuación de
  calor, ecuación diferencial-funcional de RS y ecuación en diferencias
  de BDHE), evaluados en forma bilineal con jets analíticos de θ.
- Funciones de Baker-Akhiezer desde datos de curva (CurveDatum) y los
  residuos no lineales de KP y Toda 2D por diferencias finitas con
  extrapolación de Richardson.
- Residuos puramente discretos (BDHE sobre una caja de τ y el análogo
  discreto de Schrödinger).

Ejemplo de uso:
    cd = genus_one_curve_datum(PeriodMatrix([[1j]]), Z=[0.1 + 0.2j])
    report = kp_residual(cd, [(0.1, 0.0, 0.0), (0.2, 0.1, 0.0)])
    print(report.max, report.extras["const"])
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.config.settings import settings
from src.special.siegel_theta import (
    PeriodMatrix,
    TruncationPolicy,
    as_period,
    default_policy,
    theta_eval,
    theta_jet,
    theta_jet_uv,
)
from src.utils.errors import ConfigInvalid, CurveDatumInvalid, DivisorHit
from src.utils.helpers import (
    complex_pair,
    first_derivative_5pt,
    fourth_derivative_5pt,
    pair_complex,
    richardson,
    second_derivative_5pt,
)

logger = logging.getLogger(__name__)

DIVISOR_RATIO = 1e-10
SCALE_FLOOR = 1e-12
MAX_MARKED_POINTS = 3
ABEL_TOL = 1e-10


# --- plumbing -------------------------------------------------------------------

@dataclass
class GridResidual:
    """
    Residuo evaluado sobre una malla.

    Attributes:
        grid: Puntos de la malla (tuplas)
        max: Residuo máximo
        mean: Residuo medio
        table: Filas [coordenadas..., residuo] con complejos partidos en (re, im)
        extras: Constantes ajustadas y otros datos de procedencia
    """

    grid: List[Tuple]
    max: float
    mean: float
    table: List[List[float]]
    extras: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_values(cls, grid: Sequence[Tuple], values: Sequence[float],
                    extras: Optional[Dict[str, Any]] = None) -> "GridResidual":
        values = [float(v) for v in values]
        table = []
        for point, value in zip(grid, values):
            row: List[float] = []
            for coord in point:
                c = complex(coord)
                row.extend([c.real, c.imag] if c.imag != 0 else [c.real])
            table.append(row + [value])
        return cls(grid=[tuple(p) for p in grid],
                   max=max(values) if values else 0.0,
                   mean=float(np.mean(values)) if values else 0.0,
                   table=table, extras=dict(extras or {}))

    def to_config(self) -> Dict:
        extras = {k: (complex_pair(v) if isinstance(v, complex) else v) for k, v in self.extras.items()}
        return {"max": self.max, "mean": self.mean, "points": len(self.grid), "extras": extras}


def _relative(value: complex, scale: float) -> float:
    return float(abs(value) / (scale + SCALE_FLOOR))


def _map_grid(fn: Callable[[Tuple], float], grid: Sequence[Tuple], threads: Optional[int] = None) -> List:
    threads = threads or settings.THETA_LAB_THREADS
    if threads > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, grid))
    return [fn(point) for point in grid]


def _check_divisor(value: complex, scale: float, where: str):
    if abs(value) <= DIVISOR_RATIO * max(scale, SCALE_FLOOR):
        raise DivisorHit(f"θ se anula (|θ| = {abs(value):.2e}) en {where}")


def _vec(value, g: int) -> np.ndarray:
    return np.asarray(value, dtype=complex).reshape(g)


# --- formas bilineales de los problemas lineales ---------------------------------

def heat_bilinear_parts(B, U, V, A, y, pol: Optional[TruncationPolicy] = None) -> Dict[str, complex]:
    """
    Derivadas de Hirota de θ(y + A)·θ(y) en las direcciones U, V.

    (∂t - ∂x² + u)ψ = 0 para ψ = e^{px+Et}θ(A+y)/θ(y) equivale a

        D_V - D_U² - 2p D_U + (E - p²)  aplicado a  θ(y+A)·θ(y)  = 0

    Raises:
        DivisorHit: Si θ(y) se anula
    """
    period = as_period(B)
    g = period.g
    y, A = _vec(y, g), _vec(A, g)
    a = theta_jet_uv(y + A, period, U, V, 2, pol)
    b = theta_jet_uv(y, period, U, V, 2, pol)
    _check_divisor(b[(0, 0)], max(abs(v) for v in b.values()), f"y = {y.tolist()}")
    return {
        "ab": a[(0, 0)] * b[(0, 0)],
        "dv": a[(0, 1)] * b[(0, 0)] - a[(0, 0)] * b[(0, 1)],
        "du": a[(1, 0)] * b[(0, 0)] - a[(0, 0)] * b[(1, 0)],
        "duu": a[(2, 0)] * b[(0, 0)] - 2 * a[(1, 0)] * b[(1, 0)] + a[(0, 0)] * b[(2, 0)],
    }


def heat_bilinear_residual(parts: Dict[str, complex], p: complex, E: complex) -> float:
    terms = [parts["dv"], -parts["duu"], -2 * p * parts["du"], (E - p * p) * parts["ab"]]
    return _relative(sum(terms), sum(abs(t) for t in terms))


def rs_bilinear_parts(B, U, V, A, y, pol: Optional[TruncationPolicy] = None) -> Dict[str, complex]:
    """
    Piezas de Eθ(y+A)θ(y+U) + D_V(θ(y+A)·θ(y+U)) - e^p θ(y+A+U)θ(y) = 0.

    Raises:
        DivisorHit: Si θ(y) o θ(y+U) se anulan
    """
    period = as_period(B)
    g = period.g
    y, A, Uv = _vec(y, g), _vec(A, g), _vec(U, g)
    a = theta_jet_uv(y + A, period, Uv, V, 1, pol)
    b = theta_jet_uv(y + Uv, period, Uv, V, 1, pol)
    t0 = theta_eval(y, period, pol)
    scale = max(abs(v) for v in b.values())
    _check_divisor(t0, scale, f"y = {y.tolist()}")
    _check_divisor(b[(0, 0)], scale, f"y + U = {(y + Uv).tolist()}")
    return {
        "ab": a[(0, 0)] * b[(0, 0)],
        "dv": a[(0, 1)] * b[(0, 0)] - a[(0, 0)] * b[(0, 1)],
        "cross": theta_eval(y + A + Uv, period, pol) * t0,
    }


def rs_bilinear_residual(parts: Dict[str, complex], p: complex, E: complex) -> float:
    terms = [E * parts["ab"], parts["dv"], -np.exp(p) * parts["cross"]]
    return _relative(sum(terms), sum(abs(t) for t in terms))


def ba_bilinear_parts(B, U, V, A, y, pol: Optional[TruncationPolicy] = None) -> Dict[str, complex]:
    """
    Piezas de e^E t1 - e^p t2 + t3 = 0, la ecuación en diferencias multiplicada
    por θ(y+U)θ(y+V):

        t1 = θ(A+y+V)θ(y+U),  t2 = θ(A+y+U)θ(y+V),  t3 = θ(y+U+V)θ(A+y)

    Raises:
        DivisorHit: Si θ(y), θ(y+U) o θ(y+V) se anulan
    """
    period = as_period(B)
    g = period.g
    y, A, Uv, Vv = _vec(y, g), _vec(A, g), _vec(U, g), _vec(V, g)
    th = lambda w: theta_eval(w, period, pol)
    base, tu, tv = th(y), th(y + Uv), th(y + Vv)
    scale = max(abs(base), abs(tu), abs(tv), abs(th(y + A)))
    for value, label in ((base, "y"), (tu, "y + U"), (tv, "y + V")):
        _check_divisor(value, scale, label)
    return {
        "t1": th(A + y + Vv) * tu,
        "t2": th(A + y + Uv) * tv,
        "t3": th(y + Uv + Vv) * th(A + y),
    }


def ba_bilinear_residual(parts: Dict[str, complex], p: complex, E: complex) -> float:
    terms = [np.exp(E) * parts["t1"], -np.exp(p) * parts["t2"], parts["t3"]]
    return _relative(sum(terms), sum(abs(t) for t in terms))


def _datum_Z(d, Z) -> np.ndarray:
    g = as_period(d.B).g
    return np.zeros(g, dtype=complex) if Z is None else _vec(Z, g)


def linear_residual_kp(d, grid: Sequence[Tuple[complex, float]], Z=None,
                       threads: Optional[int] = None) -> GridResidual:
    """
    Residuo de (∂t - ∂x² + u)ψ = 0 con u = -2∂x² ln θ(Ux+Vt+Z) y
    ψ = e^{px+Et}θ(A+Ux+Vt+Z)/θ(Ux+Vt+Z), sobre una malla de pares (x, t).

    El residuo se toma en forma bilineal, dividido por la suma de las
    magnitudes de sus cuatro términos.

    Raises:
        DivisorHit: Si la malla toca el divisor
    """
    Z = _datum_Z(d, Z)

    def at(point):
        x, t = point
        y = d.U * x + d.V * t + Z
        return heat_bilinear_residual(heat_bilinear_parts(d.B, d.U, d.V, d.A, y, d.pol), d.p, d.E)

    return GridResidual.from_values(grid, _map_grid(at, grid, threads))


def adjoint_residual(d, grid: Sequence[Tuple[complex, float]], Z=None,
                     threads: Optional[int] = None) -> GridResidual:
    """
    Residuo del problema adjunto (∂t + ∂x² - u)ψ* = 0 para
    ψ* = e^{-px-Et}θ(-A+Ux+Vt+Z)/θ(Ux+Vt+Z), con los mismos (p, E) que ψ.

    En forma bilineal: (D_V + D_U² - 2p D_U - (E - p²))(θ(y-A)·θ(y)) = 0.
    """
    Z = _datum_Z(d, Z)

    def at(point):
        x, t = point
        y = d.U * x + d.V * t + Z
        parts = heat_bilinear_parts(d.B, d.U, d.V, -d.A, y, d.pol)
        terms = [parts["dv"], parts["duu"], -2 * d.p * parts["du"], -(d.E - d.p * d.p) * parts["ab"]]
        return _relative(sum(terms), sum(abs(t) for t in terms))

    return GridResidual.from_values(grid, _map_grid(at, grid, threads))


def linear_residual_toda(d, grid: Sequence[Tuple[complex, float]], Z=None,
                         threads: Optional[int] = None) -> GridResidual:
    """
    Residuo de ∂tψ(x) - ψ(x+1) - w(x)ψ(x) = 0 con w = ∂t ln(τ(x+1)/τ(x)).

    El desplazamiento x → x+1 es exacto: mueve el argumento de θ en U.
    """
    Z = _datum_Z(d, Z)

    def at(point):
        x, t = point
        y = d.U * x + d.V * t + Z
        return rs_bilinear_residual(rs_bilinear_parts(d.B, d.U, d.V, d.A, y, d.pol), d.p, d.E)

    return GridResidual.from_values(grid, _map_grid(at, grid, threads))


def linear_residual_bdhe(d, grid: Sequence[Tuple[complex, int]], Z=None,
                         threads: Optional[int] = None) -> GridResidual:
    """
    Residuo de ψ_{n+1}(x) - ψ_n(x+1) + v_n(x)ψ_n(x) = 0 sobre pares (x, n),
    con ψ_n = e^{px+nE}θ(A+Ux+nV+Z)/θ(Ux+nV+Z) y
    v_n = τ_n(x)τ_{n+1}(x+1)/(τ_n(x+1)τ_{n+1}(x)).
    """
    Z = _datum_Z(d, Z)

    def at(point):
        x, n = point
        y = d.U * x + d.V * n + Z
        return ba_bilinear_residual(ba_bilinear_parts(d.B, d.U, d.V, d.A, y, d.pol), d.p, d.E)

    return GridResidual.from_values(grid, _map_grid(at, grid, threads))


# --- gauge ----------------------------------------------------------------------

def heat_wave(d, Z=None) -> Callable[[complex, float], complex]:
    """ψ(x, t) = e^{px+Et}θ(A+Ux+Vt+Z)/θ(Ux+Vt+Z) como función evaluable."""
    Z = _datum_Z(d, Z)

    def psi(x, t):
        y = d.U * x + d.V * t + Z
        den = theta_eval(y, d.B, d.pol)
        num = theta_eval(y + d.A, d.B, d.pol)
        _check_divisor(den, abs(num), f"x = {x}, t = {t}")
        return np.exp(d.p * x + d.E * t) * num / den

    return psi


@dataclass
class GaugedWave:
    """c(t)·ψ(x, t): el operador lineal queda desplazado por -ċ/c."""

    base: Callable[[complex, float], complex]
    c: Callable[[float], complex]
    c_dot: Callable[[float], complex]

    def __call__(self, x, t):
        return self.c(t) * self.base(x, t)

    def operator_shift(self, t: float) -> complex:
        return -self.c_dot(t) / self.c(t)


def gauge_transform(psi: Callable[[complex, float], complex], c: Callable[[float], complex],
                    c_dot: Callable[[float], complex]) -> GaugedWave:
    return GaugedWave(base=psi, c=c, c_dot=c_dot)


def potential_kp(d, x, t, Z=None) -> complex:
    """u = -2∂x² ln θ(Ux+Vt+Z)."""
    Z = _datum_Z(d, Z)
    jet = theta_jet(d.U * x + d.V * t + Z, d.B, [d.U], 2, d.pol)
    t0, t1, t2 = jet[(0,)], jet[(1,)], jet[(2,)]
    _check_divisor(t0, jet.scale(), f"x = {x}, t = {t}")
    return -2.0 * (t2 * t0 - t1 * t1) / (t0 * t0)


def gauge_residual(d, wave: GaugedWave, grid: Sequence[Tuple[complex, float]], Z=None,
                   h: float = 1e-3, shifted: bool = True) -> GridResidual:
    """
    Residuo de (∂t + s(t) - ∂x² + u)ψ̃ con ψ̃ = c(t)ψ y s = -ċ/c.

    Con shifted=False se evalúa el operador sin desplazar, que deja de
    anular a ψ̃ en cuanto c no es constante.
    """
    values = []
    for x, t in grid:
        psi_t = first_derivative_5pt(lambda tt: wave(x, tt), t, h)
        psi_xx = second_derivative_5pt(lambda xx: wave(xx, t), x, h)
        value = wave(x, t)
        u = potential_kp(d, x, t, Z)
        shift = wave.operator_shift(t) if shifted else 0.0
        terms = [psi_t, shift * value, -psi_xx, u * value]
        values.append(_relative(sum(terms), sum(abs(v) for v in terms)))
    return GridResidual.from_values(grid, values)


# --- datos de curva ---------------------------------------------------------------

@dataclass
class LaurentTail:
    """Serie truncada Σ_m coeffs[m] k^{top - m}."""

    top: int
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex).ravel()

    def __call__(self, k: complex) -> complex:
        powers = float(self.top) - np.arange(len(self.coeffs))
        return complex(np.sum(self.coeffs * np.power(complex(k), powers)))

    def to_config(self) -> Dict:
        return {"top": self.top, "coeffs": [complex_pair(c) for c in self.coeffs]}

    @classmethod
    def from_config(cls, cfg: Dict) -> "LaurentTail":
        return cls(top=int(cfg["top"]), coeffs=[pair_complex(c) for c in cfg["coeffs"]])


@dataclass
class MarkedPoint:
    """
    Datos locales de un punto marcado P_α.

    Attributes:
        abel0: A(P_α)
        U: U[i] para i ≥ 0 (U[0] es el desplazamiento discreto)
        omega: (β, i) -> desarrollo de Ω_{β,i} en la coordenada local k_α
        abel: abel[j-1] es el coeficiente de k^{-j} en A(p) - A(P_α)
    """

    abel0: np.ndarray
    U: List[np.ndarray]
    omega: Dict[Tuple[int, int], LaurentTail]
    abel: Optional[np.ndarray] = None


@dataclass
class CurveDatum:
    """
    Datos de curva importados: matriz de periodos, puntos marcados y Z.

    La consistencia de Abel A(p) = A(P_α) - Σ_i U_{α,i} k^{-i}/i se exige
    al construir, hasta trunc_order. Con validate=False se omite (solo
    para controles negativos).

    Raises:
        CurveDatumInvalid: Si falla la consistencia de Abel o hay más de tres puntos
    """

    B: PeriodMatrix
    points: List[MarkedPoint]
    Z: np.ndarray
    trunc_order: int = 8
    pol: TruncationPolicy = field(default_factory=default_policy)
    validate: bool = True

    def __post_init__(self):
        self.B = as_period(self.B)
        g = self.B.g
        self.Z = _vec(self.Z, g)
        if not 1 <= len(self.points) <= MAX_MARKED_POINTS:
            raise CurveDatumInvalid(f"Se admiten de 1 a {MAX_MARKED_POINTS} puntos marcados "
                                    f"(recibidos {len(self.points)})")
        for alpha, pt in enumerate(self.points):
            pt.abel0 = _vec(pt.abel0, g)
            pt.U = [_vec(u, g) for u in pt.U]
            if pt.abel is None:
                pt.abel = np.array([-self._flow_vector(alpha, j) / j for j in range(1, self.trunc_order + 1)])
            pt.abel = np.asarray(pt.abel, dtype=complex).reshape(-1, g)
            if self.validate:
                self._check_abel(alpha, pt)

    def _flow_vector(self, alpha: int, i: int) -> np.ndarray:
        U = self.points[alpha].U
        return U[i] if i < len(U) else np.zeros(self.B.g, dtype=complex)

    def _check_abel(self, alpha: int, pt: MarkedPoint):
        top = min(self.trunc_order, len(pt.abel), len(pt.U) - 1)
        for j in range(1, top + 1):
            expected = -pt.U[j] / j
            gap = float(np.max(np.abs(pt.abel[j - 1] - expected)))
            if gap > ABEL_TOL * (1.0 + float(np.max(np.abs(expected)))):
                raise CurveDatumInvalid(
                    f"Consistencia de Abel violada en el punto {alpha}, orden {j}: "
                    f"|A_{j} + U_{j}/{j}| = {gap:.2e}"
                )

    @property
    def g(self) -> int:
        return self.B.g

    def abel_map(self, alpha: int, k: complex) -> np.ndarray:
        pt = self.points[alpha]
        powers = complex(k) ** (-np.arange(1, len(pt.abel) + 1, dtype=float))
        return pt.abel0 + powers @ pt.abel

    def flow(self, times: Dict[Tuple[int, int], complex]) -> np.ndarray:
        out = np.zeros(self.g, dtype=complex)
        for (alpha, i), t in times.items():
            out = out + self._flow_vector(alpha, i) * t
        return out

    def omega_value(self, beta: int, i: int, alpha: int, k: complex) -> complex:
        """Ω_{β,i} evaluada en el punto de coordenada k cerca de P_α."""
        try:
            return self.points[alpha].omega[(beta, i)](k)
        except KeyError as exc:
            raise ConfigInvalid(f"Falta el desarrollo de Ω_{beta},{i} cerca del punto {alpha}") from exc

    @classmethod
    def from_config(cls, cfg: Dict, pol: Optional[TruncationPolicy] = None) -> "CurveDatum":
        """Desde {"B", "points": [{"U", "Omega", "Abel0", "Abel"?}], "Z", "trunc_order"}."""
        points = []
        for raw in cfg["points"]:
            omega = {}
            for key, tail in raw.get("Omega", {}).items():
                beta, i = (int(v) for v in key.split(","))
                omega[(beta, i)] = LaurentTail.from_config(tail)
            abel = raw.get("Abel")
            points.append(MarkedPoint(
                abel0=np.array([pair_complex(c) for c in raw["Abel0"]]),
                U=[np.array([pair_complex(c) for c in vec]) for vec in raw["U"]],
                omega=omega,
                abel=None if abel is None else np.array([[pair_complex(c) for c in row] for row in abel]),
            ))
        return cls(B=PeriodMatrix.from_config(cfg["B"]), points=points,
                   Z=np.array([pair_complex(c) for c in cfg["Z"]]),
                   trunc_order=int(cfg.get("trunc_order", 8)), pol=pol or default_policy(),
                   validate=bool(cfg.get("validate", True)))

    def to_config(self) -> Dict:
        return {
            "B": self.B.to_config(),
            "points": [{
                "U": [[complex_pair(c) for c in vec] for vec in pt.U],
                "Omega": {f"{b},{i}": tail.to_config() for (b, i), tail in pt.omega.items()},
                "Abel0": [complex_pair(c) for c in pt.abel0],
                "Abel": [[complex_pair(c) for c in row] for row in pt.abel],
            } for pt in self.points],
            "Z": [complex_pair(c) for c in self.Z],
            "trunc_order": self.trunc_order,
            "validate": self.validate,
        }


def ba_eval(cd: CurveDatum, times: Dict[Tuple[int, int], complex], p_local: Tuple[int, complex]) -> complex:
    """
    ψ(t, p) = exp(Σ t_{β,i} Ω_{β,i}(p)) · θ(A(p) + Σ U t + Z) θ(Z) / (θ(Σ U t + Z) θ(A(p) + Z)).

    La normalización hace ψ = 1 en t = 0. Los tiempos se indexan por
    (β, i) con i ≥ 1; la variable discreta (i = 0) no entra en la fase.

    Raises:
        DivisorHit: Si algún denominador theta se anula
    """
    alpha, k = p_local
    Ap = cd.abel_map(alpha, k)
    flow = cd.flow(times)
    phase = sum(t * cd.omega_value(beta, i, alpha, k) for (beta, i), t in times.items() if i >= 1)
    th = lambda w: theta_eval(w, cd.B, cd.pol)
    num = th(Ap + flow + cd.Z) * th(cd.Z)
    d1, d2 = th(flow + cd.Z), th(Ap + cd.Z)
    scale = abs(num) + abs(th(cd.Z)) + 1.0
    _check_divisor(d1, scale, "θ(ΣUt + Z)")
    _check_divisor(d2, scale, "θ(A(p) + Z)")
    return complex(np.exp(phase) * num / (d1 * d2))


def ba_linear_residual(cd: CurveDatum, grid: Sequence[Tuple[complex, complex]], k: complex,
                       h: float = 1e-3, const: Optional[complex] = None) -> GridResidual:
    """
    Residuo de (∂y - ∂x² + u)ψ = 0 para la función de Baker-Akhiezer de un punto,
    x = t_{1}, y = t_{2}, con la constante de u ajustada por mínimos cuadrados.
    """
    psi = lambda x, y: ba_eval(cd, {(0, 1): x, (0, 2): y}, (0, k))
    raw, values = [], []
    for x, y in grid:
        val = psi(x, y)
        psi_y = first_derivative_5pt(lambda yy: psi(x, yy), y, h)
        psi_xx = second_derivative_5pt(lambda xx: psi(xx, y), x, h)
        u = kp_u(cd, (x, y, 0.0))
        raw.append((psi_y, -psi_xx, u * val, val))
    if const is None:
        num = sum(np.conj(r[3]) * (r[0] + r[1] + r[2]) for r in raw)
        den = sum(abs(r[3]) ** 2 for r in raw)
        const = complex(-num / den) if den > 0 else 0j
    for psi_y, m_xx, uv, val in raw:
        terms = [psi_y, m_xx, uv, const * val]
        values.append(_relative(sum(terms), sum(abs(t) for t in terms)))
    return GridResidual.from_values(grid, values, {"const": const, "k": complex(k)})


# --- KP -------------------------------------------------------------------------

def kp_u(cd: CurveDatum, times: Sequence[complex], const: complex = 0.0) -> complex:
    """u = -2∂²_{t1} ln θ(U1 t1 + U2 t2 + U3 t3 + Z) + const, en el primer punto marcado."""
    flow = {(0, i + 1): t for i, t in enumerate(times)}
    y = cd.flow(flow) + cd.Z
    U1 = cd._flow_vector(0, 1)
    jet = theta_jet(y, cd.B, [U1], 2, cd.pol)
    t0, t1, t2 = jet[(0,)], jet[(1,)], jet[(2,)]
    _check_divisor(t0, jet.scale(), f"t = {list(times)}")
    return complex(-2.0 * (t2 * t0 - t1 * t1) / (t0 * t0) + const)


def _kp_derivatives(cd: CurveDatum, point: Tuple[complex, complex, complex], h: float) -> np.ndarray:
    x, y, t = point
    f = lambda xx, yy=y, tt=t: kp_u(cd, (xx, yy, tt))
    ux = first_derivative_5pt(f, x, h)
    uxx = second_derivative_5pt(f, x, h)
    uxxxx = fourth_derivative_5pt(f, x, h)
    uyy = second_derivative_5pt(lambda yy: f(x, yy), y, h)
    uxt = first_derivative_5pt(lambda tt: first_derivative_5pt(lambda xx: f(xx, y, tt), x, h), t, h)
    return np.array([f(x), ux, uxx, uxxxx, uyy, uxt], dtype=complex)


def kp_derivatives(cd: CurveDatum, point: Tuple, h: float = 1e-2, use_richardson: bool = True) -> np.ndarray:
    """
    (u, u_x, u_xx, u_xxxx, u_yy, u_xt) por diferencias finitas de 5 puntos.

    Con Richardson entre h y h/2: orden 4 para las derivadas de primer y
    segundo orden, orden 2 para la cuarta derivada.
    """
    coarse = _kp_derivatives(cd, point, h)
    if not use_richardson:
        return coarse
    fine = _kp_derivatives(cd, point, h / 2)
    orders = np.array([4, 4, 4, 2, 4, 4])
    out = np.array([richardson(c, f_, int(o)) for c, f_, o in zip(coarse, fine, orders)])
    out[0] = coarse[0]
    return out


def _kp_terms(derivs: np.ndarray, const: complex) -> List[complex]:
    u, ux, uxx, uxxxx, uyy, uxt = derivs
    u = u + const
    return [3 * uyy, -4 * uxt, 6 * ux * ux, 6 * u * uxx, -uxxxx]


def kp_residual(cd: CurveDatum, grid: Sequence[Tuple[complex, complex, complex]], h: float = 1e-2,
                use_richardson: bool = True, const: Optional[complex] = None,
                threads: Optional[int] = None) -> GridResidual:
    """
    Residuo de 3u_yy = (4u_t - 6uu_x + u_xxx)_x con x = t1, y = t2, t = t3.

    La constante aditiva de u entra como 6·const·u_xx; si no se da, se
    ajusta por mínimos cuadrados sobre la malla y se reporta en extras.

    Raises:
        DivisorHit: Si algún punto del esténcil toca el divisor
    """
    derivs = _map_grid(lambda pt: kp_derivatives(cd, pt, h, use_richardson), grid, threads)
    if const is None:
        raw = [sum(_kp_terms(d_, 0.0)) for d_ in derivs]
        lever = [6 * d_[2] for d_ in derivs]
        den = sum(abs(v) ** 2 for v in lever)
        const = complex(-sum(np.conj(l_) * r for l_, r in zip(lever, raw)) / den) if den > 0 else 0j
        logger.info("Constante de u ajustada: %s", const)
    values = []
    for d_ in derivs:
        terms = _kp_terms(d_, const)
        values.append(_relative(sum(terms), sum(abs(t) for t in terms)))
    return GridResidual.from_values(grid, values, {"const": const, "h": h, "richardson": use_richardson})


# --- Toda 2D --------------------------------------------------------------------

TODA_LAYOUTS = {
    "backward": "∂ξ∂ηφ_n = e^{φ_{n-1}-φ_n} - e^{φ_n-φ_{n+1}}",
    "forward": "∂ξ∂ηφ_n = e^{φ_n-φ_{n-1}} - e^{φ_{n+1}-φ_n}",
}


def _toda_ratio(cd: CurveDatum, n: int, xi: complex, eta: complex) -> complex:
    if len(cd.points) < 2:
        raise ConfigInvalid("Toda 2D requiere dos puntos marcados")
    S = cd._flow_vector(0, 0)
    y = cd.flow({(0, 1): xi, (1, 1): eta}) + cd.Z
    num = theta_eval(y + (n + 1) * S, cd.B, cd.pol)
    den = theta_eval(y + n * S, cd.B, cd.pol)
    _check_divisor(den, abs(num), f"n = {n}, ξ = {xi}, η = {eta}")
    return num / den


def toda_phi(cd: CurveDatum, n: int, times: Tuple[complex, complex]) -> complex:
    """φ_n = ln[θ((n+1)U + U_{1,1}ξ + U_{2,1}η + Z)/θ(nU + ...)] (rama principal)."""
    return complex(np.log(_toda_ratio(cd, n, *times)))


def _toda_pieces(cd: CurveDatum, point: Tuple[int, complex, complex], h: float) -> Tuple[complex, Dict[str, complex]]:
    n, xi, eta = point
    r = lambda a, b, m=n: _toda_ratio(cd, m, a, b)

    def mixed(step):
        r0 = r(xi, eta)
        rx = first_derivative_5pt(lambda a: r(a, eta), xi, step)
        ry = first_derivative_5pt(lambda b: r(xi, b), eta, step)
        rxy = first_derivative_5pt(lambda a: first_derivative_5pt(lambda b: r(a, b), eta, step), xi, step)
        return (r0 * rxy - rx * ry) / (r0 * r0)

    lhs = richardson(mixed(h), mixed(h / 2), order=4)
    prev, cur, nxt = r(xi, eta, n - 1), r(xi, eta), r(xi, eta, n + 1)
    layouts = {
        "backward": prev / cur - cur / nxt,
        "forward": cur / prev - nxt / cur,
    }
    return complex(lhs), layouts


def _toda_fit(pieces: List[Tuple[complex, Dict[str, complex]]], layout: str) -> Tuple[complex, List[float]]:
    lhs = np.array([p[0] for p in pieces])
    rhs = np.array([p[1][layout] for p in pieces])
    den = float(np.sum(np.abs(rhs) ** 2))
    lam = complex(np.sum(np.conj(rhs) * lhs) / den) if den > 0 else 0j
    values = [_relative(a - lam * b, abs(a) + abs(lam * b)) for a, b in zip(lhs, rhs)]
    return lam, values


def toda_layout_comparison(cd: CurveDatum, grid: Sequence[Tuple[int, complex, complex]], h: float = 1e-2,
                           threads: Optional[int] = None) -> Dict[str, Any]:
    """
    Evalúa las dos disposiciones de signos de Toda 2D sobre un mismo dato.

    Cada disposición admite una escala λ (la normalización de ξ, η) que se
    ajusta por mínimos cuadrados; gana la de menor residuo máximo.
    """
    pieces = _map_grid(lambda pt: _toda_pieces(cd, pt, h), grid, threads)
    out: Dict[str, Any] = {}
    for layout in TODA_LAYOUTS:
        lam, values = _toda_fit(pieces, layout)
        out[layout] = GridResidual.from_values(grid, values, {"scale": lam, "layout": layout})
    out["satisfied"] = min(TODA_LAYOUTS, key=lambda name: out[name].max)
    logger.info("Toda 2D: disposición satisfecha %s (%s); residuos %s",
                out["satisfied"], TODA_LAYOUTS[out["satisfied"]],
                {name: f"{out[name].max:.2e}" for name in TODA_LAYOUTS})
    return out


def toda_residual(cd: CurveDatum, grid: Sequence[Tuple[int, complex, complex]], layout: Optional[str] = None,
                  h: float = 1e-2, threads: Optional[int] = None) -> GridResidual:
    """
    Residuo de Toda 2D para φ_n sobre una malla (n, ξ, η); sin layout
    se usa la disposición que gana la comparación.
    """
    if layout is None:
        comparison = toda_layout_comparison(cd, grid, h, threads)
        return comparison[comparison["satisfied"]]
    if layout not in TODA_LAYOUTS:
        raise ConfigInvalid(f"Disposición desconocida: {layout}")
    pieces = _map_grid(lambda pt: _toda_pieces(cd, pt, h), grid, threads)
    lam, values = _toda_fit(pieces, layout)
    return GridResidual.from_values(grid, values, {"scale": lam, "layout": layout})


# --- residuos discretos -----------------------------------------------------------

def bdhe_tau_residual(tau_grid) -> GridResidual:
    """
    Residuo de τ_n(l+1,m)τ_n(l,m+1) - τ_n(l,m)τ_n(l+1,m+1) + τ_{n+1}(l+1,m)τ_{n-1}(l,m+1)
    sobre una caja tau_grid[n, l, m], normalizado por el mayor producto.
    """
    T = np.asarray(tau_grid, dtype=complex)
    if T.ndim != 3 or T.shape[0] < 3 or T.shape[1] < 2 or T.shape[2] < 2:
        raise ConfigInvalid(f"La caja de τ debe tener forma (≥3, ≥2, ≥2); recibida {T.shape}")
    grid, values = [], []
    for n in range(1, T.shape[0] - 1):
        for l in range(T.shape[1] - 1):
            for m in range(T.shape[2] - 1):
                terms = [T[n, l + 1, m] * T[n, l, m + 1], -T[n, l, m] * T[n, l + 1, m + 1],
                         T[n + 1, l + 1, m] * T[n - 1, l, m + 1]]
                scale = max(abs(t) for t in terms)
                grid.append((n, l, m))
                values.append(_relative(sum(terms), scale))
    return GridResidual.from_values(grid, values)


def discrete_schrodinger_residual(psi_grid, u_grid) -> GridResidual:
    """Residuo de ψ_{n+1,m+1} - u_{n,m}(ψ_{n+1,m} - ψ_{n,m+1}) - ψ_{n,m}."""
    psi = np.asarray(psi_grid, dtype=complex)
    u = np.asarray(u_grid, dtype=complex)
    if u.ndim == 0:
        u = np.full(psi.shape, complex(u))
    if psi.ndim != 2 or u.shape[0] < psi.shape[0] - 1 or u.shape[1] < psi.shape[1] - 1:
        raise ConfigInvalid(f"Mallas desalineadas: ψ {psi.shape}, u {u.shape}")
    grid, values = [], []
    for n in range(psi.shape[0] - 1):
        for m in range(psi.shape[1] - 1):
            jump = psi[n + 1, m] - psi[n, m + 1]
            terms = [psi[n + 1, m + 1], -u[n, m] * jump, -psi[n, m]]
            grid.append((n, m))
            values.append(_relative(sum(terms), sum(abs(t) for t in terms)))
    return GridResidual.from_values(grid, values)
