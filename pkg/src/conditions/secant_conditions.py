"""
Condiciones de caracterización sobre una variedad abeliana.

Cada evaluador devuelve un residuo adimensional: la forma (A) vía los
problemas lineales con ψ de tipo theta, la forma (B) sobre las thetas de
segundo orden Θ[ε,0] (rectas secantes de la variedad de Kummer) y la forma
(C) sobre puntos del divisor theta.

Ejemplo de uso:
    d = genus_one_kp_datum(PeriodMatrix([[1j]]), U=[1.0], V=[0.4], A=[0.21 + 0.13j])
    print(flex_residual_B(d))
    sample = sample_theta_divisor(d.B, d.U, count=4, seed=7)
    print(cm_condition_C_residual(d.B, d.U, d.V, sample))
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.config.settings import settings
from src.divisor.tau_divisor import SIMPLICITY_RATIO, TauLine, scan_zeros
from src.solutions.baker_akhiezer import GridResidual, linear_residual_kp
from src.special.siegel_theta import (
    PeriodMatrix,
    TruncationPolicy,
    as_period,
    default_policy,
    random_period_matrix,
    theta_char_derivatives,
    theta_eval,
    theta_jet_uv,
)
from src.utils.errors import (
    BoundaryZero,
    ConfigInvalid,
    DivisorHit,
    FactorVanishes,
    FitDegenerate,
    GridHitsDivisor,
    InsufficientZeros,
)
from src.utils.helpers import complex_pair

logger = logging.getLogger(__name__)

SCALE_FLOOR = 1e-12
CONGRUENCE_TOL = 1e-9
FACTOR_RATIO = 1e-8
MODES = ("kp", "toda", "bdhe", "prym")


def _vec(value, g: int) -> np.ndarray:
    return np.asarray(value, dtype=complex).reshape(g)


def congruent(a, b, B) -> bool:
    """a ≡ b módulo la red Z^g + B Z^g."""
    period = as_period(B)
    diff = _vec(a, period.g) - _vec(b, period.g)
    n = np.linalg.solve(period.B.imag, diff.imag)
    m = (diff - period.B @ n).real
    return bool(np.all(np.abs(n - np.round(n)) < CONGRUENCE_TOL) and
                np.all(np.abs(m - np.round(m)) < CONGRUENCE_TOL))


@dataclass
class SecantDatum:
    """
    Dato (B, U, V, W, A, p, E) de una condición secante.

    Attributes:
        B: Matriz de periodos
        U, V, A: Vectores del problema lineal
        p, E: Constantes espectrales (forma A)
        W: Tercer vector de la condición cuadrisecante
        zeta_shift: Desplazamiento ζ de las condiciones con involución
        constants: Constantes opcionales (b1, b2, b3, c1, c2, c3, Ω0, Ω1, Ω2)
        mode: "kp", "toda", "bdhe" o "prym"
        provenance: Ajustes, semillas y validaciones que produjeron el dato

    Raises:
        ConfigInvalid: Si U = 0 o los vectores coinciden módulo la red según el modo
    """

    B: PeriodMatrix
    U: np.ndarray
    V: np.ndarray
    A: np.ndarray
    p: complex = 0j
    E: complex = 0j
    W: Optional[np.ndarray] = None
    zeta_shift: Optional[np.ndarray] = None
    constants: Dict[str, complex] = field(default_factory=dict)
    mode: str = "kp"
    pol: TruncationPolicy = field(default_factory=default_policy)
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.B = as_period(self.B)
        g = self.B.g
        self.U, self.V, self.A = _vec(self.U, g), _vec(self.V, g), _vec(self.A, g)
        self.W = None if self.W is None else _vec(self.W, g)
        self.zeta_shift = None if self.zeta_shift is None else _vec(self.zeta_shift, g)
        self.p, self.E = complex(self.p), complex(self.E)
        if self.mode not in MODES:
            raise ConfigInvalid(f"Modo desconocido: {self.mode} (válidos: {MODES})")
        if np.linalg.norm(self.U) == 0 and self.mode != "prym":
            raise ConfigInvalid("La dirección U debe ser no nula")
        if self.mode == "toda" and congruent(self.U, self.A, self.B):
            raise ConfigInvalid("U ≡ A módulo la red")
        if self.mode == "bdhe":
            for (a, b), label in (((self.U, self.V), "U, V"), ((self.U, self.A), "U, A"),
                                  ((self.V, self.A), "V, A")):
                if congruent(a, b, self.B):
                    raise ConfigInvalid(f"{label} coinciden módulo la red")

    @property
    def g(self) -> int:
        return self.B.g

    def to_config(self) -> Dict:
        vec = lambda v: None if v is None else [complex_pair(c) for c in v]
        return {
            "B": self.B.to_config(),
            "U": vec(self.U), "V": vec(self.V), "A": vec(self.A), "W": vec(self.W),
            "zeta_shift": vec(self.zeta_shift),
            "p": complex_pair(self.p), "E": complex_pair(self.E),
            "constants": {k: complex_pair(v) for k, v in self.constants.items()},
            "mode": self.mode,
        }

    @classmethod
    def from_config(cls, cfg: Dict, pol: Optional[TruncationPolicy] = None) -> "SecantDatum":
        pair = lambda p: complex(p[0], p[1])
        vec = lambda key: None if cfg.get(key) is None else np.array([pair(c) for c in cfg[key]])
        g = PeriodMatrix.from_config(cfg["B"]).g
        return cls(B=PeriodMatrix.from_config(cfg["B"]), U=vec("U"),
                   V=vec("V") if cfg.get("V") is not None else np.zeros(g),
                   A=vec("A") if cfg.get("A") is not None else np.zeros(g),
                   p=pair(cfg.get("p", [0, 0])), E=pair(cfg.get("E", [0, 0])), W=vec("W"),
                   zeta_shift=vec("zeta_shift"),
                   constants={k: pair(v) for k, v in cfg.get("constants", {}).items()},
                   mode=cfg.get("mode", "kp"), pol=pol or default_policy())

    def digest(self) -> str:
        """Hash estable del dato, para los reportes."""
        blob = json.dumps(self.to_config(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def bdhe_b_constants(p: complex, E: complex) -> Tuple[complex, complex]:
    """(p, E) de la forma (A) en diferencias → constantes de la forma (B): p + iπ, E + iπ."""
    return complex(p) + 1j * np.pi, complex(E) + 1j * np.pi


def bdhe_a_constants(p: complex, E: complex) -> Tuple[complex, complex]:
    """Inversa de bdhe_b_constants."""
    return complex(p) - 1j * np.pi, complex(E) - 1j * np.pi


def _relative(value: complex, scale: float) -> float:
    return float(abs(value) / (scale + SCALE_FLOOR))


# --- muestras del divisor ---------------------------------------------------------

@dataclass
class ThetaDivisorSample:
    """
    Puntos Z de C^g sobre el divisor theta.

    Attributes:
        points: Vectores Z con |θ(Z)| ≤ 1e-10·escala
        provenance: Recta (Z0), ventana y cero x de donde salió cada punto
        seed: Semilla con que se sortearon las rectas
    """

    points: List[np.ndarray] = field(default_factory=list)
    provenance: List[Dict[str, Any]] = field(default_factory=list)
    seed: Optional[int] = None

    def __len__(self) -> int:
        return len(self.points)

    def split(self) -> Tuple["ThetaDivisorSample", "ThetaDivisorSample"]:
        half = len(self.points) // 2
        return (ThetaDivisorSample(self.points[:half], self.provenance[:half], self.seed),
                ThetaDivisorSample(self.points[half:], self.provenance[half:], self.seed))


def sample_theta_divisor(B, U, count: int, seed: Optional[int] = None, window_size: float = 1.0,
                         max_lines: int = 60, pol: Optional[TruncationPolicy] = None) -> ThetaDivisorSample:
    """
    Muestrea el divisor theta con ceros de θ(Ux + Z0) sobre rectas aleatorias.

    Solo se conservan ceros simples en la dirección U. Una recta cuyo borde
    pasa por un cero se descarta y se sortea otra.

    Raises:
        InsufficientZeros: Si tras max_lines rectas no se reunieron count puntos
    """
    period = as_period(B)
    pol = pol or default_policy()
    seed = settings.THETA_LAB_SEED if seed is None else seed
    sample = ThetaDivisorSample(seed=seed)
    if count <= 0:
        return sample
    rng = np.random.default_rng(seed)
    U = _vec(U, period.g)
    half = 0.5 * window_size
    window = (complex(-half, -half), complex(half, half))
    for line_index in range(max_lines):
        Z0 = rng.uniform(-0.5, 0.5, period.g) + 1j * rng.uniform(-0.25, 0.25, period.g)
        line = TauLine(B=period, U=U, V=np.zeros(period.g), Z=Z0, window=window, pol=pol)
        try:
            scan = scan_zeros(line)
        except BoundaryZero as exc:
            logger.warning("Recta %d descartada: %s", line_index, exc)
            continue
        for zero in scan.zeros:
            if not zero.simple or zero.dtau <= SIMPLICITY_RATIO * scan.scale:
                continue
            point = line.point(zero.q)
            if abs(theta_eval(point, period, pol)) > 1e-10 * scan.scale:
                continue
            sample.points.append(point)
            sample.provenance.append({"line": line_index, "Z0": [complex_pair(c) for c in Z0],
                                      "window": [complex_pair(w) for w in window],
                                      "x": complex_pair(zero.q)})
            if len(sample.points) == count:
                logger.debug("sample_theta_divisor: %d puntos en %d rectas", count, line_index + 1)
                return sample
    raise InsufficientZeros(f"Solo {len(sample.points)} de {count} puntos tras {max_lines} rectas")


# --- forma (A) ---------------------------------------------------------------------

def linear_problem_residual_kp(d: SecantDatum, Z, grid: Sequence[Tuple[complex, float]]) -> float:
    """
    Residuo máximo de (∂t - ∂x² + u)ψ = 0 sobre la malla, con
    ψ = e^{px+Et}θ(A+Ux+Vt+Z)/θ(Ux+Vt+Z).

    Raises:
        GridHitsDivisor: Si algún punto de la malla cae sobre el divisor
    """
    try:
        report: GridResidual = linear_residual_kp(d, grid, Z)
    except DivisorHit as exc:
        raise GridHitsDivisor(str(exc)) from exc
    return report.max


# --- forma (B) ---------------------------------------------------------------------

def _char_terms(d: SecantDatum, w, directions=(), orders=()) -> np.ndarray:
    return theta_char_derivatives(w, d.B, directions, orders, d.pol)


def _zero_direction(v) -> bool:
    return float(np.linalg.norm(v)) == 0.0


def _char_dv(d: SecantDatum, w) -> np.ndarray:
    if _zero_direction(d.V):
        return np.zeros(2 ** d.g, dtype=complex)
    return _char_terms(d, w, [d.V], [1])


def _max_relative(terms: List[np.ndarray]) -> float:
    total = sum(terms)
    scale = sum(np.abs(t) for t in terms)
    return float(np.max(np.abs(total)) / (np.max(scale) + SCALE_FLOOR))


def flex_residual_B(d: SecantDatum) -> float:
    """
    max_ε |(∂_V - ∂_U² - 2p∂_U + E - p²)Θ[ε,0](A/2)|, relativo a la mayor
    magnitud de los términos.
    """
    w = d.A / 2
    terms = [_char_dv(d, w), -_char_terms(d, w, [d.U], [2]), -2 * d.p * _char_terms(d, w, [d.U], [1]),
             (d.E - d.p * d.p) * _char_terms(d, w)]
    return _max_relative(terms)


def tangent_trisecant_residual_B(d: SecantDatum) -> float:
    """max_ε |∂_VΘ[ε,0]((A-U)/2) - e^p Θ[ε,0]((A+U)/2) + E Θ[ε,0]((A-U)/2)|, relativo."""
    minus, plus = (d.A - d.U) / 2, (d.A + d.U) / 2
    terms = [_char_dv(d, minus), -np.exp(d.p) * _char_terms(d, plus), d.E * _char_terms(d, minus)]
    return _max_relative(terms)


def trisecant_residual_B(d: SecantDatum) -> float:
    """
    max_ε |Θ[ε,0]((A-U-V)/2) + e^{p'}Θ[ε,0]((A+U-V)/2) - e^{E'}Θ[ε,0]((A+V-U)/2)|
    con (p', E') = bdhe_b_constants(p, E): el dato guarda la forma (A).
    """
    pb, eb = bdhe_b_constants(d.p, d.E)
    terms = [_char_terms(d, (d.A - d.U - d.V) / 2), np.exp(pb) * _char_terms(d, (d.A + d.U - d.V) / 2),
             -np.exp(eb) * _char_terms(d, (d.A + d.V - d.U) / 2)]
    return _max_relative(terms)


# --- forma (C) ---------------------------------------------------------------------

def _points(sample) -> List[np.ndarray]:
    return list(sample.points) if isinstance(sample, ThetaDivisorSample) else [np.asarray(p) for p in sample]


def cm_condition_C_residual(B, U, V, sample, pol: Optional[TruncationPolicy] = None) -> float:
    """
    Máximo sobre la muestra de

        [(θ_V)² - (θ_UU)²]θ_UU + 2[θ_UU θ_UUU - θ_V θ_UV]θ_U + [θ_VV - θ_UUUU](θ_U)²

    dividido por |θ_U|³, que hereda el mismo factor de cuasi-periodicidad.
    """
    period = as_period(B)
    worst = 0.0
    for Z in _points(sample):
        j = theta_jet_uv(Z, period, U, V, 4, pol)
        tu, tuu, tuuu, tuuuu = j[(1, 0)], j[(2, 0)], j[(3, 0)], j[(4, 0)]
        tv, tuv, tvv = j[(0, 1)], j[(1, 1)], j[(0, 2)]
        expr = (tv * tv - tuu * tuu) * tuu + 2 * (tuu * tuuu - tv * tuv) * tu + (tvv - tuuuu) * tu * tu
        worst = max(worst, _relative(expr, abs(tu) ** 3))
    return worst


def rs_condition_C_residual(B, U, V, sample, pol: Optional[TruncationPolicy] = None) -> float:
    """
    Máximo de |∂_V[θ(Z+U)θ(Z-U)]∂_Vθ(Z) - θ(Z+U)θ(Z-U)∂_V²θ(Z)| sobre la muestra,
    relativo a (|θ(Z+U)θ(Z-U)| + |∂_Uθ(Z)|²)·|∂_Uθ(Z)|.
    """
    period = as_period(B)
    Uv = _vec(U, period.g)
    worst = 0.0
    for Z in _points(sample):
        jp = theta_jet_uv(Z + Uv, period, Uv, V, 1, pol)
        jm = theta_jet_uv(Z - Uv, period, Uv, V, 1, pol)
        j0 = theta_jet_uv(Z, period, Uv, V, 2, pol)
        f = jp[(0, 0)] * jm[(0, 0)]
        f_v = jp[(0, 1)] * jm[(0, 0)] + jp[(0, 0)] * jm[(0, 1)]
        expr = f_v * j0[(0, 1)] - f * j0[(0, 2)]
        tu = abs(j0[(1, 0)])
        worst = max(worst, _relative(expr, (abs(f) + tu * tu) * tu))
    return worst


def bdhe_condition_C_residual(B, U, V, sample, pol: Optional[TruncationPolicy] = None) -> float:
    """
    Máximo de |P(Z) + 1| con

        P = θ(Z+U)θ(Z-V)θ(Z-U+V) / (θ(Z-U)θ(Z+V)θ(Z+U-V))

    Los puntos donde algún factor se anula se omiten y se reportan.

    Raises:
        FactorVanishes: Si se omiten todos los puntos
    """
    period = as_period(B)
    Uv, Vv = _vec(U, period.g), _vec(V, period.g)
    th = lambda w: theta_eval(w, period, pol)
    worst, used = 0.0, 0
    for Z in _points(sample):
        num = [th(Z + Uv), th(Z - Vv), th(Z - Uv + Vv)]
        den = [th(Z - Uv), th(Z + Vv), th(Z + Uv - Vv)]
        scale = max(abs(v) for v in num + den)
        if min(abs(v) for v in num + den) <= FACTOR_RATIO * max(scale, SCALE_FLOOR):
            logger.warning("Factor theta nulo en Z = %s: punto omitido", np.round(Z, 6).tolist())
            continue
        used += 1
        worst = max(worst, float(abs(np.prod(num) / np.prod(den) + 1.0)))
    if used == 0:
        raise FactorVanishes("Todos los puntos de la muestra anulan algún factor theta")
    return worst


# --- cuadrisecante -------------------------------------------------------------------

def quadrisecant_terms(period: PeriodMatrix, U, V, W, Z, sign: int, pol=None) -> np.ndarray:
    """(T1, T2, T3, T4) de la identidad cuadrisecante en Z para el signo dado."""
    th = lambda w: theta_eval(w, period, pol)
    sW = sign * W
    return np.array([
        th(Z + U - V) * th(Z - U + sW) * th(Z + V + sW),
        th(Z - U + V) * th(Z + U + sW) * th(Z - V + sW),
        th(Z - U - V) * th(Z + U + sW) * th(Z + V + sW),
        th(Z + U + V) * th(Z - U + sW) * th(Z - V + sW),
    ])


def _quad_weights(c1: complex, c2: complex, c3: complex, sign: int) -> np.ndarray:
    """Pesos (x1, x2, x3) de x1 T1 + x2 T2 - x3 T3 - T4."""
    e = -2 * sign
    return np.array([c1 ** e * c3 ** 2, c2 ** e * c3 ** 2, c1 ** e * c2 ** e])


def _quad_value(T: np.ndarray, weights: np.ndarray) -> float:
    parts = np.array([weights[0] * T[0], weights[1] * T[1], -weights[2] * T[2], -T[3]])
    return _relative(np.sum(parts), float(np.max(np.abs(parts))))


def quadrisecant_residual(d: SecantDatum, sample, fit: bool = False) -> Tuple[float, float]:
    """
    Residuos de las dos elecciones de signo de la identidad cuadrisecante

        c1^{∓2}c3² T1 + c2^{∓2}c3² T2 = c1^{∓2}c2^{∓2} T3 + T4

    en la muestra. Con fit=True los tres pesos de cada signo se ajustan por
    mínimos cuadrados sobre la primera mitad de la muestra y el residuo se
    reporta en la segunda mitad.

    Returns:
        (residuo del signo superior, residuo del signo inferior)

    Raises:
        FitDegenerate: Si la matriz de diseño del ajuste no tiene rango 3
        ConfigInvalid: Si faltan W o las constantes c1, c2, c3 sin fit
    """
    if d.W is None:
        raise ConfigInvalid("La condición cuadrisecante requiere W")
    period = d.B
    points = _points(sample)
    out = []
    for sign in (1, -1):
        rows = [quadrisecant_terms(period, d.U, d.V, d.W, Z, sign, d.pol) for Z in points]
        if fit:
            half = len(rows) // 2
            train, held = rows[:half], rows[half:]
            if not held:
                raise FitDegenerate("La muestra es demasiado pequeña para ajustar y validar")
            design = np.array([[T[0], T[1], -T[2]] for T in train])
            rhs = np.array([T[3] for T in train])
            weights, _, rank, _ = np.linalg.lstsq(design, rhs, rcond=1e-10)
            if rank < 3:
                raise FitDegenerate(f"Matriz de diseño de rango {rank} < 3 (signo {sign:+d})")
            logger.info("Pesos cuadrisecantes ajustados (signo %+d): %s", sign, np.round(weights, 8).tolist())
            values = [_quad_value(T, weights) for T in held]
        else:
            try:
                c1, c2, c3 = (complex(d.constants[k]) for k in ("c1", "c2", "c3"))
            except KeyError as exc:
                raise ConfigInvalid(f"Falta la constante {exc} de la condición cuadrisecante") from exc
            weights = _quad_weights(c1, c2, c3, sign)
            values = [_quad_value(T, weights) for T in rows]
        out.append(max(values) if values else 0.0)
    return out[0], out[1]


# --- controles negativos ---------------------------------------------------------------

def random_secant_datum(g: int, seed: int, mode: str = "kp") -> SecantDatum:
    """Dato aleatorio con B, U, V, W, A, p, E sorteados: el control negativo estadístico."""
    rng = np.random.default_rng(seed)
    B = random_period_matrix(g, rng)
    cvec = lambda: rng.normal(size=g) + 0.3j * rng.normal(size=g)
    d = SecantDatum(B=B, U=cvec(), V=cvec(), A=cvec(), p=complex(rng.normal(), rng.normal()),
                    E=complex(rng.normal(), rng.normal()), W=cvec(), mode=mode)
    d.constants = {k: complex(1.0 + 0.3 * rng.normal(), 0.3 * rng.normal()) for k in ("c1", "c2", "c3")}
    d.provenance = {"seed": seed, "control": "negative"}
    return d


def negative_control_median(evaluator, g: int = 2, draws: int = 50, seed: Optional[int] = None) -> float:
    """Mediana de evaluator(dato) sobre draws datos aleatorios de semillas seed, seed+1, ..."""
    seed = settings.THETA_LAB_SEED if seed is None else seed
    values = []
    for k in range(draws):
        try:
            values.append(float(evaluator(random_secant_datum(g, seed + k))))
        except (FactorVanishes, InsufficientZeros, DivisorHit) as exc:
            logger.warning("Control negativo %d omitido: %s", seed + k, exc)
    if not values:
        raise InsufficientZeros("Ningún control negativo pudo evaluarse")
    return float(np.median(values))