"""
Fábrica de controles positivos en género 1.

Para B = [[τ]] todos los datos se construyen numéricamente: los vectores
(U, V, A) son libres y las constantes (p, E), los pesos cuadrisecantes o
la calibración de τ se ajustan por mínimos cuadrados sobre unos pocos
puntos y se validan en una malla independiente. No hay constantes
cerradas escritas a mano.

La red asociada es 2ω1 = 1, 2ω2 = τ, de modo que

    ln θ(y) = ln σ(y - z0) - η1 (y - z0)² + (lineal),   z0 = (1 + τ)/2.

Ejemplo de uso:
    B = genus_one_period(1j)
    d = genus_one_kp_datum(B, U=[1.0], V=[0.4], A=[0.21 + 0.13j])
    print(d.p, d.E, d.provenance["validation_max"])
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.conditions.secant_conditions import (
    SecantDatum,
    ThetaDivisorSample,
    quadrisecant_residual,
    quadrisecant_terms,
)
from src.config.settings import settings
from src.solutions.baker_akhiezer import (
    CurveDatum,
    LaurentTail,
    MarkedPoint,
    ba_bilinear_parts,
    ba_bilinear_residual,
    heat_bilinear_parts,
    heat_bilinear_residual,
    rs_bilinear_parts,
    rs_bilinear_residual,
)
from src.special.siegel_theta import (
    PeriodMatrix,
    TruncationPolicy,
    as_period,
    default_policy,
    theta_eval,
    theta_jet,
)
from src.special.weierstrass import EllipticLattice, invariants, wp_laurent_coefficients
from src.utils.errors import ConfigInvalid, FitDegenerate
from src.utils.helpers import complex_pair

logger = logging.getLogger(__name__)

FIT_POINTS = 4
VALIDATION_POINTS = 8
FIT_TOL = 1e-8
NULL_RATIO = 1e-10


# --- red y divisor -------------------------------------------------------------------

def genus_one_period(tau: complex) -> PeriodMatrix:
    return PeriodMatrix([[complex(tau)]])


def _check_genus_one(B) -> PeriodMatrix:
    period = as_period(B)
    if period.g != 1:
        raise ConfigInvalid(f"La fábrica de género 1 recibió g = {period.g}")
    return period


def _tau(period: PeriodMatrix) -> complex:
    return complex(period.B[0, 0])


def genus_one_lattice(B) -> EllipticLattice:
    """Red de Weierstrass 2ω1 = 1, 2ω2 = τ asociada a B = [[τ]]."""
    period = _check_genus_one(B)
    return EllipticLattice(0.5, _tau(period) / 2)


def classical_zero(B) -> complex:
    """El cero z0 = (1 + τ)/2 de θ(z | τ)."""
    period = _check_genus_one(B)
    return 0.5 * (1.0 + _tau(period))


def classical_divisor_sample(B, count: int = 6) -> ThetaDivisorSample:
    """Trasladados z0 + m + nτ del cero clásico, recorridos en espiral desde el origen."""
    period = _check_genus_one(B)
    z0, tau = classical_zero(period), _tau(period)
    shifts = sorted(((m, n) for m in range(-2, 3) for n in range(-2, 3)),
                    key=lambda mn: (abs(mn[0]) + abs(mn[1]), mn))
    sample = ThetaDivisorSample(seed=None)
    for m, n in shifts[:count]:
        sample.points.append(np.array([z0 + m + n * tau]))
        sample.provenance.append({"lattice": [m, n]})
    return sample


# --- ajustes lineales ----------------------------------------------------------------

def _random_points(period: PeriodMatrix, count: int, rng: np.random.Generator) -> List[np.ndarray]:
    tau = _tau(period)
    a = rng.uniform(0.0, 1.0, count)
    b = rng.uniform(0.05, 0.95, count)
    return [np.array([x + y * tau]) for x, y in zip(a, b)]


def _least_squares(rows: List[np.ndarray], rhs: List[complex], label: str) -> Tuple[np.ndarray, int]:
    design = np.array(rows, dtype=complex)
    target = np.array(rhs, dtype=complex)
    weights = 1.0 / (np.max(np.abs(design), axis=1) + np.abs(target) + 1e-300)
    solution, _, rank, _ = np.linalg.lstsq(design * weights[:, None], target * weights, rcond=1e-10)
    if rank < design.shape[1]:
        raise FitDegenerate(f"{label}: matriz de diseño de rango {rank} < {design.shape[1]}")
    return solution, int(rank)


def _validate(residual, points: List[np.ndarray], label: str) -> float:
    worst = max(residual(y) for y in points)
    if worst > FIT_TOL:
        raise FitDegenerate(f"{label}: el ajuste no valida (residuo {worst:.2e} > {FIT_TOL:.0e})")
    return float(worst)


def _provenance(factory: str, seed: int, fit: List[np.ndarray], rank: int, worst: float) -> Dict:
    return {
        "factory": factory,
        "seed": seed,
        "fit_points": [complex_pair(y[0]) for y in fit],
        "rank": rank,
        "validation_points": VALIDATION_POINTS,
        "validation_max": worst,
    }


def genus_one_kp_datum(B, U, V, A, seed: Optional[int] = None,
                       pol: Optional[TruncationPolicy] = None) -> SecantDatum:
    """
    Dato positivo de la ecuación de calor: (p, a = E - p²) ajustados en la forma

        (D_V - D_U² - 2p D_U + a)(θ(y+A)·θ(y)) = 0

    sobre FIT_POINTS puntos aleatorios y validados en VALIDATION_POINTS más.

    Raises:
        FitDegenerate: Si el diseño no tiene rango 2 (por ejemplo A = 0) o el ajuste no valida
    """
    period = _check_genus_one(B)
    pol = pol or default_policy()
    seed = settings.THETA_LAB_SEED if seed is None else seed
    rng = np.random.default_rng(seed)
    fit = _random_points(period, FIT_POINTS, rng)
    rows, rhs = [], []
    for y in fit:
        parts = heat_bilinear_parts(period, U, V, A, y, pol)
        rows.append(np.array([-2.0 * parts["du"], parts["ab"]]))
        rhs.append(-(parts["dv"] - parts["duu"]))
    (p, a), rank = _least_squares(rows, rhs, "KP")
    E = a + p * p
    check = _random_points(period, VALIDATION_POINTS, rng)
    worst = _validate(lambda y: heat_bilinear_residual(heat_bilinear_parts(period, U, V, A, y, pol), p, E),
                      check, "KP")
    logger.info("Dato KP de género 1: p = %s, E = %s (validación %.2e)", p, E, worst)
    return SecantDatum(B=period, U=U, V=V, A=A, p=p, E=E, mode="kp", pol=pol,
                       provenance=_provenance("genus_one_kp", seed, fit, rank, worst))


def genus_one_toda_datum(B, U, V, A, seed: Optional[int] = None,
                         pol: Optional[TruncationPolicy] = None) -> SecantDatum:
    """
    Dato positivo del problema diferencial-funcional: (E, P = e^p) ajustados en

        E θ(y+A)θ(y+U) + D_V(θ(y+A)·θ(y+U)) - P θ(y+A+U)θ(y) = 0

    Raises:
        FitDegenerate: Si el diseño es singular, P se anula o el ajuste no valida
    """
    period = _check_genus_one(B)
    pol = pol or default_policy()
    seed = settings.THETA_LAB_SEED if seed is None else seed
    rng = np.random.default_rng(seed)
    fit = _random_points(period, FIT_POINTS, rng)
    rows, rhs = [], []
    for y in fit:
        parts = rs_bilinear_parts(period, U, V, A, y, pol)
        rows.append(np.array([parts["ab"], -parts["cross"]]))
        rhs.append(-parts["dv"])
    (E, P), rank = _least_squares(rows, rhs, "Toda")
    if abs(P) < NULL_RATIO:
        raise FitDegenerate("Toda: e^p ajustado es nulo (¿V = 0?)")
    p = complex(np.log(P))
    check = _random_points(period, VALIDATION_POINTS, rng)
    worst = _validate(lambda y: rs_bilinear_residual(rs_bilinear_parts(period, U, V, A, y, pol), p, E),
                      check, "Toda")
    logger.info("Dato Toda de género 1: p = %s, E = %s (validación %.2e)", p, E, worst)
    return SecantDatum(B=period, U=U, V=V, A=A, p=p, E=E, mode="toda", pol=pol,
                       provenance=_provenance("genus_one_toda", seed, fit, rank, worst))


def genus_one_bdhe_datum(B, U, V, A, seed: Optional[int] = None,
                         pol: Optional[TruncationPolicy] = None) -> SecantDatum:
    """
    Dato positivo del problema en diferencias: (Q = e^E, P = e^p) ajustados en

        Q θ(A+y+V)θ(y+U) - P θ(A+y+U)θ(y+V) + θ(y+U+V)θ(A+y) = 0

    El dato guarda (p, E) de la forma (A); trisecant_residual_B los convierte.

    Raises:
        FitDegenerate: Si el diseño es singular, P o Q se anulan o el ajuste no valida
    """
    period = _check_genus_one(B)
    pol = pol or default_policy()
    seed = settings.THETA_LAB_SEED if seed is None else seed
    rng = np.random.default_rng(seed)
    fit = _random_points(period, FIT_POINTS, rng)
    rows, rhs = [], []
    for y in fit:
        parts = ba_bilinear_parts(period, U, V, A, y, pol)
        rows.append(np.array([parts["t1"], -parts["t2"]]))
        rhs.append(-parts["t3"])
    (Q, P), rank = _least_squares(rows, rhs, "BDHE")
    if min(abs(Q), abs(P)) < NULL_RATIO:
        raise FitDegenerate("BDHE: e^E o e^p ajustado es nulo")
    p, E = complex(np.log(P)), complex(np.log(Q))
    check = _random_points(period, VALIDATION_POINTS, rng)
    worst = _validate(lambda y: ba_bilinear_residual(ba_bilinear_parts(period, U, V, A, y, pol), p, E),
                      check, "BDHE")
    logger.info("Dato BDHE de género 1: p = %s, E = %s (validación %.2e)", p, E, worst)
    return SecantDatum(B=period, U=U, V=V, A=A, p=p, E=E, mode="bdhe", pol=pol,
                       provenance=_provenance("genus_one_bdhe", seed, fit, rank, worst))


# --- cuadrisecante ---------------------------------------------------------------------

def genus_one_prym_datum(B, U, V, W, validate_count: int = 6,
                         pol: Optional[TruncationPolicy] = None) -> SecantDatum:
    """
    Dato cuadrisecante degenerado de género 1.

    Con c3 = 1, X = c1², Y = c2², la ecuación del signo superior en z0 da
    Y = (T3 - X T2)/(T1 - X T4); sustituida en la del signo inferior queda
    una cuadrática en X. Se prueban sus raíces y se conserva la que mejor
    valida sobre los trasladados de z0.

    Raises:
        FitDegenerate: Si ninguna raíz da pesos finitos y no nulos
    """
    period = _check_genus_one(B)
    pol = pol or default_policy()
    g = period.g
    U, V, W = (np.asarray(v, dtype=complex).reshape(g) for v in (U, V, W))
    z0 = np.array([classical_zero(period)])
    T = quadrisecant_terms(period, U, V, W, z0, 1, pol)
    Tb = quadrisecant_terms(period, U, V, W, z0, -1, pol)
    quadratic = [
        -Tb[0] * T[3] + T[1] * Tb[2],
        Tb[0] * T[0] - T[1] * Tb[1] - T[2] * Tb[2] + Tb[3] * T[3],
        T[2] * Tb[1] - Tb[3] * T[0],
    ]
    scale = max(abs(c) for c in quadratic)
    if scale == 0:
        raise FitDegenerate("Prym: la cuadrática en c1² es idénticamente nula")
    sample = classical_divisor_sample(period, validate_count)
    best, best_value = None, np.inf
    for X in np.roots(np.array(quadratic) / scale):
        den = T[0] - X * T[3]
        if abs(X) < NULL_RATIO or abs(den) < NULL_RATIO * (abs(T[0]) + abs(X * T[3])):
            continue
        Y = (T[2] - X * T[1]) / den
        if abs(Y) < NULL_RATIO:
            continue
        d = SecantDatum(B=period, U=U, V=V, A=np.zeros(g), W=W, mode="prym", pol=pol,
                        constants={"c1": complex(np.sqrt(X)), "c2": complex(np.sqrt(Y)), "c3": 1 + 0j})
        value = max(quadrisecant_residual(d, sample))
        if value < best_value:
            best, best_value = d, value
    if best is None:
        raise FitDegenerate("Prym: ninguna raíz produce pesos finitos y no nulos")
    best.provenance = {"factory": "genus_one_prym", "validation_points": len(sample),
                       "validation_max": float(best_value)}
    logger.info("Dato Prym de género 1: c = %s (validación %.2e)", best.constants, best_value)
    return best


# --- involución y calibración de τ -------------------------------------------------------

def genus_one_toda_involution_V(B, U, branch: int = 1,
                                pol: Optional[TruncationPolicy] = None) -> np.ndarray:
    """V = ±i·sqrt(θ(z0+U)θ(z0-U))/θ'(z0), que anula (∂_Vθ)² + θ(z+U)θ(z-U) en z0."""
    period = _check_genus_one(B)
    pol = pol or default_policy()
    Uv = np.asarray(U, dtype=complex).reshape(1)
    z0 = np.array([classical_zero(period)])
    product = theta_eval(z0 + Uv, period, pol) * theta_eval(z0 - Uv, period, pol)
    slope = theta_jet(z0, period, [np.ones(1)], 1, pol)[(1,)]
    return np.array([(1 if branch >= 0 else -1) * 1j * np.sqrt(product) / slope])


def genus_one_bdhe_grid(B, shifts: Sequence[complex], Z, box: Tuple[int, int, int] = (4, 3, 3),
                        seed: Optional[int] = None,
                        pol: Optional[TruncationPolicy] = None) -> Tuple[np.ndarray, Dict]:
    """
    Caja τ_n(l, m) = exp(r_lm·l·m + r_nn·n²) θ(Z + n a + l b + m c).

    Los tres productos θ(y+b)θ(y+c), θ(y)θ(y+b+c), θ(y+a+b)θ(y-a+c) son
    thetas de segundo orden y en género 1 son linealmente dependientes; el
    vector nulo (α, β, γ) se obtiene por SVD sobre puntos aleatorios y fija
    r_lm = ln(-β/α), r_nn = ½ ln(γ/α).

    Returns:
        (tau_grid[n, l, m], procedencia con r_lm, r_nn y el cociente singular)

    Raises:
        FitDegenerate: Si el menor valor singular no es despreciable o α se anula
    """
    period = _check_genus_one(B)
    pol = pol or default_policy()
    seed = settings.THETA_LAB_SEED if seed is None else seed
    a, b, c = (complex(s) for s in shifts)
    Zv = complex(np.asarray(Z, dtype=complex).ravel()[0])
    th = lambda w: theta_eval(np.array([w]), period, pol)
    rng = np.random.default_rng(seed)
    rows = []
    for y in _random_points(period, 8, rng):
        y = complex(y[0])
        row = np.array([th(y + b) * th(y + c), th(y) * th(y + b + c), th(y + a + b) * th(y - a + c)])
        rows.append(row / np.max(np.abs(row)))
    _, s, vh = np.linalg.svd(np.array(rows))
    ratio = float(s[-1] / s[0])
    if ratio > NULL_RATIO:
        raise FitDegenerate(f"BDHE: los productos no son dependientes (σ_min/σ_max = {ratio:.2e})")
    alpha, beta, gamma = np.conj(vh[-1])
    if abs(alpha) < NULL_RATIO:
        raise FitDegenerate("BDHE: el coeficiente α del vector nulo se anula")
    r_lm = complex(np.log(-beta / alpha))
    r_nn = complex(0.5 * np.log(gamma / alpha))
    nn, nl, nm = box
    tau_grid = np.zeros((nn, nl, nm), dtype=complex)
    for n in range(nn):
        for l in range(nl):
            for m in range(nm):
                tau_grid[n, l, m] = np.exp(r_lm * l * m + r_nn * n * n) * th(Zv + n * a + l * b + m * c)
    info = {"r_lm": r_lm, "r_nn": r_nn, "singular_ratio": ratio, "seed": seed,
            "shifts": [complex_pair(v) for v in (a, b, c)]}
    logger.info("Caja τ de BDHE: r_lm = %s, r_nn = %s", r_lm, r_nn)
    return tau_grid, info


# --- datos de curva ---------------------------------------------------------------------

def _wp_taylor(lat: EllipticLattice, c: complex, order: int) -> np.ndarray:
    """Coeficientes p_m de ℘(c + w) = Σ p_m w^m por la recursión de ℘'' = 6℘² - g2/2."""
    g2, _ = invariants(lat)
    p = np.zeros(order + 2, dtype=complex)
    p[0], p[1] = complex(lat.wp(c)), complex(lat.wp_prime(c))
    for m in range(order):
        conv = sum(p[i] * p[m - i] for i in range(m + 1))
        p[m + 2] = (6.0 * conv - (0.5 * g2 if m == 0 else 0.0)) / ((m + 2) * (m + 1))
    return p


def _own_tails(lat: EllipticLattice, trunc: int) -> Dict[int, LaurentTail]:
    """Ω1 = ζ(w) - 2η1w, Ω2 = ℘(w), Ω3 = -℘'(w)/2 en k = 1/w."""
    n_max = (trunc + 3) // 2
    cn = wp_laurent_coefficients(lat, max(n_max, 3))
    o1 = np.zeros(trunc + 2, dtype=complex)
    o2 = np.zeros(trunc + 3, dtype=complex)
    o3 = np.zeros(trunc + 4, dtype=complex)
    o1[0] = o2[0] = o3[0] = 1.0
    o1[2] = -2.0 * lat.eta1
    for n in range(2, n_max + 1):
        m = 2 * n
        if m < len(o1):
            o1[m] -= cn[n] / (2 * n - 1)
        if m < len(o2):
            o2[m] += cn[n]
        if m < len(o3):
            o3[m] -= (n - 1) * cn[n]
    return {1: LaurentTail(1, o1), 2: LaurentTail(2, o2), 3: LaurentTail(3, o3)}


def _cross_tails(lat: EllipticLattice, c: complex, trunc: int) -> Dict[int, LaurentTail]:
    """Las mismas Ω desarrolladas cerca de otro punto, a distancia c del polo."""
    p = _wp_taylor(lat, c, trunc + 1)
    o1 = np.zeros(trunc + 1, dtype=complex)
    o1[0] = complex(lat.zeta(c)) - 2.0 * lat.eta1 * c
    for j in range(1, trunc + 1):
        o1[j] = -p[j - 1] / j
    o1[1] -= 2.0 * lat.eta1
    o2 = p[: trunc + 1].copy()
    o3 = np.array([-0.5 * (j + 1) * p[j + 1] for j in range(trunc + 1)])
    return {1: LaurentTail(0, o1), 2: LaurentTail(0, o2), 3: LaurentTail(0, o3)}


def genus_one_curve_datum(B, marked: Sequence[complex] = (0.0,), Z=None, trunc: int = 12,
                          pol: Optional[TruncationPolicy] = None) -> CurveDatum:
    """
    CurveDatum de la curva elíptica C/(Z + τZ) con puntos marcados en w = c_α.

    La coordenada local es k_α⁻¹ = w - c_α, así que A(p) = c_α + k_α⁻¹ y
    U_{α,1} = -1, U_{α,2} = U_{α,3} = 0. El desplazamiento discreto de cada
    punto es U_{α,0} = c_{α+1} - c_α (cíclico).
    """
    period = _check_genus_one(B)
    lat = genus_one_lattice(period)
    centers = [complex(c) for c in marked]
    N = len(centers)
    own = _own_tails(lat, trunc)
    points = []
    for alpha, c_alpha in enumerate(centers):
        omega = {}
        for beta, c_beta in enumerate(centers):
            tails = own if beta == alpha else _cross_tails(lat, c_alpha - c_beta, trunc)
            for i, tail in tails.items():
                omega[(beta, i)] = tail
        shift = centers[(alpha + 1) % N] - c_alpha if N > 1 else 0j
        points.append(MarkedPoint(abel0=np.array([c_alpha]),
                                  U=[np.array([shift]), np.array([-1.0 + 0j]), np.zeros(1), np.zeros(1)],
                                  omega=omega))
    Z = np.array([0.17 + 0.11j]) if Z is None else Z
    return CurveDatum(B=period, points=points, Z=Z, trunc_order=trunc, pol=pol or default_policy())
