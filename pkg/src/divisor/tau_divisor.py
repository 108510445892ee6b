"""
Divisor de τ(x,t) = θ(Ux + Vt + Z | B) a lo largo de una recta compleja.

Este módulo localiza los ceros de τ en una ventana del plano x (principio
del argumento sobre un quadtree, refinado con Newton), arma el marco local
que se mueve con un cero simple y extrae los datos de Laurent de
u = -2∂x² ln τ para evaluar la dinámica de polos q̈ = 2w.

Ejemplo de uso:
    line = TauLine(B=PeriodMatrix([[1j]]), U=[1.0], V=[0.3], Z=[0.0],
                   window=(0j, 1 + 1j))
    zeros = find_zeros(line, t=0.0)
    data = laurent_u(line, zeros[0])
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.config.settings import settings
from src.divisor.series import BiSeries
from src.special.siegel_theta import (
    PeriodMatrix,
    TruncationPolicy,
    as_period,
    default_policy,
    theta_batch,
    theta_eval,
    theta_jet,
    theta_taylor_coefficients,
)
from src.utils.errors import BoundaryZero, ConfigInvalid, NonSimpleZero, TrackingLost
from src.utils.helpers import pair_complex, richardson, complex_pair

logger = logging.getLogger(__name__)

SIMPLICITY_RATIO = 1e-6
BOUNDARY_RATIO = 1e-9
NEWTON_RATIO = 1e-12
MIN_CELL_FRACTION = 1e-2
_SPLIT_OFFSETS = (0.0, 0.0313, -0.0271, 0.0457)


@dataclass
class TauLine:
    """
    Recta x ↦ Ux + Vt + Z en el espacio de argumentos de θ.

    Attributes:
        B: Matriz de periodos
        U, V, Z: Vectores complejos de dimensión g
        window: Esquinas (inferior izquierda, superior derecha) de la ventana en x
        t_range: Intervalo real de tiempos admitido
        pol: Política de truncamiento

    Raises:
        ConfigInvalid: Si U = 0, la ventana es degenerada o τ se anula en todas las muestras
    """

    B: PeriodMatrix
    U: np.ndarray
    V: np.ndarray
    Z: np.ndarray
    window: Tuple[complex, complex] = (0j, 1 + 1j)
    t_range: Tuple[float, float] = (0.0, 1.0)
    pol: TruncationPolicy = field(default_factory=default_policy)

    def __post_init__(self):
        self.B = as_period(self.B)
        g = self.B.g
        self.U = np.asarray(self.U, dtype=complex).reshape(g)
        self.V = np.asarray(self.V, dtype=complex).reshape(g)
        self.Z = np.asarray(self.Z, dtype=complex).reshape(g)
        if np.linalg.norm(self.U) == 0:
            raise ConfigInvalid("La dirección U debe ser no nula")
        lo, hi = complex(self.window[0]), complex(self.window[1])
        if not (lo.real < hi.real and lo.imag < hi.imag):
            raise ConfigInvalid(f"Ventana degenerada: {lo} .. {hi}")
        self.window = (lo, hi)
        xs = lo + (hi - lo).real * np.array([0.13, 0.41, 0.77, 0.29]) \
            + 1j * (hi - lo).imag * np.array([0.61, 0.23, 0.47, 0.88])
        if np.max(np.abs(tau_eval(self, xs, self.t_range[0]))) == 0:
            raise ConfigInvalid("τ se anula en todas las muestras de la ventana")

    @property
    def g(self) -> int:
        return self.B.g

    def point(self, x, t: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        return x[..., None] * self.U + t * self.V + self.Z

    def shifted(self, Z: Sequence[complex]) -> "TauLine":
        return TauLine(B=self.B, U=self.U, V=self.V, Z=np.asarray(Z), window=self.window,
                       t_range=self.t_range, pol=self.pol)

    @classmethod
    def from_config(cls, cfg: Dict, pol: Optional[TruncationPolicy] = None) -> "TauLine":
        """{"B": {...}, "U": [[re, im], ...], "V": ..., "Z": ..., "window": [[re, im], [re, im]]}."""
        vec = lambda key: np.array([pair_complex(p) for p in cfg[key]])
        window = tuple(pair_complex(p) for p in cfg.get("window", [[0, 0], [1, 1]]))
        return cls(B=PeriodMatrix.from_config(cfg["B"]), U=vec("U"), V=vec("V"), Z=vec("Z"),
                   window=window, t_range=tuple(cfg.get("t_range", (0.0, 1.0))),
                   pol=pol or default_policy())

    def to_config(self) -> Dict:
        return {
            "B": self.B.to_config(),
            "U": [complex_pair(c) for c in self.U],
            "V": [complex_pair(c) for c in self.V],
            "Z": [complex_pair(c) for c in self.Z],
            "window": [complex_pair(w) for w in self.window],
            "t_range": list(self.t_range),
        }


@dataclass
class DivisorZero:
    q: complex
    t: float
    dq_dt: Optional[complex] = None
    d2q_dt2: Optional[complex] = None
    simple: bool = True
    multiplicity: int = 1
    dtau: float = 0.0


@dataclass
class LaurentData:
    """
    Coeficientes de u = 2/(x-q)² + v + w(x-q) + ... y, si hay solución,
    de ψ = α/(x-q) + β + γ(x-q) + δ(x-q)² + ...
    """

    v: complex
    w: complex
    alpha: Optional[complex] = None
    beta: Optional[complex] = None
    gamma: Optional[complex] = None
    delta: Optional[complex] = None
    contour_v: Optional[complex] = None
    contour_w: Optional[complex] = None

    @property
    def route_gap(self) -> float:
        """Discrepancia entre la ruta de jets y la de integrales de contorno."""
        if self.contour_v is None:
            return float("nan")
        scale = 1.0 + abs(self.v) + abs(self.w)
        return float(max(abs(self.v - self.contour_v), abs(self.w - self.contour_w)) / scale)


# --- evaluación -----------------------------------------------------------------

def tau_eval(line: TauLine, x, t: float = 0.0):
    """τ(x,t) = θ(Ux + Vt + Z); acepta x escalar o arreglo."""
    x = np.asarray(x, dtype=complex)
    if x.ndim == 0:
        return theta_eval(line.point(x, t), line.B, line.pol)
    vals = theta_batch(line.point(x.ravel(), t), line.B, line.pol)
    return vals.reshape(x.shape)


def _tau_x(line: TauLine, x: complex, t: float) -> Tuple[complex, complex]:
    jet = theta_jet(line.point(x, t), line.B, [line.U], 1, line.pol)
    return jet[(0,)], jet[(1,)]


def newton_zero(line: TauLine, guess: complex, t: float, scale: float, max_iter: int = 60) -> Tuple[complex, bool]:
    """Newton en x para τ(·, t) = 0; devuelve (x, convergió)."""
    x = complex(guess)
    for _ in range(max_iter):
        f, df = _tau_x(line, x, t)
        if abs(f) <= NEWTON_RATIO * scale:
            return (x - f / df if df != 0 else x), True
        if df == 0:
            return x, False
        step = f / df
        x -= step
        if abs(step) <= 1e-15 * (1.0 + abs(x)):
            f = tau_eval(line, x, t)
            return x, bool(abs(f) <= 1e3 * NEWTON_RATIO * scale)
    return x, False


def _zero_velocity(line: TauLine, q: complex, t: float) -> Tuple[complex, complex, complex]:
    """(∂xτ, q̇, q̈) por diferenciación implícita de τ(q(t), t) = 0."""
    if np.linalg.norm(line.V) == 0:
        return _tau_x(line, q, t)[1], 0j, 0j
    jet = theta_jet(line.point(q, t), line.B, [line.U, line.V], 2, line.pol)
    tx, tt = jet[(1, 0)], jet[(0, 1)]
    if tx == 0:
        return tx, complex("nan"), complex("nan")
    qd = -tt / tx
    qdd = -(jet[(0, 2)] + 2 * jet[(1, 1)] * qd + jet[(2, 0)] * qd * qd) / tx
    return tx, qd, qdd


# --- principio del argumento ----------------------------------------------------

def _edge_points(a: complex, b: complex, n: int) -> np.ndarray:
    return a + (b - a) * np.arange(n) / n


def _winding(line: TauLine, t: float, lo: complex, hi: complex, scale: float,
             base: int = 24, rounds: int = 10) -> int:
    """
    Número de vueltas de τ sobre el borde del rectángulo.

    Los tramos con salto de fase mayor que π/4 se subdividen.

    Raises:
        BoundaryZero: Si |τ| cae por debajo del umbral sobre el borde
    """
    corners = [lo, complex(hi.real, lo.imag), hi, complex(lo.real, hi.imag)]
    pts = np.concatenate([_edge_points(corners[k], corners[(k + 1) % 4], base) for k in range(4)])
    vals = tau_eval(line, pts, t)
    for _ in range(rounds):
        if np.min(np.abs(vals)) < BOUNDARY_RATIO * scale:
            raise BoundaryZero(f"|τ| = {np.min(np.abs(vals)):.2e} sobre el borde {lo}..{hi}")
        nxt = np.roll(vals, -1)
        jumps = np.abs(np.angle(nxt / vals))
        bad = np.nonzero(jumps > np.pi / 4)[0]
        if len(bad) == 0:
            total = float(np.sum(np.angle(nxt / vals)))
            n = total / (2 * np.pi)
            if abs(n - round(n)) > 0.1:
                raise BoundaryZero(f"Número de vueltas no entero ({n:.3f}) en {lo}..{hi}")
            return int(round(n))
        mids = 0.5 * (pts[bad] + np.roll(pts, -1)[bad])
        mvals = tau_eval(line, mids, t)
        pts = np.insert(pts, bad + 1, mids)
        vals = np.insert(vals, bad + 1, mvals)
    raise BoundaryZero(f"El borde {lo}..{hi} no se resolvió en {rounds} refinamientos")


def _split(lo: complex, hi: complex, offset: float) -> List[Tuple[complex, complex]]:
    mx = lo.real + (0.5 + offset) * (hi.real - lo.real)
    my = lo.imag + (0.5 - offset) * (hi.imag - lo.imag)
    return [
        (complex(lo.real, lo.imag), complex(mx, my)),
        (complex(mx, lo.imag), complex(hi.real, my)),
        (complex(lo.real, my), complex(mx, hi.imag)),
        (complex(mx, my), complex(hi.real, hi.imag)),
    ]


def _inside(x: complex, lo: complex, hi: complex, margin: float = 0.0) -> bool:
    return (lo.real - margin <= x.real <= hi.real + margin) and (lo.imag - margin <= x.imag <= hi.imag + margin)


@dataclass
class ZeroScan:
    zeros: List[DivisorZero]
    winding: int
    scale: float
    deviations: List[str] = field(default_factory=list)


class _QuadTree:
    def __init__(self, line: TauLine, t: float, scale: float, min_size: float):
        self.line, self.t, self.scale, self.min_size = line, t, scale, min_size
        self.deviations: List[str] = []

    def children(self, lo: complex, hi: complex):
        """Subdivide la celda; corre la línea de corte si cae sobre un cero."""
        for offset in _SPLIT_OFFSETS:
            cells = _split(lo, hi, offset)
            try:
                return [(c, _winding(self.line, self.t, c[0], c[1], self.scale)) for c in cells]
            except BoundaryZero as exc:
                msg = f"BoundaryZero al subdividir {lo}..{hi} (corrimiento {offset}): {exc}"
                logger.warning(msg)
                self.deviations.append(msg)
        raise BoundaryZero(f"No se pudo subdividir {lo}..{hi} evitando ceros del borde")

    def solve(self, lo: complex, hi: complex, count: int) -> List[DivisorZero]:
        if count == 0:
            return []
        size = max(hi.real - lo.real, hi.imag - lo.imag)
        if count == 1:
            zero = self._newton_in_cell(lo, hi)
            if zero is not None or size <= self.min_size:
                return [zero] if zero is not None else [self._fallback(lo, hi, 1)]
        elif size <= self.min_size:
            return [self._fallback(lo, hi, count)]
        out = []
        for (clo, chi), n in self.children(lo, hi):
            out.extend(self.solve(clo, chi, n))
        return out

    def _newton_in_cell(self, lo: complex, hi: complex) -> Optional[DivisorZero]:
        center = 0.5 * (lo + hi)
        starts = [center] + [0.5 * (center + c) for c in (lo, hi, complex(lo.real, hi.imag), complex(hi.real, lo.imag))]
        for x0 in starts:
            x, ok = newton_zero(self.line, x0, self.t, self.scale)
            if ok and _inside(x, lo, hi):
                logger.debug("Cero en %s (celda %s..%s)", x, lo, hi)
                return self._make_zero(x, 1)
        return None

    def _fallback(self, lo: complex, hi: complex, count: int) -> DivisorZero:
        x, _ = newton_zero(self.line, 0.5 * (lo + hi), self.t, self.scale)
        if not _inside(x, lo, hi):
            x = 0.5 * (lo + hi)
        msg = f"Cero de multiplicidad {count} cerca de {x}"
        if count > 1:
            logger.warning(msg)
            self.deviations.append(f"NonSimpleZero: {msg}")
        return self._make_zero(x, count)

    def _make_zero(self, x: complex, multiplicity: int) -> DivisorZero:
        tx, qd, qdd = _zero_velocity(self.line, x, self.t)
        simple = multiplicity == 1 and abs(tx) > SIMPLICITY_RATIO * self.scale
        return DivisorZero(q=complex(x), t=self.t, dq_dt=qd, d2q_dt2=qdd, simple=simple,
                           multiplicity=multiplicity, dtau=float(abs(tx)))


def _boundary_scale(line: TauLine, t: float) -> float:
    lo, hi = line.window
    corners = [lo, complex(hi.real, lo.imag), hi, complex(lo.real, hi.imag)]
    pts = np.concatenate([_edge_points(corners[k], corners[(k + 1) % 4], 16) for k in range(4)])
    return float(np.max(np.abs(tau_eval(line, pts, t))))


def scan_zeros(line: TauLine, t: float = 0.0, threads: Optional[int] = None) -> ZeroScan:
    """
    Localiza todos los ceros de τ(·, t) en la ventana de la recta.

    Las cuatro celdas del primer nivel se procesan en paralelo y el
    resultado se ordena por (Re q, Im q).

    Raises:
        BoundaryZero: Si el borde de la ventana pasa por un cero
    """
    lo, hi = line.window
    scale = _boundary_scale(line, t)
    total = _winding(line, t, lo, hi, scale)
    min_size = MIN_CELL_FRACTION * max(hi.real - lo.real, hi.imag - lo.imag)
    tree = _QuadTree(line, t, scale, min_size)
    zeros: List[DivisorZero] = []
    if total > 0:
        cells = tree.children(lo, hi)
        threads = threads or settings.THETA_LAB_THREADS
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(lambda cell: tree.solve(cell[0][0], cell[0][1], cell[1]), cells))
        else:
            parts = [tree.solve(c[0][0], c[0][1], c[1]) for c in cells]
        for part in parts:
            zeros.extend(part)
    zeros.sort(key=lambda z: (round(z.q.real, 12), round(z.q.imag, 12)))
    found = sum(z.multiplicity for z in zeros)
    if found != total:
        msg = f"Se hallaron {found} ceros contando multiplicidad, el borde indica {total}"
        logger.warning(msg)
        tree.deviations.append(msg)
    logger.debug("scan_zeros(t=%s): %d ceros, vueltas=%d", t, len(zeros), total)
    return ZeroScan(zeros=zeros, winding=total, scale=scale, deviations=tree.deviations)


def find_zeros(line: TauLine, t: float = 0.0) -> List[DivisorZero]:
    return scan_zeros(line, t).zeros


def zeros_table(zeros: Sequence[DivisorZero]) -> List[List]:
    """Filas t, Re q, Im q, simple, |∂xτ| para volcar en CSV."""
    return [[z.t, z.q.real, z.q.imag, int(z.simple), z.dtau] for z in zeros]


# --- marco local ----------------------------------------------------------------

class LocalFrame:
    """
    Desarrollo bivariado de τ en el marco (ξ, s) que se mueve con un cero simple.

    x = q(t0 + s) + ξ, con q(t0 + s) = q0 + δ(s). D(ξ, s) = τ(x, t0 + s) se
    anula en ξ = 0 para todo s; R = D/ξ es invertible en el origen.

    Attributes:
        a: Coeficientes de Taylor de τ en (q0, t0) en las variables (x - q0, s)
        path: δ(s) como BiSeries (solo s)
        reduced: R(ξ, s)
        log_reduced: ln R(ξ, s)
    """

    def __init__(self, line: TauLine, zero: DivisorZero, ns: int = 3, nx: int = 5):
        self.line, self.zero, self.ns, self.nx = line, zero, ns, nx
        self.base = line.point(zero.q, zero.t)
        self.wide = nx + ns + 1
        self.a = theta_taylor_coefficients(self.base, line.B, line.U, line.V, self.wide, ns, line.pol)
        self.scale = float(np.max(np.abs(self.a)))
        # q0 es un cero: el residuo de Newton no entra en la serie
        self.a[0, 0] = 0.0
        if abs(self.a[0, 1]) <= SIMPLICITY_RATIO * self.scale:
            raise NonSimpleZero(f"∂xτ = {abs(self.a[0, 1]):.2e} en q = {zero.q}")
        self.path = self._solve_path()
        moving = self.compose(self.a)
        col0 = moving.c[:, 0]
        if np.max(np.abs(col0)) > 1e-8 * self.scale:
            logger.warning("Residuo de la trayectoria del cero: %.2e", float(np.max(np.abs(col0))))
        moving.c[:, 0] = 0.0
        self.reduced = BiSeries(moving.c[:, 1:], ns, nx)
        self.log_reduced = self.reduced.log()

    def _solve_path(self) -> BiSeries:
        ns = self.ns
        cols = [BiSeries.from_s(self.a[:, i], ns, 0) for i in range(self.wide + 1)]
        delta = BiSeries.constant(0.0, ns, 0)
        for _ in range(ns + 2):
            value = BiSeries.constant(0.0, ns, 0)
            power = BiSeries.constant(1.0, ns, 0)
            for col in cols:
                value = value + col * power
                power = power * delta
            delta = delta - value / self.a[0, 1]
        return delta

    def compose(self, coeffs: np.ndarray) -> BiSeries:
        """Lleva coeficientes de Taylor en (x - q0, s) al marco móvil, caja (ns, nx + 1)."""
        wide = BiSeries(coeffs, self.ns, self.wide)
        shift = BiSeries(self.path.c, self.ns, self.wide)
        out = wide.compose_x(shift)
        return BiSeries(out.c, self.ns, self.nx + 1)

    @property
    def q_dot(self) -> complex:
        return complex(self.path.c[1, 0]) if self.ns >= 1 else complex("nan")

    @property
    def q_ddot(self) -> complex:
        return complex(2.0 * self.path.c[2, 0]) if self.ns >= 2 else complex("nan")

    def u_coefficients(self) -> Tuple[np.ndarray, np.ndarray]:
        """(v(s), w(s)) como coeficientes en s."""
        L = self.log_reduced
        return -4.0 * L.column(2), -12.0 * L.column(3)

    def u_regular(self) -> BiSeries:
        """u - 2/ξ² en el marco móvil."""
        return -2.0 * self.log_reduced.deriv("x").deriv("x")

    def solution(self, A, p: complex, E: complex) -> BiSeries:
        """
        G = ξ·ψ en el marco móvil para ψ = e^{px+Et} θ(A + Ux + Vt + Z)/τ.
        """
        b = theta_taylor_coefficients(self.base + np.asarray(A, dtype=complex), self.line.B, self.line.U,
                                      self.line.V, self.wide, self.ns, self.line.pol)
        numer = BiSeries(self.compose(b).c, self.ns, self.nx)
        xi = BiSeries.variable("x", self.ns, self.nx)
        s = BiSeries.variable("s", self.ns, self.nx)
        shift = BiSeries(self.path.c, self.ns, self.nx)
        expo = (p * (xi + shift) + E * s).exp() * np.exp(p * self.zero.q + E * self.zero.t)
        return expo * numer / self.reduced


def local_frame(line: TauLine, zero: DivisorZero, ns: int = 3, nx: int = 5) -> LocalFrame:
    return LocalFrame(line, zero, ns, nx)


# --- datos de Laurent -----------------------------------------------------------

def convergence_radius(frame: LocalFrame) -> float:
    c = frame.reduced.c[0]
    ratios = [abs(c[0] / c[i]) ** (1.0 / i) for i in range(1, len(c)) if c[i] != 0]
    return float(min(ratios)) if ratios else 1.0


def _contour_coefficients(line: TauLine, zero: DivisorZero, radius: float, points: int) -> Tuple[complex, complex]:
    angles = 2 * np.pi * np.arange(points) / points
    offsets = radius * np.exp(1j * angles)
    u = np.empty(points, dtype=complex)
    for k, d in enumerate(offsets):
        jet = theta_jet(line.point(zero.q + d, zero.t), line.B, [line.U], 2, line.pol)
        t0, t1, t2 = jet[(0,)], jet[(1,)], jet[(2,)]
        u[k] = -2.0 * (t2 * t0 - t1 * t1) / (t0 * t0)
    # la parte singular 2/ξ² no contribuye a los promedios sobre la circunferencia
    return complex(np.mean(u)), complex(np.mean(u / offsets))


def laurent_u(line: TauLine, zero: DivisorZero, contour_points: int = 48,
              radius: Optional[float] = None) -> LaurentData:
    """
    Coeficientes v, w de u en un cero simple, por dos rutas independientes.

    La ruta principal divide series de Taylor de τ (jets analíticos); la de
    control integra u sobre una circunferencia alrededor del cero.

    Raises:
        NonSimpleZero: Si el cero no es simple
    """
    frame = local_frame(line, zero)
    v_s, w_s = frame.u_coefficients()
    r = radius or 0.3 * convergence_radius(frame)
    cv, cw = _contour_coefficients(line, zero, r, contour_points)
    data = LaurentData(v=complex(v_s[0]), w=complex(w_s[0]), contour_v=cv, contour_w=cw)
    logger.debug("laurent_u en q=%s: v=%s w=%s (brecha %.2e)", zero.q, data.v, data.w, data.route_gap)
    return data


def solution_laurent(line: TauLine, zero: DivisorZero, A, p: complex, E: complex) -> LaurentData:
    """Datos de Laurent de u y de ψ = e^{px+Et}θ(A+Ux+Vt+Z)/τ en t = t0."""
    frame = local_frame(line, zero)
    v_s, w_s = frame.u_coefficients()
    G = frame.solution(A, p, E)
    return LaurentData(v=complex(v_s[0]), w=complex(w_s[0]), alpha=complex(G.c[0, 0]),
                       beta=complex(G.c[0, 1]), gamma=complex(G.c[0, 2]), delta=complex(G.c[0, 3]))


def meromorphic_chain_residual(line: TauLine, zero: DivisorZero, A, p: complex, E: complex) -> Dict[str, float]:
    """
    Las tres primeras relaciones que impone (∂t - ∂x² + u)ψ = 0 en un polo simple:

        α q̇ + 2β = 0,  α̇ + αv + 2γ = 0,  β̇ + vβ - γq̇ + αw = 0

    Returns:
        {"first", "second", "third", "max"} normalizados por 1 + |α| + |β| + |γ|
    """
    frame = local_frame(line, zero)
    v_s, w_s = frame.u_coefficients()
    G = frame.solution(A, p, E)
    alpha, beta, gamma = G.column(0), G.column(1), G.column(2)
    qd, v, w = frame.q_dot, v_s[0], w_s[0]
    r1 = alpha[0] * qd + 2 * beta[0]
    r2 = alpha[1] + alpha[0] * v + 2 * gamma[0]
    r3 = beta[1] + v * beta[0] - gamma[0] * qd + alpha[0] * w
    scale = 1.0 + abs(alpha[0]) + abs(beta[0]) + abs(gamma[0])
    out = {"first": float(abs(r1) / scale), "second": float(abs(r2) / scale), "third": float(abs(r3) / scale)}
    out["max"] = max(out.values())
    return out


# --- dinámica de polos ----------------------------------------------------------

@dataclass
class PoleDynamics:
    residual: float
    qdd_implicit: complex
    qdd_fd: complex
    w: complex
    route_gap: float


def track_zero(line: TauLine, q_guess: complex, t: float, scale: float, reach: float) -> complex:
    """
    Sigue un cero hasta el tiempo t partiendo de una predicción.

    Raises:
        TrackingLost: Si Newton no converge o salta a otro cero
    """
    q, ok = newton_zero(line, q_guess, t, scale)
    if not ok or abs(q - q_guess) > 0.25 * reach:
        raise TrackingLost(f"Se perdió el cero cerca de {q_guess} en t={t}")
    return q


def _fd_qddot(line: TauLine, frame: LocalFrame, h: float, reach: float) -> complex:
    q0, t0 = frame.zero.q, frame.zero.t
    qs = {}
    for j in (-2, -1, 1, 2):
        guess = complex(q0 + frame.path(0.0, j * h))
        qs[j] = track_zero(line, guess, t0 + j * h, frame.scale, reach)
    qs[0] = q0
    return (-qs[2] + 16 * qs[1] - 30 * qs[0] + 16 * qs[-1] - qs[-2]) / (12 * h * h)


def pole_dynamics(line: TauLine, zero: DivisorZero, h: Optional[float] = None) -> PoleDynamics:
    """
    Compara q̈ con 2w en un cero simple.

    q̈ se obtiene por dos rutas: diferenciación implícita de τ(q(t), t) = 0
    (serie del marco local) y diferencias finitas de 5 puntos sobre el cero
    seguido con Newton, con extrapolación de Richardson entre h y h/2.

    Raises:
        TrackingLost: Si el cero no se puede seguir en [t - 2h, t + 2h]
        NonSimpleZero: Si el cero no es simple
    """
    frame = local_frame(line, zero)
    _, w_s = frame.u_coefficients()
    w = complex(w_s[0])
    reach = convergence_radius(frame)
    if h is None:
        h = 0.02 * reach / (1.0 + abs(frame.q_dot))
    coarse = _fd_qddot(line, frame, h, reach)
    fine = _fd_qddot(line, frame, h / 2, reach)
    qdd_fd = complex(richardson(coarse, fine, order=4))
    qdd_imp = frame.q_ddot
    norm = 1.0 + abs(2 * w)
    residual = max(abs(qdd_imp - 2 * w), abs(qdd_fd - 2 * w)) / norm
    gap = abs(qdd_imp - qdd_fd) / (1.0 + abs(qdd_imp))
    logger.debug("Dinámica de polos en q=%s: q̈=%s (dif. finitas %s), 2w=%s", zero.q, qdd_imp, qdd_fd, 2 * w)
    return PoleDynamics(residual=float(residual), qdd_implicit=qdd_imp, qdd_fd=qdd_fd, w=w, route_gap=float(gap))


def pole_dynamics_residual(line: TauLine, zero: DivisorZero, h: Optional[float] = None) -> float:
    return pole_dynamics(line, zero, h).residual
