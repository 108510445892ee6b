"""
Recursión de la solución de onda formal.

ψ = e^{kx + (k² + b)t}(1 + Σ_s ξ_s k^{-s}) resuelve (∂t - ∂x² + u)ψ = 0
orden a orden si

    2ξ'_{s+1} = ∂tξ_s + (u + b)ξ_s - ξ''_s

La parte global se integra a lo largo de un camino horizontal que evita
los ceros de τ: cada ξ_s es una serie de Taylor en t - t0 cuyos
coeficientes son polinomios de Chebyshev en x. La parte local sigue cada
cero simple en su marco móvil: G_s = ξ·ξ_s, y el coeficiente de ξ¹ de

    H = ξ(∂sG - q̇G' + u_reg G - G'') + q̇G + 2G'

es el residuo que obstruye la continuación meromorfa de ξ_{s+1}.

Ejemplo de uso:
    line = TauLine(B=PeriodMatrix([[1j]]), U=[1.0], V=[0.3], Z=[0.0],
                   window=(-0.05 - 0.05j, 0.95 + 0.95j))
    series = wave_recursion(line, S=4)
    print(residue_obstruction(series, series.zeros[0], 3))
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from numpy.polynomial import chebyshev as C

from src.config.settings import settings
from src.divisor.series import BiSeries
from src.divisor.tau_divisor import DivisorZero, LocalFrame, TauLine, convergence_radius, find_zeros
from src.special.siegel_theta import theta_taylor_coefficients
from src.utils.errors import ConfigInvalid, NonSimpleZero, ResidueObstruction

logger = logging.getLogger(__name__)

OBSTRUCTION_TOL = 1e-7
MAX_ORDER = 8


# --- potencial sobre el camino ----------------------------------------------------

class ChebyshevPath:
    """Camino x = x0 + L(1 + σ)/2, σ ∈ [-1, 1], con n nodos de Chebyshev de primera especie."""

    def __init__(self, x0: complex, length: float, n_nodes: int):
        if length <= 0 or n_nodes < 8:
            raise ConfigInvalid(f"Camino inválido: longitud {length}, {n_nodes} nodos")
        self.x0, self.length, self.n = complex(x0), float(length), int(n_nodes)
        k = np.arange(self.n)
        self.sigma = np.cos(np.pi * (k + 0.5) / self.n)
        self.x = self.x0 + self.length * (1.0 + self.sigma) / 2.0
        j = np.arange(self.n)[:, None]
        self._forward = (2.0 / self.n) * np.cos(np.pi * j * (k[None, :] + 0.5) / self.n)
        self._forward[0] *= 0.5
        self._vander = C.chebvander(self.sigma, self.n - 1)

    def local(self, x) -> np.ndarray:
        return 2.0 * (np.asarray(x, dtype=complex) - self.x0) / self.length - 1.0

    def coeffs(self, values: np.ndarray) -> np.ndarray:
        return self._forward @ values

    def values(self, coeffs: np.ndarray) -> np.ndarray:
        return self._vander @ coeffs

    def deriv(self, coeffs: np.ndarray, m: int = 1) -> np.ndarray:
        out = np.zeros(self.n, dtype=complex)
        d = C.chebder(coeffs, m, scl=2.0 / self.length)
        out[:len(d)] = d
        return out

    def integral(self, coeffs: np.ndarray) -> np.ndarray:
        """Primitiva que se anula en x0."""
        return C.chebint(coeffs, 1, lbnd=-1, scl=self.length / 2.0)[: self.n]

    def mean(self, coeffs: np.ndarray, period: float = 1.0) -> complex:
        """Promedio sobre [x0, x0 + period]."""
        prim = self.integral(coeffs)
        return complex(C.chebval(self.local(self.x0 + period), prim) / period)


def potential_jet(line: TauLine, x: complex, t0: float, ns: int) -> np.ndarray:
    """u_j(x) = -4·[ln τ]_{j,2}, j = 0..ns, desde los coeficientes de Taylor de τ en (x, t0)."""
    a = theta_taylor_coefficients(line.point(x, t0), line.B, line.U, line.V, 2, ns, line.pol)
    return -4.0 * BiSeries(a, ns, 2).log().column(2)


@dataclass
class PotentialStrip:
    """
    u(x, t0 + s) = Σ_j u_j(x) s^j en los nodos de un camino.

    Attributes:
        path: Camino de Chebyshev
        values: values[j, k] = u_j(x_k)
        t0: Tiempo base
    """

    path: ChebyshevPath
    values: np.ndarray
    t0: float = 0.0

    @property
    def orders(self) -> int:
        return self.values.shape[0] - 1

    @classmethod
    def from_line(cls, line: TauLine, t0: float, ns: int, path: ChebyshevPath) -> "PotentialStrip":
        """u_j(x_k) = -4·[ln τ]_{j,2} a partir de los coeficientes de Taylor de τ en cada nodo."""
        values = np.zeros((ns + 1, path.n), dtype=complex)
        for k, x in enumerate(path.x):
            values[:, k] = potential_jet(line, x, t0, ns)
        return cls(path=path, values=values, t0=t0)

    @classmethod
    def constant(cls, value: complex, ns: int, path: ChebyshevPath, t0: float = 0.0) -> "PotentialStrip":
        values = np.zeros((ns + 1, path.n), dtype=complex)
        values[0] = value
        return cls(path=path, values=values, t0=t0)


# --- tablas locales ----------------------------------------------------------------

@dataclass
class LocalWave:
    """
    Tablas de Laurent de ξ_s en el marco de un cero simple.

    Attributes:
        zero: El cero seguido
        G: G[s] = ξ·ξ_s como BiSeries en (ξ, s)
        obstructions: obstructions[s] = coeficiente de ξ¹ de H(G_s) en s = 0
        q_dot, q_ddot, v, w: Datos del cero en t0
    """

    zero: DivisorZero
    G: List[BiSeries] = field(default_factory=list)
    obstructions: List[complex] = field(default_factory=list)
    q_dot: complex = 0j
    q_ddot: complex = 0j
    v: complex = 0j
    w: complex = 0j

    def r(self, s: int) -> complex:
        return complex(self.G[s].c[0, 0])


def _shift_x(f: BiSeries) -> BiSeries:
    """ξ·f sin perder la última columna."""
    out = np.zeros((f.ns + 1, f.nx + 2), dtype=complex)
    out[:, 1:] = f.c
    return BiSeries(out)


class _LocalRecursion:
    def __init__(self, line: TauLine, zero: DivisorZero, S: int, b: complex):
        self.frame = LocalFrame(line, zero, ns=S + 2, nx=S + 6)
        self.u = self.frame.u_regular() + b
        ns, nx = self.u.ns, self.u.nx
        self.qdot = BiSeries(self.frame.path.deriv("s").c, ns - 1, nx)
        v_s, w_s = self.frame.u_coefficients()
        self.state = LocalWave(zero=zero, q_dot=self.frame.q_dot, q_ddot=self.frame.q_ddot,
                               v=complex(v_s[0] + b), w=complex(w_s[0]))
        self.state.G.append(BiSeries.variable("x", ns, nx))

    def H(self, G: BiSeries) -> BiSeries:
        Gx = G.deriv("x")
        inner = G.deriv("s") - self.qdot * Gx + self.u * G - Gx.deriv("x")
        return _shift_x(inner) + self.qdot * G + 2 * Gx

    def obstruction(self, s: int) -> complex:
        H = self.H(self.state.G[s])
        value = complex(H.c[0, 1])
        if len(self.state.obstructions) == s:
            self.state.obstructions.append(value)
        self._last_H = H
        return value

    def advance(self):
        """G_{s+1} = ½(-H_0 + Σ_{j≥2} H_j ξ^j/(j-1)) con constante local nula."""
        H = self._last_H
        out = np.zeros_like(H.c)
        out[:, 0] = -0.5 * H.c[:, 0]
        for j in range(2, H.nx + 1):
            out[:, j] = 0.5 * H.c[:, j] / (j - 1)
        self.state.G.append(BiSeries(out))


# --- serie global ------------------------------------------------------------------

@dataclass
class WaveSeries:
    """
    Solución de onda formal hasta el orden `order`.

    Attributes:
        order: Último ξ_s calculado
        coeffs: coeffs[s][j] = coeficientes de Chebyshev de [ξ_s]_j(x)
        c: c[s][j] = coeficientes de Taylor en t - t0 de la constante c_s(t)
        b: Constante del exponente
        periodic: Si se fijó la normalización periódica
        local: Tablas de Laurent por cero seguido
        halted_at: Orden en que una obstrucción detuvo la recursión (o None)
    """

    order: int
    coeffs: List[np.ndarray]
    c: List[np.ndarray]
    b: complex
    periodic: bool
    strip: PotentialStrip
    local: List[LocalWave] = field(default_factory=list)
    halted_at: Optional[int] = None
    deviations: List[str] = field(default_factory=list)

    @property
    def t0(self) -> float:
        return self.strip.t0

    @property
    def zeros(self) -> List[DivisorZero]:
        return [entry.zero for entry in self.local]

    def _taylor(self, s: int, x, t: float, m: int = 0) -> complex:
        path = self.strip.path
        arr = self.coeffs[s]
        dt = t - self.t0
        total = 0j
        for j in range(arr.shape[0]):
            row = path.deriv(arr[j], m) if m else arr[j]
            total += dt ** j * C.chebval(path.local(x), row)
        return complex(total)

    def __call__(self, s: int, x, t: Optional[float] = None) -> complex:
        return self._taylor(s, x, self.t0 if t is None else t)

    def derivative(self, s: int, x, t: Optional[float] = None, m: int = 1) -> complex:
        return self._taylor(s, x, self.t0 if t is None else t, m)

    def periodicity_defect(self, s: int, samples: int = 16) -> float:
        """max_{j, x} |[ξ_s]_j(x + 1) - [ξ_s]_j(x)| sobre x ∈ [x0, x0 + L - 1]."""
        path = self.strip.path
        if path.length < 2.0:
            raise ConfigInvalid("El camino debe medir al menos 2 para comparar un periodo")
        xs = path.x0 + np.linspace(0.0, path.length - 1.0, samples)
        worst = 0.0
        for row in self.coeffs[s]:
            jump = C.chebval(path.local(xs + 1.0), row) - C.chebval(path.local(xs), row)
            worst = max(worst, float(np.max(np.abs(jump))))
        return worst

    def local_for(self, zero: DivisorZero) -> LocalWave:
        for entry in self.local:
            if abs(entry.zero.q - zero.q) <= 1e-9 * (1.0 + abs(zero.q)):
                return entry
        raise KeyError(f"El cero {zero.q} no está entre los seguidos")


def _choose_level(line: TauLine, zeros: List[DivisorZero]) -> float:
    lo, hi = line.window
    levels = sorted([lo.imag, hi.imag] + [z.q.imag for z in zeros if lo.imag < z.q.imag < hi.imag])
    gaps = [(b - a, 0.5 * (a + b)) for a, b in zip(levels[:-1], levels[1:])]
    return max(gaps)[1]


def _periodic_constants(path: ChebyshevPath, xi0: np.ndarray, strip_vals: np.ndarray, b: complex) -> np.ndarray:
    """Resuelve ċ + Bc + F = 0, c(t0) = 0, en coeficientes de Taylor."""
    J = xi0.shape[0]
    vals = np.array([path.values(row) for row in xi0])
    mean_xi = np.array([path.mean(row) for row in xi0])
    Bc = np.array([path.mean(path.coeffs(strip_vals[i])) for i in range(J)])
    Bc[0] += b
    F = np.zeros(J, dtype=complex)
    for j in range(J):
        prod = sum(strip_vals[i] * vals[j - i] for i in range(j + 1)) + b * vals[j]
        F[j] = path.mean(path.coeffs(prod)) + ((j + 1) * mean_xi[j + 1] if j + 1 < J else 0.0)
    c = np.zeros(J, dtype=complex)
    for j in range(J - 1):
        c[j + 1] = -(sum(Bc[i] * c[j - i] for i in range(j + 1)) + F[j]) / (j + 1)
    return c


def _global_step(path: ChebyshevPath, xi: np.ndarray, strip_vals: np.ndarray, b: complex) -> np.ndarray:
    """a_{s+1,j} = ½∫[(j+1)a_{s,j+1} + Σ_i u_i a_{s,j-i} + b a_{s,j} - a''_{s,j}]."""
    J = xi.shape[0]
    vals = np.array([path.values(row) for row in xi])
    out = np.zeros((J - 1, path.n), dtype=complex)
    for j in range(J - 1):
        prod = sum(strip_vals[i] * vals[j - i] for i in range(j + 1)) + b * vals[j]
        rhs = (j + 1) * xi[j + 1] + path.coeffs(prod) - path.deriv(xi[j], 2)
        out[j] = 0.5 * path.integral(rhs)
    return out


def wave_recursion(line: Optional[TauLine], S: int, periodic: bool = False, t0: float = 0.0,
                   strip: Optional[PotentialStrip] = None, x0: Optional[complex] = None,
                   length: Optional[float] = None, n_nodes: int = 128, b: Optional[complex] = None,
                   strict: bool = False, threads: Optional[int] = None) -> WaveSeries:
    """
    Calcula ξ_1..ξ_S y sus tablas locales en los ceros de la ventana.

    Args:
        line: Recta τ (None solo si se da un strip explícito, sin ceros que seguir)
        S: Orden máximo (≤ 8)
        periodic: Fija c_s(t) para que ξ_s sea 1-periódica (requiere U entero)
        t0: Tiempo base de los desarrollos de Taylor
        strip: Potencial ya muestreado (por ejemplo u ≡ 0)
        x0, length: Camino de integración; por defecto el borde izquierdo de la
            ventana a la altura más alejada de los ceros
        b: Constante del exponente; en modo periódico por defecto -⟨u⟩
        strict: Lanza ResidueObstruction en lugar de detenerse y reportar

    Raises:
        NonSimpleZero: Si algún cero de la ventana no es simple
        ResidueObstruction: Con strict=True, si un residuo no se anula
        ConfigInvalid: Si el modo periódico no tiene U entero
    """
    if not 1 <= S <= MAX_ORDER:
        raise ConfigInvalid(f"S debe estar en [1, {MAX_ORDER}] (recibido {S})")
    ns = S + 1
    zeros: List[DivisorZero] = []
    if line is not None:
        if periodic and np.max(np.abs(line.U - np.round(line.U.real))) > 1e-12:
            raise ConfigInvalid(f"El modo periódico requiere U entero (U = {line.U.tolist()})")
        zeros = find_zeros(line, t0)
        bad = [z for z in zeros if not z.simple]
        if bad:
            raise NonSimpleZero(f"Cero no simple en q = {bad[0].q}")
    if strip is None:
        if line is None:
            raise ConfigInvalid("Se necesita una recta o un potencial muestreado")
        lo, hi = line.window
        start = complex(lo.real if x0 is None else complex(x0).real,
                        _choose_level(line, zeros) if x0 is None else complex(x0).imag)
        span = length or (2.0 if periodic else hi.real - lo.real)
        path = ChebyshevPath(start, span, n_nodes)
        strip = PotentialStrip.from_line(line, t0, ns, path)
    if strip.orders < ns:
        raise ConfigInvalid(f"El potencial necesita {ns} órdenes en t (tiene {strip.orders})")
    path = strip.path
    u = strip.values
    if b is None:
        b = -path.mean(path.coeffs(u[0])) if periodic else 0j
        if periodic:
            drift = max(abs(path.mean(path.coeffs(u[j]))) for j in range(1, u.shape[0]))
            if drift > 1e-10:
                logger.warning("⟨u⟩ depende de t (%.2e): b no anula todos los órdenes", drift)
            logger.info("b = -⟨u⟩ = %s", b)

    series = WaveSeries(order=0, coeffs=[], c=[], b=complex(b), periodic=periodic, strip=strip)
    xi = np.zeros((ns + 1, path.n), dtype=complex)
    xi[0, 0] = 1.0
    series.coeffs.append(xi)
    series.c.append(np.zeros(ns + 1, dtype=complex))

    threads = threads or settings.THETA_LAB_THREADS
    make = lambda z: _LocalRecursion(line, z, S, b)
    if threads > 1 and len(zeros) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            locals_ = list(pool.map(make, zeros))
    else:
        locals_ = [make(z) for z in zeros]
    series.local = [rec.state for rec in locals_]

    for s in range(S + 1):
        blocked = []
        for rec in locals_:
            value = rec.obstruction(s)
            scale = 1.0 + abs(rec.state.r(s)) + abs(complex(rec.state.G[s].c[0, 1]))
            if abs(value) > OBSTRUCTION_TOL * scale:
                blocked.append((rec.state.zero.q, value))
        if blocked and s < S:
            q, value = blocked[0]
            msg = f"Residuo no nulo {abs(value):.2e} en q = {q} al pasar al orden {s + 1}"
            if strict:
                raise ResidueObstruction(msg, order=s, value=value)
            logger.warning(msg)
            series.deviations.append(msg)
            series.halted_at = s
            break
        if s == S:
            break
        nxt = _global_step(path, series.coeffs[s], u, b)
        consts = np.zeros(nxt.shape[0], dtype=complex)
        if periodic:
            consts = _periodic_constants(path, nxt, u, b)
            nxt[:, 0] += consts
        series.coeffs.append(nxt)
        series.c.append(consts)
        series.order = s + 1
        for rec in locals_:
            rec.advance()
    logger.debug("wave_recursion: orden %d, %d ceros seguidos", series.order, len(zeros))
    return series


def residue_obstruction(series: WaveSeries, zero: DivisorZero, s: int) -> complex:
    """
    Coeficiente ṙ_s + v r_s + 2r_{s1} en el cero: se anula si y solo si
    ξ_{s+1} continúa de forma meromorfa a través del cero.
    """
    entry = series.local_for(zero)
    if s >= len(entry.obstructions):
        raise ValueError(f"Orden {s} no calculado (hasta {len(entry.obstructions) - 1})")
    return entry.obstructions[s]


def obstruction_propagation_gap(series: WaveSeries, zero: DivisorZero, s: int) -> float:
    """
    |O_{s+1} + ½[r_s(q̈ - 2w) + q̇ O_s]|, normalizado.

    Es la identidad que transmite la dinámica de polos de un orden al siguiente.
    """
    entry = series.local_for(zero)
    if s + 1 >= len(entry.obstructions):
        raise ValueError(f"Orden {s + 1} no calculado")
    defect = entry.q_ddot - 2 * entry.w
    predicted = -0.5 * (entry.r(s) * defect + entry.q_dot * entry.obstructions[s])
    actual = entry.obstructions[s + 1]
    scale = 1.0 + abs(actual) + abs(entry.r(s) * defect) + abs(entry.q_dot * entry.obstructions[s])
    return float(abs(actual - predicted) / scale)


def lax_coefficients(series: WaveSeries, x, t: Optional[float] = None) -> Dict[str, complex]:
    """
    Coeficientes de L2 = ∂² - u y L3 = ∂³ - (3/2)u∂ - w3 desde ξ1, ξ2:

        u = 2ξ1',  w3 = 3ξ2' + 3ξ1'' - (3/2)uξ1
    """
    if series.order < 2:
        raise ValueError("Se necesitan ξ1 y ξ2")
    d1 = series.derivative(1, x, t)
    u = 2.0 * d1
    w3 = 3.0 * series.derivative(2, x, t) + 3.0 * series.derivative(1, x, t, 2) - 1.5 * u * series(1, x, t)
    return {"u": u, "w3": w3}


# --- cuadratura por paneles -------------------------------------------------------

@dataclass
class PoleTerm:
    """
    Cero simple de τ visto desde u: u = 2/(x - q)² + u_reg(x).

    Attributes:
        q: Posición del cero en t0
        taylor: Coeficientes de Taylor de u - 2/(x - q)² en x - q
        reach: Radio donde se usa la serie en lugar de evaluar u directamente
    """

    q: complex
    taylor: np.ndarray
    reach: float

    @classmethod
    def from_zero(cls, line: TauLine, zero: DivisorZero, nx: int = 16) -> "PoleTerm":
        frame = LocalFrame(line, zero, ns=1, nx=nx)
        taylor = np.asarray(frame.u_regular().c[0], dtype=complex)
        return cls(q=complex(zero.q), taylor=taylor, reach=0.1 * convergence_radius(frame))

    def singular(self, x) -> complex:
        return 2.0 / (x - self.q) ** 2

    def primitive(self, a: complex, b: complex) -> complex:
        """∫_a^b 2/(x - q)² dx; sin término 1/(x - q) no depende de la ruta."""
        return 2.0 / (a - self.q) - 2.0 / (b - self.q)


def _breakpoints(a: complex, b: complex, poles: List[PoleTerm], panel: float) -> np.ndarray:
    """Parámetros en [0, 1] que cortan el tramo a→b: proyecciones de los polos y paneles de largo ≤ panel."""
    d = b - a
    cuts = {0.0, 1.0}
    for pole in poles:
        lam = ((pole.q - a) * d.conjugate()).real / abs(d) ** 2
        if 0.0 < lam < 1.0:
            cuts.add(float(lam))
    cuts = sorted(cuts)
    out = [0.0]
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        pieces = max(1, int(np.ceil((hi - lo) * abs(d) / panel)))
        out.extend(np.linspace(lo, hi, pieces + 1)[1:].tolist())
    return np.asarray(out)


def panel_integral(line: TauLine, route, t0: float = 0.0, b: complex = 0j,
                   poles: Optional[List[PoleTerm]] = None, n_gauss: int = 16, panel: float = 0.1) -> complex:
    """
    ∫(u + b) dx a lo largo de una poligonal, con Gauss-Legendre por paneles.

    La parte singular 2/(x - q)² de cada cero seguido se integra en forma
    cerrada; el resto es regular y se integra por paneles cortados en la
    proyección de cada polo sobre el tramo. Cerca de un polo la parte regular
    sale de la serie de Taylor del marco local.

    Args:
        line: Recta τ
        route: Vértices de la poligonal
        t0: Tiempo
        b: Constante que se suma a u
        poles: Ceros seguidos; por defecto los de la ventana en t0
        n_gauss: Nodos de Gauss por panel
        panel: Largo máximo de un panel

    Raises:
        ConfigInvalid: Si la ruta tiene menos de dos vértices o pasa por un cero
        NonSimpleZero: Si algún cero de la ventana no es simple
    """
    route = [complex(v) for v in route]
    if len(route) < 2:
        raise ConfigInvalid("La ruta necesita al menos dos vértices")
    if poles is None:
        zeros = find_zeros(line, t0)
        bad = [z for z in zeros if not z.simple]
        if bad:
            raise NonSimpleZero(f"Cero no simple en q = {bad[0].q}")
        poles = [PoleTerm.from_zero(line, z) for z in zeros]
    nodes, weights = np.polynomial.legendre.leggauss(n_gauss)

    def regular(x: complex) -> complex:
        near = min(poles, key=lambda p: abs(x - p.q), default=None)
        if near is not None and abs(x - near.q) < near.reach:
            value = np.polynomial.polynomial.polyval(x - near.q, near.taylor)
            return complex(value - sum(p.singular(x) for p in poles if p is not near))
        return complex(potential_jet(line, x, t0, 1)[0] - sum(p.singular(x) for p in poles))

    total = 0j
    for a, c in zip(route[:-1], route[1:]):
        for pole in poles:
            if abs(pole.q - a) + abs(c - pole.q) - abs(c - a) <= 1e-12 * (1.0 + abs(c - a)):
                raise ConfigInvalid(f"La ruta pasa por el cero q = {pole.q}")
        cuts = a + (c - a) * _breakpoints(a, c, poles, panel)
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
            total += half * sum(w * regular(mid + half * nu) for nu, w in zip(nodes, weights))
        total += sum(p.primitive(a, c) for p in poles) + b * (c - a)
    return complex(total)


def xi1_along(series: WaveSeries, line: TauLine, route) -> complex:
    """
    ξ1 al final de una ruta que sale del inicio del camino de la recursión.

    2ξ1' = u + b, así que ξ1(x) = ξ1(x0) + ½∫(u + b); el resultado debe
    coincidir con series(1, x) para cualquier ruta que no rodee polos
    con residuo.
    """
    route = [complex(v) for v in route]
    start = series.strip.path.x0
    if abs(route[0] - start) > 1e-12 * (1.0 + abs(start)):
        raise ConfigInvalid(f"La ruta debe empezar en x0 = {start}")
    poles = [PoleTerm.from_zero(line, z) for z in series.zeros]
    return series(1, start) + 0.5 * panel_integral(line, route, series.t0, series.b, poles)
