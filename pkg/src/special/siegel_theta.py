"""
Función theta de Riemann sobre el semiespacio de Siegel.

Este módulo evalúa θ(z|B) = Σ_m exp(πi(m,Bm) + 2πi(m,z)), sus derivadas
direccionales, las funciones theta de segundo orden Θ[ε,0] y la
aplicación de Kummer, con un error de truncamiento acotado.

Truncamiento:
    Con πY = TᵀT (Y = Im B) la suma se centra en el entero más cercano a
    c = -Y⁻¹ Im z y recorre un conjunto fijo de desplazamientos k con
    ‖Tk‖ ≤ R + ‖T‖√g/2. El radio R sale de una cota gaussiana de cola
    (función gamma incompleta) y se vuelve a derivar para cada orden de
    derivada. La cota es relativa a la envolvente exp(π yᵀY⁻¹y), que es
    el tamaño natural de θ en z = x + iy.

Ejemplo de uso:
    from src.special.siegel_theta import PeriodMatrix, theta_eval

    B = PeriodMatrix([[1j]])
    theta_eval([0.0], B)  # 1.0864348112...
"""

import itertools
import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from src.config.settings import settings
from src.utils.errors import (
    AllCoordinatesVanish,
    InvalidPeriodMatrix,
    TruncationInsufficient,
)
from src.utils.helpers import neumaier_sum

logger = logging.getLogger(__name__)

HalfCharacteristic = Tuple[float, ...]

_BOX_LIMIT = 2_000_000


def half_characteristics(g: int) -> List[HalfCharacteristic]:
    """
    Enumera las 2^g características ε ∈ {0, 1/2}^g.

    El orden es el conteo binario de 2ε con la primera coordenada
    como dígito más significativo; es el orden de la aplicación de Kummer.
    """
    return [tuple(0.5 * bit for bit in bits) for bits in itertools.product((0, 1), repeat=g)]


def _box_points(gram: np.ndarray, radius: float) -> np.ndarray:
    """Puntos enteros k con kᵀ·gram·k ≤ radius², ordenados por norma y luego lexicográficamente."""
    g = gram.shape[0]
    inv_diag = np.diag(np.linalg.inv(gram))
    bounds = np.floor(radius * np.sqrt(inv_diag) + 1e-9).astype(int)
    box = int(np.prod(2 * bounds + 1))
    if box > _BOX_LIMIT:
        raise TruncationInsufficient(
            f"Caja de enumeración demasiado grande ({box} puntos) para radio {radius:.3f}"
        )
    axes = [np.arange(-b, b + 1) for b in bounds]
    pts = np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, g)
    norms = np.einsum("ki,ij,kj->k", pts, gram, pts)
    keep = norms <= radius * radius * (1 + 1e-12)
    pts, norms = pts[keep], norms[keep]
    keys = [pts[:, i] for i in reversed(range(g))] + [norms]
    order = np.lexsort(keys)
    return pts[order]


class PeriodMatrix:
    """
    Punto del semiespacio de Siegel con datos de truncamiento en caché.

    La matriz se valida al construirse: simetría exacta (se simetriza
    tras comprobar que la asimetría es de redondeo) e Im(B) definida
    positiva. Los objetos son inmutables en la práctica y seguros para
    compartir entre hilos; la caché de desplazamientos usa un candado.

    Attributes:
        B: Matriz g×g compleja (solo lectura)
        g: Género
        Y, Y_inv: Parte imaginaria y su inversa
        T: Factor triangular con πY = TᵀT
        rho: Norma del vector más corto de la red T·Z^g
    """

    def __init__(self, B, symmetry_tol: float = 1e-13):
        arr = np.array(B, dtype=complex)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise InvalidPeriodMatrix(f"B debe ser cuadrada, forma recibida {arr.shape}")
        if not np.all(np.isfinite(arr)):
            i, j = np.argwhere(~np.isfinite(arr))[0]
            raise InvalidPeriodMatrix(f"B[{i},{j}] no es finito")

        asym = np.abs(arr - arr.T)
        i, j = np.unravel_index(np.argmax(asym), asym.shape)
        if asym[i, j] > symmetry_tol * max(1.0, float(np.abs(arr).max())):
            raise InvalidPeriodMatrix(
                f"B no es simétrica: |B[{i},{j}] - B[{j},{i}]| = {asym[i, j]:.3e}"
            )
        arr = 0.5 * (arr + arr.T)

        Y = arr.imag.copy()
        eig = np.linalg.eigvalsh(Y)
        if eig[0] <= 0:
            raise InvalidPeriodMatrix(
                f"Im(B) no es definida positiva (autovalor mínimo {eig[0]:.3e})"
            )

        arr.setflags(write=False)
        self.B = arr
        self.g = arr.shape[0]
        self.Y = Y
        self.Y_inv = np.linalg.inv(Y)
        self.gram = np.pi * Y
        self.T = np.linalg.cholesky(self.gram).T
        self.T_norm = float(np.linalg.norm(self.T, 2))
        self.T_inv_norm = float(np.linalg.norm(np.linalg.inv(self.T), 2))
        self.rho = self._shortest_vector()

        self._offsets: Dict[tuple, np.ndarray] = {}
        self._lock = threading.Lock()
        self._doubled: Optional["PeriodMatrix"] = None

    @classmethod
    def from_config(cls, cfg: Dict) -> "PeriodMatrix":
        """
        Construye la matriz desde {"g": int, "B_re": [[...]], "B_im": [[...]]}.

        Raises:
            InvalidPeriodMatrix: Si las formas no coinciden con g
        """
        g = int(cfg["g"])
        re = np.asarray(cfg["B_re"], dtype=float)
        im = np.asarray(cfg["B_im"], dtype=float)
        for name, part in (("B_re", re), ("B_im", im)):
            if part.shape != (g, g):
                raise InvalidPeriodMatrix(f"{name} debe ser {g}x{g}, forma recibida {part.shape}")
        return cls(re + 1j * im)

    def to_config(self) -> Dict:
        return {"g": self.g, "B_re": self.B.real.tolist(), "B_im": self.B.imag.tolist()}

    def doubled(self) -> "PeriodMatrix":
        """Matriz 2B, usada por las funciones theta de segundo orden."""
        with self._lock:
            if self._doubled is None:
                self._doubled = PeriodMatrix(2.0 * self.B)
            return self._doubled

    def _shortest_vector(self) -> float:
        r0 = math.sqrt(float(np.min(np.diag(self.gram))))
        pts = _box_points(self.gram, r0)
        norms = np.sqrt(np.einsum("ki,ij,kj->k", pts, self.gram, pts))
        nonzero = norms[norms > 0]
        return float(nonzero.min())

    def offsets(self, radius: float, max_terms: int) -> np.ndarray:
        """Desplazamientos k con ‖Tk‖ ≤ radius + ‖T‖√g/2, en orden determinista."""
        key = (round(radius, 9), max_terms)
        with self._lock:
            cached = self._offsets.get(key)
        if cached is not None:
            return cached
        reach = radius + self.T_norm * math.sqrt(self.g) / 2.0
        pts = _box_points(self.gram, reach)
        if len(pts) > max_terms:
            raise TruncationInsufficient(
                f"Se requieren {len(pts)} términos (> max_terms={max_terms}) para radio {radius:.3f}"
            )
        pts.setflags(write=False)
        logger.debug("g=%d: %d desplazamientos para radio %.3f", self.g, len(pts), radius)
        with self._lock:
            self._offsets[key] = pts
        return pts

    def __repr__(self) -> str:
        return f"PeriodMatrix(g={self.g}, B={self.B.tolist()})"


def tail_bound(radius: float, period: PeriodMatrix, order: int = 0, dir_scale: float = 1.0) -> float:
    """
    Cota de la cola gaussiana de la suma theta (y de sus derivadas).

    Args:
        radius: Radio R del elipsoide en la métrica de πY
        period: Matriz de periodos
        order: Orden total N de derivación
        dir_scale: Producto de las normas de las direcciones derivadas

    Returns:
        Cota del error relativo a la envolvente exp(π yᵀY⁻¹y)
    """
    g, rho = period.g, period.rho
    x = (radius - rho / 2.0) ** 2
    total = 0.0
    for i in range(order + 1):
        a = (g + i) / 2.0
        gamma_tail = special.gammaincc(a, x) * special.gamma(a)
        total += (
            math.comb(order, i)
            * period.T_inv_norm ** i
            * (math.sqrt(g) / 2.0) ** (order - i)
            * gamma_tail
        )
    return (2 * math.pi) ** order * dir_scale * (g / 2.0) * (2.0 / rho) ** g * total


@dataclass(frozen=True)
class TruncationPolicy:
    """
    Política de truncamiento de las sumas theta.

    Attributes:
        target_abs_tol: Error objetivo (relativo a la envolvente gaussiana)
        radius: Radio fijo opcional; si es None se deriva de la cota de cola
        max_terms: Máximo de puntos de red por suma
        im_window: |Y⁻¹ Im z| máximo admitido, en unidades de red
    """

    target_abs_tol: float = field(default_factory=lambda: settings.THETA_LAB_TOL)
    radius: Optional[float] = None
    max_terms: int = field(default_factory=lambda: settings.THETA_LAB_MAX_TERMS)
    im_window: float = field(default_factory=lambda: settings.THETA_LAB_IM_WINDOW)

    def __post_init__(self):
        if not self.target_abs_tol > 0:
            raise ValueError("target_abs_tol debe ser positivo")
        if self.radius is not None and self.radius <= 0:
            raise ValueError("radius debe ser positivo")
        if self.max_terms < 1:
            raise ValueError("max_terms debe ser >= 1")

    def radius_for(self, period: PeriodMatrix, order: int = 0, dir_scale: float = 1.0,
                   tol: Optional[float] = None) -> float:
        """
        Radio mínimo cuya cota de cola cumple la tolerancia para el orden dado.

        Raises:
            TruncationInsufficient: Si un radio fijo no alcanza la tolerancia
        """
        tol = self.target_abs_tol if tol is None else tol
        if self.radius is not None:
            bound = tail_bound(self.radius, period, order, dir_scale)
            if bound > tol:
                raise TruncationInsufficient(
                    f"Radio {self.radius} insuficiente para orden {order}: cota {bound:.3e} > {tol:.3e}"
                )
            return self.radius
        lo = (math.sqrt(period.g + 2 * order + math.sqrt(period.g ** 2 + 8 * order)) + period.rho) / 2.0
        hi = lo
        while tail_bound(hi, period, order, dir_scale) > tol:
            hi = 2.0 * hi + 1.0
            if hi > 1e4:
                raise TruncationInsufficient("No se encontró un radio que cumpla la tolerancia")
        if hi == lo:
            return lo
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if tail_bound(mid, period, order, dir_scale) > tol:
                lo = mid
            else:
                hi = mid
        return hi

    def validated(self, period: PeriodMatrix) -> "TruncationPolicy":
        """Devuelve una política con el radio de orden cero fijado para esta matriz."""
        if self.radius is not None:
            self.radius_for(period)
            return self
        return TruncationPolicy(self.target_abs_tol, self.radius_for(period), self.max_terms, self.im_window)


_DEFAULT_POLICY: Optional[TruncationPolicy] = None


def default_policy() -> TruncationPolicy:
    global _DEFAULT_POLICY
    if _DEFAULT_POLICY is None:
        _DEFAULT_POLICY = TruncationPolicy()
    return _DEFAULT_POLICY


def as_period(B) -> PeriodMatrix:
    return B if isinstance(B, PeriodMatrix) else PeriodMatrix(B)


def as_points(z, g: int) -> np.ndarray:
    """Normaliza argumentos a un arreglo (P, g) complejo y finito."""
    arr = np.asarray(z, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.shape[0] == g else arr.reshape(-1, 1)
    if arr.shape[-1] != g:
        raise ValueError(f"El argumento debe tener {g} componentes, forma recibida {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("El argumento de theta tiene entradas no finitas")
    return arr


class _LatticeTerms:
    """Términos exp(πi nBn + 2πi n(z+b)) de la suma y proyecciones n·U, para P puntos."""

    def __init__(self, points: np.ndarray, period: PeriodMatrix, radius: float, pol: TruncationPolicy,
                 a: Optional[np.ndarray] = None, b: Optional[np.ndarray] = None):
        g = period.g
        a = np.zeros(g) if a is None else np.asarray(a, dtype=float)
        b = np.zeros(g) if b is None else np.asarray(b, dtype=float)
        y = points.imag
        lat = y @ period.Y_inv
        reach = float(np.max(np.abs(lat))) if lat.size else 0.0
        if reach > pol.im_window:
            raise TruncationInsufficient(
                f"|Y⁻¹ Im z| = {reach:.2f} fuera de la ventana {pol.im_window} de la política"
            )
        K = period.offsets(radius, pol.max_terms)
        center = np.rint(-lat - a)
        n0 = center + a
        zb = points + b
        B = period.B
        quad0 = np.einsum("pi,ij,pj->p", n0, B, n0)
        cross = 2.0 * (K @ B) @ n0.T
        quadk = np.einsum("ki,ij,kj->k", K, B, K)
        lin0 = np.einsum("pi,pi->p", n0, zb)
        expo = 1j * np.pi * (quad0[None, :] + cross + quadk[:, None]) \
            + 2j * np.pi * (lin0[None, :] + K @ zb.T)
        self.terms = np.exp(expo)
        self._K = K
        self._n0 = n0

    def projection(self, direction: np.ndarray) -> np.ndarray:
        """Matriz (K, P) con 2πi (n·U)."""
        U = np.asarray(direction, dtype=complex)
        return 2j * np.pi * ((self._n0 @ U)[None, :] + (self._K @ U)[:, None])

    def total(self, weights: Optional[np.ndarray] = None) -> np.ndarray:
        vals = self.terms if weights is None else self.terms * weights
        return neumaier_sum(vals, axis=0)


def _dir_scale(directions: Sequence[np.ndarray], orders: Sequence[int]) -> float:
    scale = 1.0
    for U, k in zip(directions, orders):
        scale *= max(float(np.linalg.norm(U)), 1e-300) ** k
    return scale


def _theta_values(points: np.ndarray, period: PeriodMatrix, pol: TruncationPolicy,
                  directions: Sequence[np.ndarray] = (), orders: Sequence[int] = (),
                  a=None, b=None) -> np.ndarray:
    order = int(sum(orders))
    radius = pol.radius_for(period, order, _dir_scale(directions, orders))
    lt = _LatticeTerms(points, period, radius, pol, a, b)
    weights = None
    for U, k in zip(directions, orders):
        if k:
            factor = lt.projection(U) ** k
            weights = factor if weights is None else weights * factor
    return lt.total(weights)


def theta_eval(z, B, pol: Optional[TruncationPolicy] = None) -> complex:
    """
    Evalúa la función theta de Riemann θ(z|B).

    La tolerancia target_abs_tol de la política se mide contra la envolvente
    gaussiana exp(π yᵀY⁻¹y), y = Im z, no en valor absoluto: dentro de la
    ventana el error es ≤ target_abs_tol·exp(π yᵀY⁻¹y). Fuera de la ventana
    im_window (en unidades de la red) se lanza TruncationInsufficient; dentro
    de ella no se compara la cola con la tolerancia absoluta.

    Args:
        z: Vector complejo de longitud g (o escalar si g=1)
        B: PeriodMatrix o matriz compatible
        pol: Política de truncamiento (por defecto la de settings)

    Returns:
        Valor complejo de θ(z|B)

    Raises:
        TruncationInsufficient: Si Im z sale de la ventana im_window o se excede max_terms
        InvalidPeriodMatrix: Si B no está en el semiespacio de Siegel

    Example:
        >>> theta_eval([0.0], PeriodMatrix([[1j]]))
        (1.0864348112133...+0j)
    """
    period = as_period(B)
    pol = pol or default_policy()
    pts = as_points(z, period.g)
    return complex(_theta_values(pts[:1], period, pol)[0])


def theta_batch(zs, B, pol: Optional[TruncationPolicy] = None, threads: Optional[int] = None,
                chunk: int = 256) -> np.ndarray:
    """
    Evalúa θ sobre un arreglo (P, g) de argumentos, en paralelo por bloques.

    El orden de salida coincide con el de entrada y cada bloque usa el
    mismo conjunto de desplazamientos, así que el resultado no depende
    del número de hilos.
    """
    period = as_period(B)
    pol = pol or default_policy()
    pts = as_points(zs, period.g)
    threads = threads or settings.THETA_LAB_THREADS
    blocks = [pts[i:i + chunk] for i in range(0, len(pts), chunk)]
    if threads <= 1 or len(blocks) <= 1:
        parts = [_theta_values(blk, period, pol) for blk in blocks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda blk: _theta_values(blk, period, pol), blocks))
    return np.concatenate(parts) if parts else np.zeros(0, dtype=complex)


def theta_directional(z, B, directions: Sequence, orders: Sequence[int],
                      pol: Optional[TruncationPolicy] = None) -> complex:
    """Derivada mixta ∂_{U1}^{k1}···∂_{Un}^{kn} θ(z), de orden arbitrario, término a término."""
    period = as_period(B)
    pol = pol or default_policy()
    pts = as_points(z, period.g)[:1]
    dirs = [np.asarray(U, dtype=complex).reshape(period.g) for U in directions]
    return complex(_theta_values(pts, period, pol, dirs, list(orders))[0])


@dataclass
class DirectionalJet:
    """
    Derivadas direccionales de θ en un punto.

    Attributes:
        z: Punto de evaluación
        directions: Direcciones (por ejemplo U, V)
        values: Diccionario multi-índice -> valor complejo
    """

    z: np.ndarray
    directions: Tuple[np.ndarray, ...]
    values: Dict[Tuple[int, ...], complex]

    def __getitem__(self, index: Tuple[int, ...]) -> complex:
        return self.values[tuple(index)]

    @property
    def max_order(self) -> int:
        return max(sum(k) for k in self.values)

    def scale(self) -> float:
        """Magnitud de referencia del jet: máximo |valor| sobre todos los órdenes."""
        return max(abs(v) for v in self.values.values())


def _multi_indices(n_dirs: int, max_order: int) -> List[Tuple[int, ...]]:
    idx = [k for k in itertools.product(range(max_order + 1), repeat=n_dirs) if sum(k) <= max_order]
    return sorted(idx, key=lambda k: (sum(k), tuple(-x for x in k)))


def theta_jet(z, B, directions: Sequence, max_order: int,
              pol: Optional[TruncationPolicy] = None) -> DirectionalJet:
    """
    Jet de derivadas direccionales de θ hasta orden total max_order ≤ 4.

    Las derivadas se obtienen derivando la serie término a término bajo
    el truncamiento del orden máximo pedido, de modo que la entrada de
    orden cero coincide con theta_eval en la misma política.

    Args:
        z: Punto de evaluación
        B: Matriz de periodos
        directions: Lista de vectores no nulos
        max_order: Orden total máximo (≤ 4)
        pol: Política de truncamiento

    Returns:
        DirectionalJet con todos los multi-índices de orden ≤ max_order

    Raises:
        ValueError: Si max_order > 4 o alguna dirección es nula
    """
    if max_order > 4 or max_order < 0:
        raise ValueError(f"max_order debe estar en [0, 4] (recibido {max_order})")
    period = as_period(B)
    pol = pol or default_policy()
    pts = as_points(z, period.g)[:1]
    dirs = tuple(np.asarray(U, dtype=complex).reshape(period.g) for U in directions)
    if any(np.linalg.norm(U) == 0 for U in dirs):
        raise ValueError("Las direcciones de derivación deben ser no nulas")

    values: Dict[Tuple[int, ...], complex] = {}
    indices = _multi_indices(len(dirs), max_order)
    # un conjunto de términos por orden total, para que el orden 0 sea theta_eval
    for order in range(max_order + 1):
        group = [k for k in indices if sum(k) == order]
        if not group:
            continue
        scale = max(_dir_scale(dirs, k) for k in group)
        radius = pol.radius_for(period, order, scale)
        lt = _LatticeTerms(pts, period, radius, pol)
        proj = [lt.projection(U) for U in dirs]
        for k in group:
            weights = None
            for p, e in zip(proj, k):
                if e:
                    weights = p ** e if weights is None else weights * p ** e
            values[k] = complex(lt.total(weights)[0])
    return DirectionalJet(z=pts[0].copy(), directions=dirs, values=values)


def theta_jet_uv(z, B, U, V, max_order: int,
                 pol: Optional[TruncationPolicy] = None) -> Dict[Tuple[int, int], complex]:
    """Jet en las direcciones (U, V) indexado por (i, j); si V = 0 sus derivadas valen cero."""
    period = as_period(B)
    V = np.asarray(V, dtype=complex).reshape(period.g)
    if np.linalg.norm(V) == 0:
        jet = theta_jet(z, period, [U], max_order, pol)
        return {(i, j): (jet[(i,)] if j == 0 else 0j)
                for i in range(max_order + 1) for j in range(max_order + 1 - i)}
    return dict(theta_jet(z, period, [U, V], max_order, pol).values)


def theta_taylor_coefficients(z, B, U, V, nu: int, nv: int,
                              pol: Optional[TruncationPolicy] = None) -> np.ndarray:
    """
    Coeficientes de Taylor a[j, i] = ∂_V^j ∂_U^i θ(z) / (i! j!).

    Es la materia prima de los desarrollos locales del divisor; el radio
    de truncamiento se elige para que cada coeficiente (ya dividido por
    los factoriales) cumpla la tolerancia.

    Returns:
        Arreglo (nv+1, nu+1) complejo
    """
    period = as_period(B)
    pol = pol or default_policy()
    pts = as_points(z, period.g)[:1]
    U = np.asarray(U, dtype=complex).reshape(period.g)
    V = np.asarray(V, dtype=complex).reshape(period.g)
    top = max(float(np.linalg.norm(U)), float(np.linalg.norm(V)), 1e-300)
    radius = 0.0
    for n in range(nu + nv + 1):
        i = min(nu, n - n // 2)
        j = n - i
        if j > nv:
            j, i = nv, n - nv
        relief = math.factorial(i) * math.factorial(j)
        radius = max(radius, pol.radius_for(period, n, top ** n, pol.target_abs_tol * relief))
    lt = _LatticeTerms(pts, period, radius, pol)
    pu = lt.projection(U)[:, 0]
    pv = lt.projection(V)[:, 0]
    base = lt.terms[:, 0]
    PU = np.ones((len(base), nu + 1), dtype=complex)
    for i in range(1, nu + 1):
        PU[:, i] = PU[:, i - 1] * pu / i
    PV = np.ones((len(base), nv + 1), dtype=complex)
    for j in range(1, nv + 1):
        PV[:, j] = PV[:, j - 1] * pv / j
    grid = base[:, None, None] * PV[:, :, None] * PU[:, None, :]
    return neumaier_sum(grid, axis=0)


def theta_with_char_general(a: Sequence[float], b: Sequence[float], z, B,
                            pol: Optional[TruncationPolicy] = None) -> complex:
    """θ[a,b](z|B) = Σ_m exp(πi(m+a,B(m+a)) + 2πi(m+a, z+b))."""
    period = as_period(B)
    pol = pol or default_policy()
    pts = as_points(z, period.g)[:1]
    return complex(_theta_values(pts, period, pol, a=np.asarray(a, float), b=np.asarray(b, float))[0])


def theta_with_char(eps: HalfCharacteristic, z, B, pol: Optional[TruncationPolicy] = None) -> complex:
    """
    Theta de segundo orden Θ[ε,0](z) = θ[ε,0](2z | 2B).

    Es par en z y satisface θ(z+w)θ(z-w) = Σ_ε Θ[ε,0](z)Θ[ε,0](w).
    """
    period = as_period(B)
    _check_eps(eps, period.g)
    pts = as_points(z, period.g)[:1]
    return theta_with_char_general(eps, np.zeros(period.g), 2.0 * pts, period.doubled(), pol)


def _check_eps(eps, g: int):
    eps = tuple(float(e) for e in eps)
    if len(eps) != g or any(e not in (0.0, 0.5) for e in eps):
        raise ValueError(f"Característica inválida {eps}: se esperan {g} entradas en {{0, 1/2}}")


def theta_char_derivatives(w, B, directions: Sequence = (), orders: Sequence[int] = (),
                           pol: Optional[TruncationPolicy] = None) -> np.ndarray:
    """
    Vector (sobre ε, en orden de Kummer) de ∂^orders Θ[ε,0](w).

    Por la regla de la cadena cada derivada en w aporta un factor 2.
    """
    period = as_period(B)
    pol = pol or default_policy()
    pts = 2.0 * as_points(w, period.g)[:1]
    doubled = period.doubled()
    dirs = [np.asarray(U, dtype=complex).reshape(period.g) for U in directions]
    factor = 2.0 ** int(sum(orders))
    out = []
    for eps in half_characteristics(period.g):
        val = _theta_values(pts, doubled, pol, dirs, list(orders), a=np.asarray(eps))[0]
        out.append(factor * val)
    return np.array(out, dtype=complex)


def kummer_map(z, B, pol: Optional[TruncationPolicy] = None, vanish_tol: float = 1e-10) -> np.ndarray:
    """
    Aplicación de Kummer z -> (Θ[ε,0](z))_ε como punto proyectivo.

    Se normaliza dividiendo por la primera coordenada no nula en el
    orden de half_characteristics.

    Raises:
        AllCoordinatesVanish: Si todas las coordenadas están bajo vanish_tol
    """
    vals = theta_char_derivatives(z, B, pol=pol)
    mags = np.abs(vals)
    if np.all(mags <= vanish_tol):
        raise AllCoordinatesVanish(
            f"Todas las coordenadas de Kummer son < {vanish_tol:.1e} en z={np.ravel(z).tolist()}"
        )
    first = int(np.argmax(mags > vanish_tol * max(1.0, float(mags.max()))))
    return vals / vals[first]


def quasiperiodicity_residual(z, m: Sequence[int], n: Sequence[int], B,
                              pol: Optional[TruncationPolicy] = None) -> float:
    """
    Residuo de θ(z+m+Bn) = exp(-πi(n,Bn) - 2πi(n,z)) θ(z).

    Normalizado por 1 + |lado derecho|; la identidad es exacta, así que
    el valor acota el error de evaluación.
    """
    period = as_period(B)
    pol = pol or default_policy()
    zz = as_points(z, period.g)[0]
    m = np.asarray(m, dtype=float).reshape(period.g)
    n = np.asarray(n, dtype=float).reshape(period.g)
    lhs = theta_eval(zz + m + period.B @ n, period, pol)
    factor = np.exp(-1j * np.pi * (n @ period.B @ n) - 2j * np.pi * (n @ zz))
    rhs = factor * theta_eval(zz, period, pol)
    return float(abs(lhs - rhs) / (1.0 + abs(rhs)))


def addition_residual(z, w, B, pol: Optional[TruncationPolicy] = None) -> float:
    """Residuo normalizado de θ(z+w)θ(z-w) = Σ_ε Θ[ε,0](z)Θ[ε,0](w)."""
    period = as_period(B)
    pol = pol or default_policy()
    zz = as_points(z, period.g)[0]
    ww = as_points(w, period.g)[0]
    lhs = theta_eval(zz + ww, period, pol) * theta_eval(zz - ww, period, pol)
    rhs = np.sum(theta_char_derivatives(zz, period, pol=pol) * theta_char_derivatives(ww, period, pol=pol))
    return float(abs(lhs - rhs) / (1.0 + abs(lhs)))


def random_period_matrix(g: int, rng: np.random.Generator, im_scale: float = 1.0) -> PeriodMatrix:
    """Matriz de periodos aleatoria bien condicionada (para controles estadísticos)."""
    X = rng.uniform(-0.5, 0.5, size=(g, g))
    A = rng.normal(size=(g, g)) * 0.3
    Y = im_scale * (np.eye(g) + A @ A.T)
    return PeriodMatrix(0.5 * (X + X.T) + 1j * Y)
