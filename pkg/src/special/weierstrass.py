"""
Funciones elípticas de Weierstrass y núcleo de Lamé.

Implementa σ, ζ, ℘, ℘′ por series q rápidamente convergentes de la
theta de Jacobi θ1, sobre una base reducida de la red (reducción de
Gauss de ω2/ω1), y los reescribe para la base del usuario mediante las
relaciones de cuasi-periodicidad:

    σ(x + 2w) = (-1)^{m+n+mn} exp(2η_w (x + w)) σ(x),   w = mω1 + nω2
    ζ(x + 2w) = ζ(x) + 2η_w
    ℘(x + 2w) = ℘(x)

Todas las funciones aceptan escalares o arreglos de numpy.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from src.config.settings import settings
from src.utils.errors import InvalidLattice, NearSingularInput, PoleAtLatticePoint
from src.utils.helpers import second_derivative_5pt

logger = logging.getLogger(__name__)

_N_TERMS = 24
_LEGENDRE_TOL = 1e-12


def _reduce_basis(w1: complex, w2: complex) -> Tuple[complex, complex, np.ndarray]:
    """
    Reducción de Gauss conservando la orientación.

    Returns:
        (r1, r2, M) con [r1, r2] = M @ [w1, w2] y |Re(r2/r1)| ≤ 1/2, |r2/r1| ≥ 1
    """
    M = np.eye(2, dtype=int)
    r1, r2 = w1, w2
    for _ in range(100):
        tau = r2 / r1
        shift = int(round(tau.real))
        if shift:
            r2 = r2 - shift * r1
            M[1] -= shift * M[0]
        if abs(r2 / r1) < 1.0 - 1e-14:
            r1, r2 = r2, -r1
            M = np.array([M[1], -M[0]])
        else:
            break
    return r1, r2, M


class EllipticLattice:
    """
    Red 2ω1Z + 2ω2Z con las constantes de cuasi-periodicidad precalculadas.

    Attributes:
        omega1, omega2: Semiperiodos de la base del usuario
        eta1, eta2: ζ(ω1), ζ(ω2)
        tau_modulus: ω2/ω1
        guard: Radio de guarda absoluto cerca de los puntos de la red
        legendre_residual: |η1ω2 - η2ω1 - πi/2|, a lo sumo 1e-12

    Raises:
        InvalidLattice: Si Im(ω2/ω1) <= 0 o falla la relación de Legendre
    """

    def __init__(self, omega1, omega2, guard: Optional[float] = None):
        w1, w2 = complex(omega1), complex(omega2)
        if not (np.isfinite(w1) and np.isfinite(w2)) or w1 == 0:
            raise InvalidLattice(f"Semiperiodos no válidos: ω1={w1}, ω2={w2}")
        tau = w2 / w1
        if tau.imag <= 0:
            raise InvalidLattice(f"Im(ω2/ω1) = {tau.imag:.3e} debe ser positivo")

        self.omega1, self.omega2 = w1, w2
        self.tau_modulus = tau
        self.guard = (settings.THETA_LAB_GUARD if guard is None else guard) * abs(w1)

        r1, r2, M = _reduce_basis(w1, w2)
        self._r1, self._r2, self._M = r1, r2, M
        self._tau = r2 / r1
        self._scale = math.pi / (2.0 * r1)
        n = np.arange(_N_TERMS)
        self._k = 2 * n + 1
        self._a = 2.0 * (-1.0) ** n * np.exp(1j * math.pi * self._tau * (n + 0.5) ** 2)
        d1 = np.sum(self._a * self._k)
        d3 = -np.sum(self._a * self._k ** 3)
        self._theta1_prime0 = d1
        self._eta_r1 = -(math.pi ** 2) / (12.0 * r1) * d3 / d1
        self._eta_r2 = (self._eta_r1 * r2 - 0.5j * math.pi) / r1
        self._basis = np.array([[2 * r1.real, 2 * r2.real], [2 * r1.imag, 2 * r2.imag]])

        self.eta1 = complex(self.zeta(w1))
        self.eta2 = complex(self.zeta(w2))
        self.legendre_residual = abs(self.eta1 * w2 - self.eta2 * w1 - 0.5j * math.pi)
        if self.legendre_residual > _LEGENDRE_TOL:
            raise InvalidLattice(
                f"Relación de Legendre violada: residuo {self.legendre_residual:.3e}"
            )
        logger.debug("Red τ=%s reducida a τ'=%s", tau, self._tau)

    @classmethod
    def from_config(cls, cfg: Dict) -> "EllipticLattice":
        """Construye la red desde {"omega1": [re, im], "omega2": [re, im]}."""
        try:
            w1 = complex(*cfg["omega1"])
            w2 = complex(*cfg["omega2"])
        except (KeyError, TypeError) as exc:
            raise InvalidLattice(f"Configuración de red incompleta: {exc}") from exc
        return cls(w1, w2)

    def to_config(self) -> Dict:
        return {"omega1": [self.omega1.real, self.omega1.imag],
                "omega2": [self.omega2.real, self.omega2.imag]}

    def half_period(self, alpha: int) -> complex:
        if alpha == 1:
            return self.omega1
        if alpha == 2:
            return self.omega2
        raise ValueError(f"alpha debe ser 1 o 2 (recibido {alpha})")

    def eta(self, alpha: int) -> complex:
        self.half_period(alpha)
        return self.eta1 if alpha == 1 else self.eta2

    # --- reducción de argumentos -------------------------------------------

    def reduce(self, x) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """
        Escribe x = x0 + 2w con x0 en el paralelogramo centrado de la base reducida.

        Returns:
            (x0, w, η_w, paridad de m+n+mn)
        """
        x = np.asarray(x, dtype=complex)
        ab = np.linalg.solve(self._basis, np.stack([x.real.ravel(), x.imag.ravel()]))
        m = np.rint(ab[0]).reshape(x.shape)
        n = np.rint(ab[1]).reshape(x.shape)
        w = m * self._r1 + n * self._r2
        eta_w = m * self._eta_r1 + n * self._eta_r2
        parity = (m + n + m * n) % 2
        return x - 2.0 * w, w, eta_w, parity

    def lattice_distance(self, x) -> np.ndarray:
        """Distancia de x al punto más cercano de la red."""
        x0 = self.reduce(x)[0]
        corners = 2.0 * np.array([0, self._r1, -self._r1, self._r2, -self._r2,
                                  self._r1 + self._r2, -self._r1 - self._r2,
                                  self._r1 - self._r2, self._r2 - self._r1])
        return np.min(np.abs(x0[..., None] - corners), axis=-1)

    def _check_pole(self, x, name: str):
        dist = self.lattice_distance(x)
        if np.any(dist < self.guard):
            raise PoleAtLatticePoint(
                f"{name}: argumento a distancia {float(np.min(dist)):.3e} de la red (guarda {self.guard:.1e})"
            )

    # --- series de θ1 en el paralelogramo reducido ----------------------------

    def _theta1(self, x0: np.ndarray, order: int):
        v = self._scale * x0
        kv = v[..., None] * self._k
        s, c = np.sin(kv), np.cos(kv)
        out = [np.sum(self._a * s, axis=-1)]
        if order >= 1:
            out.append(np.sum(self._a * self._k * c, axis=-1))
        if order >= 2:
            out.append(-np.sum(self._a * self._k ** 2 * s, axis=-1))
        if order >= 3:
            out.append(-np.sum(self._a * self._k ** 3 * c, axis=-1))
        return out

    def sigma(self, x):
        x = np.asarray(x, dtype=complex)
        x0, w, eta_w, parity = self.reduce(x)
        th = self._theta1(x0, 0)[0]
        base = np.exp(self._eta_r1 * x0 ** 2 / (2.0 * self._r1)) * th / (self._scale * self._theta1_prime0)
        sign = np.where(parity == 1, -1.0, 1.0)
        return _out(sign * np.exp(2.0 * eta_w * (x0 + w)) * base)

    def zeta(self, x):
        x = np.asarray(x, dtype=complex)
        self._check_pole(x, "zeta")
        x0, _, eta_w, _ = self.reduce(x)
        th, th1 = self._theta1(x0, 1)
        return _out(self._eta_r1 * x0 / self._r1 + self._scale * th1 / th + 2.0 * eta_w)

    def wp(self, x):
        x = np.asarray(x, dtype=complex)
        self._check_pole(x, "wp")
        x0 = self.reduce(x)[0]
        th, th1, th2 = self._theta1(x0, 2)
        l1 = th1 / th
        return _out(-self._eta_r1 / self._r1 - self._scale ** 2 * (th2 / th - l1 ** 2))

    def wp_prime(self, x):
        x = np.asarray(x, dtype=complex)
        self._check_pole(x, "wp_prime")
        x0 = self.reduce(x)[0]
        th, th1, th2, th3 = self._theta1(x0, 3)
        l1 = th1 / th
        return _out(-self._scale ** 3 * (th3 / th - 3.0 * th2 * l1 / th + 2.0 * l1 ** 3))

    def __repr__(self) -> str:
        return f"EllipticLattice(omega1={self.omega1}, omega2={self.omega2})"


def _out(arr: np.ndarray):
    return complex(arr) if np.ndim(arr) == 0 else arr


# --- interfaz funcional -------------------------------------------------------

def sigma(x, lat: EllipticLattice):
    """σ(x): entera, impar, con ceros simples en la red y σ(x)/x -> 1."""
    return lat.sigma(x)


def zeta_w(x, lat: EllipticLattice):
    """ζ(x) = σ′/σ; polo simple de residuo 1 en la red."""
    return lat.zeta(x)


def wp(x, lat: EllipticLattice):
    """℘(x) = -ζ′(x); par, doblemente periódica, polo doble 1/x²."""
    return lat.wp(x)


def wp_prime(x, lat: EllipticLattice):
    return lat.wp_prime(x)


def invariants(lat: EllipticLattice) -> Tuple[complex, complex]:
    """
    Invariantes (g2, g3) por series de Lambert en q² = exp(2πiτ).

    g2 = (4/3)(π/2ω)^4 (1 + 240 Σ σ3(n) q^{2n})
    g3 = (8/27)(π/2ω)^6 (1 - 504 Σ σ5(n) q^{2n})
    """
    q2 = np.exp(2j * math.pi * lat._tau)
    n = np.arange(1, 60)
    qn = q2 ** n
    e4 = 1.0 + 240.0 * np.sum(n ** 3 * qn / (1.0 - qn))
    e6 = 1.0 - 504.0 * np.sum(n ** 5 * qn / (1.0 - qn))
    s = lat._scale
    return complex(4.0 / 3.0 * s ** 4 * e4), complex(8.0 / 27.0 * s ** 6 * e6)


def half_period_values(lat: EllipticLattice) -> Tuple[complex, complex, complex]:
    """(e1, e2, e3) = (℘(ω1), ℘(ω2), ℘(ω1+ω2)); su suma es cero."""
    w1, w2 = lat.omega1, lat.omega2
    return lat.wp(w1), lat.wp(w2), lat.wp(w1 + w2)


def wp_laurent_coefficients(lat: EllipticLattice, order: int) -> np.ndarray:
    """
    Coeficientes c_n de ℘(x) = x⁻² + Σ_{n≥2} c_n x^{2n-2}, para n = 2..order.

    c2 = g2/20, c3 = g3/28 y la recursión clásica
    c_n = 3/((2n+1)(n-3)) Σ_{m=2}^{n-2} c_m c_{n-m}.

    Returns:
        Arreglo c con c[n] el coeficiente de x^{2n-2} (c[0] = c[1] = 0)
    """
    g2, g3 = invariants(lat)
    c = np.zeros(max(order, 3) + 1, dtype=complex)
    c[2], c[3] = g2 / 20.0, g3 / 28.0
    for n in range(4, order + 1):
        c[n] = 3.0 / ((2 * n + 1) * (n - 3)) * sum(c[m] * c[n - m] for m in range(2, n - 1))
    return c[: order + 1]


# --- núcleo de Lamé y multiplicadores de Bloch -------------------------------

def _check_near(lat: EllipticLattice, name: str, **args):
    for label, val in args.items():
        dist = lat.lattice_distance(val)
        if np.any(dist < lat.guard):
            raise NearSingularInput(
                f"{name}: {label} a distancia {float(np.min(dist)):.3e} de la red"
            )


def phi_lame(x, z, lat: EllipticLattice):
    """
    Núcleo de Lamé Φ(x,z) = σ(z-x) / (σ(z)σ(x)) · exp(x ζ(z)).

    Tiene un único polo simple en x = 0 con Φ = 1/x + O(x), es
    doblemente periódico en z y doble-Bloch en x con multiplicadores T_α(z).

    Raises:
        NearSingularInput: Si x, z o z-x están dentro del radio de guarda
    """
    x = np.asarray(x, dtype=complex)
    z = np.asarray(z, dtype=complex)
    _check_near(lat, "phi_lame", x=x, z=z, z_minus_x=z - x)
    return _out(lat.sigma(z - x) / (lat.sigma(z) * lat.sigma(x)) * np.exp(x * lat.zeta(z)))


def phi_lame_derivatives(x, z, lat: EllipticLattice):
    """(Φ, ∂xΦ, ∂x²Φ) usando ∂x ln Φ = ζ(z) - ζ(z-x) - ζ(x)."""
    phi = np.asarray(phi_lame(x, z, lat))
    log_d = lat.zeta(z) - lat.zeta(np.asarray(z) - np.asarray(x)) - lat.zeta(x)
    d1 = phi * log_d
    d2 = phi * (log_d ** 2 - lat.wp(np.asarray(z) - np.asarray(x)) + lat.wp(x))
    return _out(phi), _out(d1), _out(d2)


def bloch_multiplier(alpha: int, z, lat: EllipticLattice):
    """T_α(z) = exp(2ω_α ζ(z) - 2η_α z): multiplicador de Φ(·, z) al desplazar x por 2ω_α."""
    z = np.asarray(z, dtype=complex)
    _check_near(lat, "bloch_multiplier", z=z)
    return _out(np.exp(2.0 * lat.half_period(alpha) * lat.zeta(z) - 2.0 * lat.eta(alpha) * z))


@dataclass(frozen=True)
class BlochMultipliers:
    """Multiplicadores (B1, B2) de una función doble-Bloch, con la rama del invariante."""

    B1: complex
    B2: complex

    def equivalence_invariant(self, lat: EllipticLattice) -> Tuple[complex, Tuple[float, float]]:
        """
        B1^{ω2}·B2^{-ω1} con logaritmos principales.

        Returns:
            (valor, (arg B1, arg B2)) registrando la rama usada
        """
        l1, l2 = np.log(complex(self.B1)), np.log(complex(self.B2))
        value = np.exp(lat.omega2 * l1 - lat.omega1 * l2)
        return complex(value), (float(l1.imag), float(l2.imag))

    def gauge(self, a: complex, lat: EllipticLattice) -> "BlochMultipliers":
        """Multiplicadores de e^{ax}ψ(x)."""
        return BlochMultipliers(self.B1 * np.exp(2 * a * lat.omega1), self.B2 * np.exp(2 * a * lat.omega2))


def lame_residual(x, z, lat: EllipticLattice, h: Optional[float] = None) -> float:
    """
    Residuo |(d²/dx² - 2℘(x))Φ - ℘(z)Φ| / (|℘(z)Φ| + 1).

    La segunda derivada se toma con diferencias centradas de 5 puntos;
    el paso se adapta a la distancia de x a la red (los polos de Φ).
    """
    x, z = complex(x), complex(z)
    if h is None:
        reach = float(lat.lattice_distance(x))
        h = min(2e-3 * abs(lat.omega1), 5e-3 * reach)
    d2 = second_derivative_5pt(lambda s: phi_lame(s, z, lat), x, h)
    phi = phi_lame(x, z, lat)
    res = d2 - 2.0 * lat.wp(x) * phi - lat.wp(z) * phi
    return float(abs(res) / (abs(lat.wp(z) * phi) + 1.0))
