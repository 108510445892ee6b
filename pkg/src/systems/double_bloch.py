"""
Funciones doble-Bloch y reducción del problema lineal tipo calor al par de Lax CM.

ψ(x,t) = e^{kx+k²t} Σ c_i(t) Φ(x - q_i(t), z) resuelve
(∂t - ∂x² + u)ψ = 0 con u = 2Σ℘(x - q_i) si y solo si
(L(z) + 2k)C = 0 y Ċ = M(z)C a lo largo del flujo CM.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg

from src.special.weierstrass import BlochMultipliers, EllipticLattice, bloch_multiplier, phi_lame
from src.systems.pole_systems import (
    CMState,
    _check_collisions,
    _forces,
    calibrate_cm_coupling,
    cm_lax,
    cm_m_matrix,
    rk4_step,
)
from src.utils.errors import DegenerateEigenvalue, NearSingularInput
from src.utils.helpers import second_derivative_5pt

logger = logging.getLogger(__name__)


@dataclass
class DoubleBloch:
    """ψ(x) = Σ c_i Φ(x - q_i, z) e^{kx}."""

    qs: np.ndarray
    cs: np.ndarray
    z: complex
    k: complex
    lat: EllipticLattice

    def __call__(self, x):
        x = np.asarray(x, dtype=complex)
        total = np.zeros(x.shape, dtype=complex)
        for q, c in zip(self.qs, self.cs):
            total = total + c * phi_lame(x - q, self.z, self.lat)
        return total * np.exp(self.k * x)

    def multipliers(self) -> BlochMultipliers:
        """B_α = T_α(z) e^{2ω_α k}."""
        return BlochMultipliers(
            complex(bloch_multiplier(1, self.z, self.lat) * np.exp(2 * self.lat.omega1 * self.k)),
            complex(bloch_multiplier(2, self.z, self.lat) * np.exp(2 * self.lat.omega2 * self.k)),
        )

    def residue(self, i: int) -> complex:
        return complex(self.cs[i] * np.exp(self.k * self.qs[i]))

    def shift_residual(self, x: complex, alpha: int) -> float:
        """|ψ(x + 2ω_α) - B_α ψ(x)| / (1 + |ψ(x)|)."""
        B = self.multipliers()
        mult = B.B1 if alpha == 1 else B.B2
        shift = 2 * self.lat.half_period(alpha)
        val = complex(self(x))
        return float(abs(complex(self(x + shift)) - mult * val) / (1.0 + abs(val)))


def double_bloch_assemble(qs, cs, z: complex, k: complex, lat: EllipticLattice) -> DoubleBloch:
    """
    Arma la función doble-Bloch con polos simples qs y coeficientes cs.

    Raises:
        NearSingularInput: Si dos polos coinciden módulo la red
    """
    qs = np.atleast_1d(np.asarray(qs, dtype=complex))
    cs = np.atleast_1d(np.asarray(cs, dtype=complex))
    if qs.shape != cs.shape:
        raise ValueError(f"qs y cs deben tener la misma forma ({qs.shape} vs {cs.shape})")
    if len(qs) > 1:
        diffs = (qs[:, None] - qs[None, :])[~np.eye(len(qs), dtype=bool)]
        if np.min(lat.lattice_distance(diffs)) < lat.guard:
            raise NearSingularInput("double_bloch_assemble: polos repetidos")
    return DoubleBloch(qs=qs, cs=cs, z=complex(z), k=complex(k), lat=lat)


@dataclass
class ReductionResult:
    """Resultado de la reducción calor → Lax para un autovalor."""

    k: complex
    eigenvalue: complex
    residual_L: float
    residual_M: float
    heat_residual: float
    C: np.ndarray
    kappa: float
    grid: List[complex] = field(default_factory=list)


def _nullspace_vector(A: np.ndarray) -> Tuple[np.ndarray, float]:
    _, svals, vh = linalg.svd(A)
    return vh[-1].conj(), float(svals[-1] / (1.0 + svals[0]))


def _sample_grid(s: CMState) -> List[complex]:
    lat = s.lat
    scale = min(abs(lat.omega1), abs(lat.omega2))
    pts = []
    for q in s.q:
        for r, ang in ((0.12, 0.3), (0.2, 2.1), (0.3, 4.0)):
            pts.append(q + r * scale * np.exp(1j * ang))
    for a, b in ((0.21, 0.37), (0.63, 0.18), (0.44, 0.71), (0.86, 0.55)):
        pts.append(2 * a * lat.omega1 + 2 * b * lat.omega2)
    poles = np.asarray(s.q)
    keep = []
    for x in pts:
        if np.min(lat.lattice_distance(x - poles)) >= 0.1 * scale:
            keep.append(complex(x))
    return keep


class _JointFlow:
    """Flujo conjunto de (q, p, C) con ṗ = κΣ℘′, Ċ = M(z)C."""

    def __init__(self, s: CMState, C: np.ndarray, z: complex, kappa: float):
        self.N, self.lat, self.z, self.kappa = s.N, s.lat, z, kappa
        self.y0 = np.concatenate([s.q, s.p, C])

    def rhs(self, y):
        N = self.N
        q, p, C = y[:N], y[N:2 * N], y[2 * N:]
        _check_collisions(q, self.lat)
        M = cm_m_matrix(CMState(q=q, p=p, lat=self.lat), self.z)
        return np.concatenate([p, _forces(q, self.lat, self.kappa), M @ C])

    def states(self, h: float, count: int = 2):
        """Estados en t = jh para j = -count..count."""
        out = {0: self.y0}
        for sign in (1, -1):
            y = self.y0
            for j in range(1, count + 1):
                y = rk4_step(self.rhs, y, sign * h)
                out[sign * j] = y
        return out

    def split(self, y):
        N = self.N
        return y[:N], y[N:2 * N], y[2 * N:]


def _psi(y, flow: _JointFlow, x, t: float, k: complex):
    q, _, C = flow.split(y)
    total = 0j
    for qi, ci in zip(q, C):
        total += ci * phi_lame(x - qi, flow.z, flow.lat)
    return total * np.exp(k * x + k * k * t)


def heat_residual(s: CMState, C: np.ndarray, z: complex, k: complex, kappa: float,
                  grid: Optional[List[complex]] = None) -> Tuple[float, float, List[complex]]:
    """
    Residuo de (∂t - ∂x² + u)ψ en una grilla, con derivadas por diferencias de 5 puntos.

    El paso en x y en t se escala con la distancia del punto al polo más cercano.

    Returns:
        (residuo máximo normalizado por 1 + |ψ|, residuo de (L + 2k)C a lo largo del flujo, grilla)
    """
    lat = s.lat
    grid = _sample_grid(s) if grid is None else grid
    flow = _JointFlow(s, np.asarray(C, dtype=complex), z, kappa)
    vmax = 1.0 + float(np.max(np.abs(s.p)))
    worst, worst_M = 0.0, 0.0
    for x in grid:
        dist = float(np.min(lat.lattice_distance(x - s.q)))
        hx = 2e-3 * dist
        ht = hx / vmax
        states = flow.states(ht)
        for j, y in states.items():
            q, p, Cj = flow.split(y)
            L = cm_lax(CMState(q=q, p=p, lat=lat), z)
            worst_M = max(worst_M, float(np.linalg.norm((L + 2 * k * np.eye(s.N)) @ Cj)
                                         / (1.0 + np.linalg.norm(Cj))))
        psi_t = (_psi(states[-2], flow, x, -2 * ht, k)
                 - 8 * _psi(states[-1], flow, x, -ht, k)
                 + 8 * _psi(states[1], flow, x, ht, k)
                 - _psi(states[2], flow, x, 2 * ht, k)) / (12 * ht)
        psi_xx = second_derivative_5pt(lambda xx: _psi(states[0], flow, xx, 0.0, k), x, hx)
        psi0 = _psi(states[0], flow, x, 0.0, k)
        u = 2.0 * np.sum(lat.wp(x - s.q))
        res = abs(psi_t - psi_xx + u * psi0) / (1.0 + abs(psi0))
        worst = max(worst, float(res))
    return worst, worst_M, grid


def heat_to_lax_reduction(s: CMState, z: complex, k: Optional[complex] = None, eigen_index: int = 0,
                          c_noise: float = 0.0, seed: int = 0, degeneracy_tol: float = 1e-8) -> ReductionResult:
    """
    Comprueba la equivalencia entre el problema de calor y las ecuaciones de Lax.

    Con k = None toma λ = eigen_index-ésimo autovalor de L(z) (orden por parte
    real, luego imaginaria) y k = -λ/2. Con k dado, C es el vector singular
    mínimo de L + 2k y residual_L su valor singular normalizado.

    Args:
        c_noise: Perturbación relativa de C (control negativo)

    Raises:
        DegenerateEigenvalue: Si el autovalor elegido no es simple
        CollisionDetected: Si el flujo auxiliar colisiona
    """
    kappa = calibrate_cm_coupling(s.lat)[0]
    L = cm_lax(s, z)
    if k is None:
        eig = linalg.eigvals(L)
        eig = eig[np.lexsort((eig.imag, eig.real))]
        lam = eig[eigen_index]
        others = np.delete(eig, eigen_index)
        if len(others) and np.min(np.abs(others - lam)) < degeneracy_tol * (1.0 + abs(lam)):
            raise DegenerateEigenvalue(f"Autovalor λ={lam:.6g} con multiplicidad > 1")
        k = -lam / 2.0
    else:
        lam = -2.0 * complex(k)
    C, residual_L = _nullspace_vector(L + 2.0 * k * np.eye(s.N))
    if c_noise:
        rng = np.random.default_rng(seed)
        noise = rng.normal(size=s.N) + 1j * rng.normal(size=s.N)
        C = C + c_noise * np.linalg.norm(C) * noise / np.linalg.norm(noise)
    heat, residual_M, grid = heat_residual(s, C, z, k, kappa)
    logger.debug("Reducción calor→Lax: λ=%s, res_L=%.2e, res_M=%.2e, calor=%.2e", lam, residual_L, residual_M, heat)
    return ReductionResult(k=complex(k), eigenvalue=complex(lam), residual_L=residual_L, residual_M=residual_M,
                           heat_residual=heat, C=C, kappa=kappa, grid=grid)
