"""
Series de potencias truncadas en dos variables (ξ, s).

Un BiSeries guarda c[j, i], coeficiente de s^j ξ^i, truncado en la caja
j ≤ ns, i ≤ nx. La caja es cerrada bajo productos: los coeficientes dentro
de ella solo dependen de coeficientes dentro de ella.

Ejemplo de uso:
    xi = BiSeries.variable("x", ns=2, nx=4)
    f = (1 + xi).log()
"""

import math
from typing import Sequence, Union

import numpy as np

Number = Union[int, float, complex]


class BiSeries:
    __array_ufunc__ = None

    def __init__(self, c, ns: int = None, nx: int = None):
        c = np.atleast_2d(np.asarray(c, dtype=complex))
        ns = c.shape[0] - 1 if ns is None else ns
        nx = c.shape[1] - 1 if nx is None else nx
        if ns < 0 or nx < 0:
            raise ValueError(f"Órdenes negativos: ns={ns}, nx={nx}")
        self.c = np.zeros((ns + 1, nx + 1), dtype=complex)
        rows, cols = min(ns + 1, c.shape[0]), min(nx + 1, c.shape[1])
        self.c[:rows, :cols] = c[:rows, :cols]

    # --- construcción ---------------------------------------------------------

    @classmethod
    def constant(cls, value: Number, ns: int, nx: int) -> "BiSeries":
        out = cls(np.zeros((1, 1)), ns, nx)
        out.c[0, 0] = value
        return out

    @classmethod
    def variable(cls, name: str, ns: int, nx: int) -> "BiSeries":
        """La serie de la variable s o ξ ("s" o "x")."""
        out = cls(np.zeros((1, 1)), ns, nx)
        if name == "x":
            if nx >= 1:
                out.c[0, 1] = 1.0
        elif name == "s":
            if ns >= 1:
                out.c[1, 0] = 1.0
        else:
            raise ValueError(f"Variable desconocida: {name}")
        return out

    @classmethod
    def from_s(cls, coeffs: Sequence[Number], ns: int, nx: int) -> "BiSeries":
        """Serie que solo depende de s."""
        out = cls(np.zeros((1, 1)), ns, nx)
        k = min(len(coeffs), ns + 1)
        out.c[:k, 0] = np.asarray(coeffs, dtype=complex)[:k]
        return out

    @property
    def ns(self) -> int:
        return self.c.shape[0] - 1

    @property
    def nx(self) -> int:
        return self.c.shape[1] - 1

    def __getitem__(self, index):
        return self.c[index]

    def copy(self) -> "BiSeries":
        return BiSeries(self.c.copy())

    def _coerce(self, other) -> "BiSeries":
        if isinstance(other, BiSeries):
            return other
        return BiSeries.constant(other, self.ns, self.nx)

    def _common(self, other: "BiSeries"):
        ns, nx = min(self.ns, other.ns), min(self.nx, other.nx)
        return self.c[:ns + 1, :nx + 1], other.c[:ns + 1, :nx + 1], ns, nx

    # --- aritmética -----------------------------------------------------------

    def __add__(self, other):
        a, b, ns, nx = self._common(self._coerce(other))
        return BiSeries(a + b, ns, nx)

    __radd__ = __add__

    def __neg__(self):
        return BiSeries(-self.c)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, BiSeries):
            return BiSeries(self.c * other)
        a, b, ns, nx = self._common(other)
        out = np.zeros((ns + 1, nx + 1), dtype=complex)
        for j in range(ns + 1):
            for i in range(nx + 1):
                if a[j, i] != 0:
                    out[j:, i:] += a[j, i] * b[:ns + 1 - j, :nx + 1 - i]
        return BiSeries(out)

    __rmul__ = __mul__

    def _nilpotent_sum(self, coeffs: Sequence[Number]) -> "BiSeries":
        """Σ coeffs[n] h^n con h = self - c00, que es nilpotente en la caja."""
        h = self - self.c[0, 0]
        out = BiSeries.constant(coeffs[0], self.ns, self.nx)
        power = BiSeries.constant(1.0, self.ns, self.nx)
        for n in range(1, len(coeffs)):
            power = power * h
            if not np.any(power.c):
                break
            out = out + coeffs[n] * power
        return out

    def _depth(self) -> int:
        return self.ns + self.nx + 1

    def reciprocal(self) -> "BiSeries":
        c0 = self.c[0, 0]
        if c0 == 0:
            raise ZeroDivisionError("Término constante nulo en el denominador")
        return self._nilpotent_sum([(-1) ** n / c0 ** (n + 1) for n in range(self._depth())])

    def __truediv__(self, other):
        if not isinstance(other, BiSeries):
            return BiSeries(self.c / other)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.reciprocal()

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("Solo potencias enteras no negativas")
        out = BiSeries.constant(1.0, self.ns, self.nx)
        for _ in range(n):
            out = out * self
        return out

    def exp(self) -> "BiSeries":
        c0 = np.exp(self.c[0, 0])
        return self._nilpotent_sum([c0 / math.factorial(n) for n in range(self._depth())])

    def log(self) -> "BiSeries":
        c0 = self.c[0, 0]
        if c0 == 0:
            raise ZeroDivisionError("log de una serie con término constante nulo")
        coeffs = [np.log(c0)] + [(-1) ** (n + 1) / (n * c0 ** n) for n in range(1, self._depth())]
        return self._nilpotent_sum(coeffs)

    # --- cálculo --------------------------------------------------------------

    def deriv(self, var: str = "x") -> "BiSeries":
        if var == "x":
            if self.nx == 0:
                return BiSeries(np.zeros((self.ns + 1, 1)))
            return BiSeries(self.c[:, 1:] * np.arange(1, self.nx + 1)[None, :])
        if var == "s":
            if self.ns == 0:
                return BiSeries(np.zeros((1, self.nx + 1)))
            return BiSeries(self.c[1:, :] * np.arange(1, self.ns + 1)[:, None])
        raise ValueError(f"Variable desconocida: {var}")

    def divide_x(self, tol: float = 0.0) -> "BiSeries":
        """Divide por ξ; exige que la columna ξ^0 sea nula (hasta tol)."""
        if np.max(np.abs(self.c[:, 0])) > tol:
            raise ZeroDivisionError("La serie no es divisible por ξ")
        return BiSeries(self.c[:, 1:]) if self.nx > 0 else BiSeries(np.zeros((self.ns + 1, 1)))

    def compose_x(self, shift: "BiSeries") -> "BiSeries":
        """
        Sustituye ξ → ξ + shift(s) con shift sin término constante.

        Devuelve Σ_i c[:, i](s) (ξ + shift)^i.
        """
        if shift.c[0, 0] != 0:
            raise ValueError("El desplazamiento debe anularse en s = 0")
        xi = BiSeries.variable("x", self.ns, self.nx)
        arg = xi + shift
        out = BiSeries.constant(0.0, self.ns, self.nx)
        power = BiSeries.constant(1.0, self.ns, self.nx)
        for i in range(self.nx + 1):
            out = out + BiSeries.from_s(self.c[:, i], self.ns, self.nx) * power
            power = power * arg
        return out

    def column(self, i: int) -> np.ndarray:
        """Coeficientes en s del término ξ^i."""
        return self.c[:, i].copy()

    def __call__(self, x: Number, s: Number = 0.0) -> complex:
        sv = s ** np.arange(self.ns + 1)
        xv = x ** np.arange(self.nx + 1)
        return complex(sv @ self.c @ xv)

    def __repr__(self) -> str:
        return f"BiSeries(ns={self.ns}, nx={self.nx}, c00={self.c[0, 0]:.6g})"
