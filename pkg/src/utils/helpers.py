"""
Funciones auxiliares de theta-lab.

Este módulo contiene utilidades usadas en todo el proyecto:
configuración de logging, medición de tiempos, suma compensada,
diferencias finitas y métricas de ejecución.
"""

import logging
import time
from functools import wraps
from typing import Any, Callable, Dict, List, Sequence

import numpy as np


def setup_logging(level: str = "INFO") -> logging.Logger:
    """
    Configura el sistema de logging.

    Args:
        level: Nivel de logging (DEBUG, INFO, WARNING, ERROR)

    Returns:
        Logger configurado
    """
    logging.basicConfig(
        level=getattr(logging, level.upper()),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S"
    )

    return logging.getLogger("theta_lab")


def timing_decorator(func):
    """
    Decorador para medir el tiempo de ejecución de una función.

    El tiempo se registra a nivel DEBUG en el logger del módulo
    que define la función.

    Usage:
        @timing_decorator
        def my_function():
            ...
    """
    log = logging.getLogger(func.__module__)

    @wraps(func)
    def wrapper(*args, **kwargs):
        start_time = time.perf_counter()
        result = func(*args, **kwargs)
        elapsed = time.perf_counter() - start_time
        log.debug("%s ejecutado en %.3fs", func.__name__, elapsed)
        return result

    return wrapper


def _compensated_real(terms: np.ndarray) -> np.ndarray:
    total = np.zeros(terms.shape[1:], dtype=float)
    comp = np.zeros_like(total)
    for term in terms:
        tmp = total + term
        big = np.abs(total) >= np.abs(term)
        comp += np.where(big, (total - tmp) + term, (term - tmp) + total)
        total = tmp
    return total + comp


def neumaier_sum(terms: np.ndarray, axis: int = 0) -> np.ndarray:
    """
    Suma compensada de Neumaier a lo largo de un eje.

    El orden de acumulación es el orden del eje, por lo que el resultado
    es reproducible bit a bit para la misma entrada.

    Args:
        terms: Arreglo real o complejo de sumandos
        axis: Eje a sumar

    Returns:
        Arreglo con el eje reducido
    """
    arr = np.moveaxis(np.asarray(terms), axis, 0)
    if arr.shape[0] == 0:
        return np.zeros(arr.shape[1:], dtype=arr.dtype)
    if np.iscomplexobj(arr):
        return _compensated_real(arr.real) + 1j * _compensated_real(arr.imag)
    return _compensated_real(arr.astype(float))


def second_derivative_5pt(f: Callable[[Any], Any], x: Any, h: float) -> Any:
    """Derivada segunda por la fórmula centrada de 5 puntos, error O(h^4)."""
    return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) / (12 * h * h)


def first_derivative_5pt(f: Callable[[Any], Any], x: Any, h: float) -> Any:
    """Derivada primera centrada de 5 puntos, error O(h^4)."""
    return (f(x - 2 * h) - 8 * f(x - h) + 8 * f(x + h) - f(x + 2 * h)) / (12 * h)


def fourth_derivative_5pt(f: Callable[[Any], Any], x: Any, h: float) -> Any:
    """Derivada cuarta centrada de 5 puntos, error O(h^2)."""
    return (f(x - 2 * h) - 4 * f(x - h) + 6 * f(x) - 4 * f(x + h) + f(x + 2 * h)) / h ** 4


def richardson(coarse: Any, fine: Any, order: int = 2) -> Any:
    """
    Extrapolación de Richardson para un paso h y h/2.

    Args:
        coarse: Aproximación con paso h
        fine: Aproximación con paso h/2
        order: Orden del error dominante del esquema

    Returns:
        Aproximación con el término dominante eliminado
    """
    factor = 2.0 ** order
    return (factor * fine - coarse) / (factor - 1.0)


def observed_order(errors: Sequence[float]) -> List[float]:
    """Órdenes observados log2(e_k / e_{k+1}) en una escalera de pasos que se reducen a la mitad."""
    errs = [float(e) for e in errors]
    return [float(np.log2(a / b)) for a, b in zip(errs[:-1], errs[1:]) if a > 0 and b > 0]


def complex_pair(value: complex) -> List[float]:
    """Convierte un complejo en [re, im] para serializar en JSON."""
    value = complex(value)
    return [value.real, value.imag]


def pair_complex(pair: Sequence[float]) -> complex:
    """Inverso de complex_pair."""
    return complex(float(pair[0]), float(pair[1]))


class RunMetrics:
    """
    Clase para rastrear métricas de una corrida de residuos.

    Útil para resumir cuántas evaluaciones pasaron, cuántas fallaron
    y cuánto tiempo tomó cada grupo.
    """

    def __init__(self):
        self.total_checks = 0
        self.failures = 0
        self.errors = 0
        self.total_time = 0.0
        self.worst: Dict[str, float] = {}

    def record_check(self, name: str, value: float, passed: bool, duration: float = 0.0):
        """Registra la evaluación de un residuo."""
        self.total_checks += 1
        self.total_time += duration
        if not passed:
            self.failures += 1
        if np.isfinite(value):
            self.worst[name] = max(self.worst.get(name, 0.0), float(value))

    def record_error(self):
        """Registra un error."""
        self.errors += 1

    def get_summary(self) -> Dict[str, Any]:
        """Obtiene un resumen de las métricas."""
        return {
            "total_checks": self.total_checks,
            "failures": self.failures,
            "errors": self.errors,
            "total_time": round(self.total_time, 3),
            "max_residual": max(self.worst.values()) if self.worst else 0.0,
        }

    def __str__(self) -> str:
        summary = self.get_summary()
        return (
            f"📊 Métricas de la corrida:\n"
            f"   Residuos evaluados: {summary['total_checks']}\n"
            f"   Fallidos: {summary['failures']}\n"
            f"   Errores: {summary['errors']}\n"
            f"   Residuo máximo: {summary['max_residual']:.3e}\n"
            f"   Tiempo total: {summary['total_time']}s"
        )
