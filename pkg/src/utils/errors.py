"""
Jerarquía de excepciones de theta-lab.

Los errores de validación de entrada heredan también de ValueError,
de modo que el código que ya captura ValueError siga funcionando.
"""


class ThetaLabError(Exception):
    """Excepción base del proyecto."""


# --- Validación de entradas -------------------------------------------------

class InvalidPeriodMatrix(ThetaLabError, ValueError):
    """La matriz de periodos no está en el semiespacio de Siegel."""


class InvalidLattice(ThetaLabError, ValueError):
    """Semiperiodos con Im(ω2/ω1) <= 0 o relación de Legendre violada."""


class ConfigInvalid(ThetaLabError, ValueError):
    """Un escenario o archivo de configuración no valida."""


class CurveDatumInvalid(ThetaLabError, ValueError):
    """Los datos de curva no cumplen la consistencia de Abel."""


# --- Theta ------------------------------------------------------------------

class TruncationInsufficient(ThetaLabError):
    """La política de truncamiento no garantiza la tolerancia pedida."""


class AllCoordinatesVanish(ThetaLabError):
    """Todas las coordenadas de Kummer son numéricamente cero."""


# --- Singularidades ---------------------------------------------------------

class NumericalSingularity(ThetaLabError):
    """Evaluación demasiado cerca de un polo o cero."""


class PoleAtLatticePoint(NumericalSingularity):
    """Argumento dentro del radio de guarda de un punto de la red."""


class NearSingularInput(NumericalSingularity):
    """Algún argumento intermedio cae dentro del radio de guarda."""


# --- Sistemas de polos ------------------------------------------------------

class CollisionDetected(ThetaLabError):
    """Dos partículas se acercan a menos del radio de guarda."""


class StepRejected(ThetaLabError):
    """La deriva de energía de un paso excede la cota."""


class BranchAmbiguity(ThetaLabError):
    """La raíz cuadrada de RS cruza el corte de rama principal."""


class DegenerateEigenvalue(ThetaLabError):
    """Autovalor de L(z) con multiplicidad numérica mayor que uno."""


# --- Divisor de tau ---------------------------------------------------------

class BoundaryZero(ThetaLabError):
    """Hay un cero de tau sobre (o muy cerca de) el borde de la ventana."""


class NonSimpleZero(ThetaLabError):
    """El cero no es simple (|∂xτ| por debajo del umbral)."""


class TrackingLost(ThetaLabError):
    """El seguimiento de un cero en t falló (colisión o salto)."""


class InsufficientZeros(ThetaLabError):
    """No se encontraron suficientes puntos sobre el divisor."""


# --- Condiciones y soluciones -----------------------------------------------

class GridHitsDivisor(ThetaLabError):
    """Un punto de la malla cae sobre el divisor de theta."""


class DivisorHit(ThetaLabError):
    """Un denominador theta se anula en la evaluación."""


class FactorVanishes(ThetaLabError):
    """Un factor theta de una razón se anula en un punto de muestra."""


class FitDegenerate(ThetaLabError):
    """La matriz de diseño de un ajuste por mínimos cuadrados es singular."""


class ShiftInvariantDivisor(ThetaLabError):
    """El conjunto de ceros es invariante por el desplazamiento U."""


class ResidueObstruction(ThetaLabError):
    """La recursión de onda encontró un residuo no nulo."""

    def __init__(self, message: str, order: int = -1, value: complex = 0j):
        super().__init__(message)
        self.order = order
        self.value = value
