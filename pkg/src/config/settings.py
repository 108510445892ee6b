"""
Configuración centralizada de theta-lab.

Este módulo carga las variables de entorno y proporciona
una interfaz limpia para acceder a la configuración numérica
(tolerancias de truncamiento, radio de guarda, hilos, semillas).

Uso:
    from src.config.settings import settings

    tol = settings.THETA_LAB_TOL
"""

import os
from dataclasses import dataclass
from dotenv import load_dotenv

# Cargar variables de entorno desde .env
load_dotenv()


_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass
class Settings:
    """
    Clase de configuración que encapsula todas las variables de entorno.

    Attributes:
        THETA_LAB_THREADS: Hilos para lotes y barridos de residuos
        THETA_LAB_TOL: Tolerancia absoluta por defecto de las sumas theta
        THETA_LAB_IM_WINDOW: Ventana admisible de |Im z| en unidades de red
        THETA_LAB_MAX_TERMS: Máximo de puntos de red por suma
        THETA_LAB_GUARD: Radio de guarda relativo (por |ω1|) cerca de polos
        THETA_LAB_SEED: Semilla por defecto de los controles estadísticos
        THETA_LAB_OUT: Directorio de salida de reportes
        LOG_LEVEL: Nivel de logging
    """

    # Paralelismo
    THETA_LAB_THREADS: int = int(os.getenv("THETA_LAB_THREADS", "1"))

    # Truncamiento de theta
    THETA_LAB_TOL: float = float(os.getenv("THETA_LAB_TOL", "1e-12"))
    THETA_LAB_IM_WINDOW: float = float(os.getenv("THETA_LAB_IM_WINDOW", "6.0"))
    THETA_LAB_MAX_TERMS: int = int(os.getenv("THETA_LAB_MAX_TERMS", "200000"))

    # Funciones elípticas
    THETA_LAB_GUARD: float = float(os.getenv("THETA_LAB_GUARD", "1e-8"))

    # Reproducibilidad y salida
    THETA_LAB_SEED: int = int(os.getenv("THETA_LAB_SEED", "7"))
    THETA_LAB_OUT: str = os.getenv("THETA_LAB_OUT", "reports")

    # Logging Configuration
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")

    def validate(self) -> bool:
        """
        Valida que los valores de configuración sean coherentes.

        Returns:
            bool: True si la configuración es válida

        Raises:
            ValueError: Si algún valor está fuera de rango
        """
        if self.THETA_LAB_THREADS < 1:
            raise ValueError(
                f"THETA_LAB_THREADS debe ser >= 1 (recibido {self.THETA_LAB_THREADS})"
            )
        if not 0.0 < self.THETA_LAB_TOL <= 1e-3:
            raise ValueError(
                f"THETA_LAB_TOL debe estar en (0, 1e-3] (recibido {self.THETA_LAB_TOL})"
            )
        if self.THETA_LAB_IM_WINDOW <= 0.0:
            raise ValueError("THETA_LAB_IM_WINDOW debe ser positivo")
        if self.THETA_LAB_MAX_TERMS < 1:
            raise ValueError("THETA_LAB_MAX_TERMS debe ser >= 1")
        if not 0.0 < self.THETA_LAB_GUARD < 1e-2:
            raise ValueError(
                f"THETA_LAB_GUARD debe estar en (0, 1e-2) (recibido {self.THETA_LAB_GUARD})"
            )
        if self.LOG_LEVEL.upper() not in _LOG_LEVELS:
            raise ValueError(
                f"LOG_LEVEL desconocido: {self.LOG_LEVEL}. Opciones: {', '.join(_LOG_LEVELS)}"
            )
        return True

    def __repr__(self) -> str:
        """Representación legible de la configuración."""
        return (
            f"Settings(\n"
            f"  THETA_LAB_THREADS={self.THETA_LAB_THREADS},\n"
            f"  THETA_LAB_TOL={self.THETA_LAB_TOL},\n"
            f"  THETA_LAB_IM_WINDOW={self.THETA_LAB_IM_WINDOW},\n"
            f"  THETA_LAB_MAX_TERMS={self.THETA_LAB_MAX_TERMS},\n"
            f"  THETA_LAB_GUARD={self.THETA_LAB_GUARD},\n"
            f"  THETA_LAB_SEED={self.THETA_LAB_SEED},\n"
            f"  THETA_LAB_OUT={self.THETA_LAB_OUT},\n"
            f"  LOG_LEVEL={self.LOG_LEVEL}\n"
            f")"
        )


# Instancia singleton de la configuración
settings = Settings()


# Umbrales de aprobación por residuo (valores de aceptación)
DEFAULT_THRESHOLDS = {
    "theta.quasiperiodicity": 1e-9,
    "theta.addition": 1e-9,
    "theta.evenness": 1e-10,
    "weierstrass.legendre": 1e-12,
    "weierstrass.lame": 1e-6,
    "weierstrass.phi_pole_slope": 0.9,
    "cm.lax": 1e-8,
    "cm.isospectrality": 1e-7,
    "cm.energy_drift": 1e-8,
    "cm.heat": 1e-5,
    "cm.negative_sign": 1e-2,
    "rs.isospectrality": 1e-6,
    "rs.hamiltonian_drift": 1e-8,
    "bethe.residual": 1e-12,
    "bethe.march_residual": 1e-9,
    "divisor.pole_dynamics": 1e-6,
    "divisor.laurent_routes": 1e-8,
    "secant.linear_kp": 1e-5,
    "secant.flex_B": 1e-7,
    "secant.cm_C": 1e-7,
    "secant.tangent_B": 1e-7,
    "secant.rs_C": 1e-7,
    "secant.trisecant_B": 1e-7,
    "secant.bdhe_C": 1e-7,
    "secant.quadrisecant": 1e-6,
    "secant.negative_control": 1e-3,
    "involution.residual_C": 1e-7,
    "involution.residual_turn": 1e-7,
    "involution.residual_b1": 1e-8,
    "involution.residual_ort": 1e-8,
    "involution.residual_Cd": 1e-6,
    "involution.residual_ortd": 1e-6,
    "wave.obstruction": 1e-7,
    "wave.propagation": 1e-7,
    "wave.periodicity": 1e-8,
    "kp.residual": 1e-4,
    "kp.order": 1.9,
    "toda.residual": 1e-4,
    "bdhe.residual": 1e-8,
    "linear.residual": 1e-5,
}

# Residuos que aprueban por encima del umbral (pendientes, órdenes, controles negativos)
LOWER_BOUND_CHECKS = {
    "weierstrass.phi_pole_slope",
    "cm.negative_sign",
    "secant.negative_control",
    "kp.order",
}


# Descripciones de los tipos de escenario
SCENARIO_KINDS = {
    "theta-check": "Batería de identidades de theta (paridad, cuasi-periodicidad, adición)",
    "cm": "Sistema de Calogero-Moser elíptico: flujo RK4, isoespectralidad, reducción del calor",
    "rs": "Sistema de Ruijsenaars-Schneider elíptico: Hamiltoniano, Lax, invariantes",
    "bethe": "Ecuaciones de Bethe anidadas: residuos y marcha de niveles",
    "secant": "Condiciones (A)/(B)/(C) de los teoremas de trisecantes",
    "involution": "Condiciones de curvas con involución (KP y Toda)",
    "wave": "Recursión de la solución de onda y obstrucciones de residuo",
    "kp": "Residuo de la ecuación KP para una solución theta",
    "toda": "Residuo de la ecuación de Toda 2D",
    "bdhe": "Residuo de la ecuación de Hirota discreta bilineal",
}
