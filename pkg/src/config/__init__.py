"""
Configuracion del proyecto.

Este modulo exporta la configuracion centralizada.
"""

from src.config.settings import settings, DEFAULT_THRESHOLDS, LOWER_BOUND_CHECKS, SCENARIO_KINDS

__all__ = [
    "settings",
    "DEFAULT_THRESHOLDS",
    "LOWER_BOUND_CHECKS",
    "SCENARIO_KINDS",
]
