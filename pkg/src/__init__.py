"""
theta-lab.

Funciones theta de Riemann, funciones elípticas de Weierstrass, sistemas de
polos (Calogero-Moser, Ruijsenaars-Schneider, Bethe anidado) y residuos de
las ecuaciones KP, Toda 2D y Hirota discreta sobre soluciones theta.

Uso rapido:
    from src.special import PeriodMatrix, theta_eval
    from src.runner import run

    theta_eval([0.1, 0.2], PeriodMatrix([[1j, 0.2], [0.2, 1.3j]]))
    reports = run("scenarios/kp.json")
"""

from src.config.settings import settings

__version__ = "1.0.0"

__all__ = [
    "settings",
]
