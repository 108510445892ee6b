"""
Fixtures compartidas de la suite de pruebas.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Agregar la raíz del repositorio al path, igual que main.py
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.special.siegel_theta import PeriodMatrix, TruncationPolicy  # noqa: E402
from src.special.weierstrass import EllipticLattice  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture(scope="session")
def square_period():
    return PeriodMatrix([[1j]])


@pytest.fixture(scope="session")
def policy():
    return TruncationPolicy(target_abs_tol=1e-12)


@pytest.fixture(scope="session")
def square_lattice():
    return EllipticLattice(0.5, 0.5j)


@pytest.fixture(scope="session")
def skew_lattice():
    return EllipticLattice(0.5, 0.17 + 0.62j)


@pytest.fixture(scope="session")
def shift_lattice():
    # La red no contiene al desplazamiento unitario de RS y Bethe
    return EllipticLattice(1.5, 0.3 + 1.2j)
