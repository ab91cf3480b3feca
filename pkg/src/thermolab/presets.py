"""Small reference systems used by the tests, the acceptance suite and the README."""

from __future__ import annotations

import math

import numpy as np

from .potentials import CylinderFunction, SeriesPotential
from .subshift import SubshiftModel

PHI = (1 + math.sqrt(5)) / 2


def full_shift(k: int = 2, theta: float = 0.5) -> SubshiftModel:
    return SubshiftModel(np.ones((k, k), dtype=np.int64), theta)


def golden_mean(theta: float = 0.5) -> SubshiftModel:
    """Forbid the word ``11``."""
    return SubshiftModel(np.array([[1, 1], [1, 0]]), theta)


def constant_roof(model: SubshiftModel, value: float = 1.0) -> CylinderFunction:
    return CylinderFunction(model, 1, np.full(model.k0, float(value)))


def zero_potential(model: SubshiftModel) -> CylinderFunction:
    return CylinderFunction(model, 1, np.zeros(model.k0))


def two_valued_roof(model: SubshiftModel, values=(1.0, PHI)) -> CylinderFunction:
    """Depth-1 roof; ``(1, phi)`` is non-lattice since ``phi`` is irrational."""
    return CylinderFunction(model, 1, np.asarray(values, dtype=float))


def series_roof(rho: float = 0.5) -> SeriesPotential:
    """``1 + sum_k w(x_k) rho^k`` with ``w = (0, 1/phi)``."""
    return SeriesPotential(1.0, (0.0, 1.0 / PHI), rho)
