"""Locally constant functions on the shift, Birkhoff sums and theta-seminorms."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError
from .subshift import SubshiftModel

log = logging.getLogger(__name__)

SEMINORM_COST_DEPTH = 12


@dataclass(frozen=True, eq=False)
class CylinderFunction:
    """A function of the first ``depth`` coordinates, stored in basis order."""

    model: SubshiftModel
    depth: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values)
        if not np.iscomplexobj(vals):
            vals = vals.astype(float)
        n = len(self.model.words(self.depth))
        if vals.shape != (n,):
            raise InputError(f"expected {n} values for depth {self.depth}, got shape {vals.shape}")
        object.__setattr__(self, "values", vals)

    def __call__(self, w: Sequence[int]):
        if len(w) < self.depth:
            raise InputError(f"word shorter than function depth {self.depth}")
        return self.values[self.model.index(np.asarray(w[: self.depth])[None, :])[0]]

    def on(self, W: np.ndarray) -> np.ndarray:
        """Values at the rows of ``W`` (each row at least ``depth`` long)."""
        W = np.atleast_2d(W)
        if W.shape[1] < self.depth:
            raise InputError(f"words shorter than function depth {self.depth}")
        return self.values[self.model.index(W[:, : self.depth])]

    def lift(self, t: int) -> "CylinderFunction":
        if t < self.depth:
            raise InputError(f"cannot lower depth {self.depth} to {t}")
        if t == self.depth:
            return self
        return CylinderFunction(self.model, t, self.on(self.model.words(t)))

    def with_values(self, values) -> "CylinderFunction":
        return CylinderFunction(self.model, self.depth, values)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


class Potential:
    """Common interface of table and series potentials."""

    depth: int | None

    def evaluate(self, w: Sequence[int]) -> float:
        raise NotImplementedError

    def table(self, model: SubshiftModel, t: int) -> CylinderFunction:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class TablePotential(Potential):
    func: CylinderFunction

    @property
    def depth(self) -> int:
        return self.func.depth

    def evaluate(self, w):
        return self.func(w)

    def table(self, model, t):
        return self.func.lift(t)


@dataclass(frozen=True)
class SeriesPotential(Potential):
    """``f(x) = c + sum_k weights[x_k] * rho**k``."""

    c: float
    weights: tuple
    rho: float

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise InputError("series ratio rho must lie in (0, 1)")
        object.__setattr__(self, "weights", tuple(float(x) for x in self.weights))

    depth = None

    def evaluate(self, w):
        return self.c + sum(self.weights[s] * self.rho**k for k, s in enumerate(w))

    def tail_midpoint(self, t: int) -> float:
        return 0.5 * (min(self.weights) + max(self.weights)) * self.rho**t / (1.0 - self.rho)

    def tail_amplitude(self, t: int) -> float:
        """Half-width of the range of the discarded tail beyond position ``t - 1``."""
        return 0.5 * (max(self.weights) - min(self.weights)) * self.rho**t / (1.0 - self.rho)

    def table(self, model, t):
        if len(self.weights) != model.k0:
            raise InputError("series weights must have one entry per symbol")
        W = model.words(t)
        w = np.asarray(self.weights)[W]
        vals = self.c + w @ (self.rho ** np.arange(t)) + self.tail_midpoint(t)
        return CylinderFunction(model, t, vals)


def table_potential(model: SubshiftModel, depth: int, values) -> TablePotential:
    return TablePotential(CylinderFunction(model, depth, values))


def constant(model: SubshiftModel, value: float, depth: int = 1) -> TablePotential:
    n = len(model.words(depth))
    return table_potential(model, depth, np.full(n, float(value)))


def evaluate(p: Potential, w: Sequence[int]) -> float:
    return p.evaluate(w)


def birkhoff_sum(p: Potential, w: Sequence[int], m: int) -> float:
    """``sum_{j<m} p(sigma^j w)``."""
    need = m if p.depth is None else m - 1 + p.depth
    if len(w) < need:
        raise InputError(f"word of length {len(w)} too short for {m} shifted evaluations")
    return sum(p.evaluate(tuple(w[j:])) for j in range(m))


def birkhoff_values(f: CylinderFunction, W: np.ndarray, m: int) -> np.ndarray:
    """Vectorised Birkhoff sums of a table at every row of ``W``."""
    if W.shape[1] < m - 1 + f.depth:
        raise InputError("words too short for Birkhoff sum")
    total = np.zeros(len(W), dtype=f.values.dtype)
    for j in range(m):
        total = total + f.on(W[:, j : j + f.depth])
    return total


def truncate_to_depth(p: Potential, model: SubshiftModel, t: int) -> CylinderFunction:
    if t < 1:
        raise InputError("depth must be >= 1")
    if p.depth is not None and t < p.depth:
        raise InputError(f"cannot truncate a depth-{p.depth} table to depth {t}")
    return p.table(model, t)


def as_table(p, model: SubshiftModel, t: int) -> CylinderFunction:
    """Accept a potential or a table and return the depth-``t`` table."""
    if isinstance(p, CylinderFunction):
        return p.lift(t)
    return truncate_to_depth(p, model, t)


def _complex_diameter(z: np.ndarray, chunk: int = 2048) -> float:
    best = 0.0
    for s in range(0, len(z), chunk):
        d = np.abs(z[s : s + chunk, None] - z[None, :])
        best = max(best, float(d.max()))
    return best


def theta_seminorm(h: CylinderFunction, theta: float) -> float:
    """Exact ``sup |h(u) - h(v)| / D_theta(u, v)`` over distinct basis words.

    Words sharing a prefix of length ``k`` form a contiguous block in basis
    order, so the supremum is ``max_k theta**-k * max_block diam(block)``.
    """
    t = h.depth
    if t > SEMINORM_COST_DEPTH:
        log.warning("exhaustive seminorm at depth %d: cost grows like the square of the basis size", t)
    W = h.model.words(t)
    vals = h.values
    cplx = np.iscomplexobj(vals)
    best = 0.0
    for k in range(t):
        if k == 0:
            starts = np.array([0])
        else:
            prefix = W[:, :k]
            change = np.any(prefix[1:] != prefix[:-1], axis=1)
            starts = np.concatenate([[0], np.nonzero(change)[0] + 1])
        if cplx:
            bounds = list(starts) + [len(vals)]
            diam = max(_complex_diameter(vals[a:b]) for a, b in zip(bounds[:-1], bounds[1:]))
        else:
            diam = float(np.max(np.maximum.reduceat(vals, starts) - np.minimum.reduceat(vals, starts)))
        best = max(best, diam / theta**k)
    return best


def sup_norm(h: CylinderFunction) -> float:
    return h.sup()
