"""One-sided subshifts of finite type, words, cylinders and the metric D_theta.

Points of the shift space are handled through finite words: a function of
the first ``t`` coordinates is a vector indexed by the admissible words of
length ``t`` in lexicographic order.  That ordering is the canonical basis
everywhere in the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

from .errors import InputError, NotPrimitiveError

Word = Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class SubshiftModel:
    """Alphabet ``{0..k0-1}``, 0/1 transition matrix ``A`` and metric base ``theta``."""

    A: np.ndarray
    theta: float = 0.5
    M0: int | None = None
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=np.int64)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InputError("matrix not square")
        if A.shape[0] < 2:
            raise InputError("alphabet size must be at least 2")
        if not np.all((A == 0) | (A == 1)):
            raise InputError("matrix entries must be 0 or 1")
        if np.any(A.sum(axis=1) == 0) or np.any(A.sum(axis=0) == 0):
            raise InputError("every row and column of A needs at least one 1")
        if not 0.0 < float(self.theta) < 1.0:
            raise InputError("theta must lie in (0, 1)")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "theta", float(self.theta))
        if self.M0 is not None:
            P = np.linalg.matrix_power(A, int(self.M0))
            if not np.all(P > 0):
                raise InputError(f"A^{self.M0} is not strictly positive")

    @property
    def k0(self) -> int:
        return self.A.shape[0]

    def words(self, n: int) -> np.ndarray:
        """Admissible words of length ``n`` as an ``(count, n)`` int array, lexicographic."""
        return self._words_and_codes(n)[0]

    def codes(self, n: int) -> np.ndarray:
        return self._words_and_codes(n)[1]

    def _words_and_codes(self, n):
        if n < 1:
            raise InputError("word length must be >= 1")
        key = ("words", n)
        if key not in self._cache:
            if n == 1:
                W = np.arange(self.k0, dtype=np.int64)[:, None]
            else:
                prev = self.words(n - 1)
                rows, cols = np.nonzero(self.A[prev[:, -1]])
                W = np.concatenate([prev[rows], cols[:, None]], axis=1)
            W.setflags(write=False)
            codes = encode(W, self.k0)
            self._cache[key] = (W, codes)
        return self._cache[key]

    def index(self, W: np.ndarray) -> np.ndarray:
        """Basis positions of the rows of ``W`` among the words of the same length.

        Rows must be admissible; a non-admissible row raises ``InputError``.
        """
        W = np.atleast_2d(np.asarray(W, dtype=np.int64))
        codes = self.codes(W.shape[1])
        c = encode(W, self.k0)
        pos = np.searchsorted(codes, c)
        pos_clipped = np.minimum(pos, len(codes) - 1)
        if np.any(codes[pos_clipped] != c):
            raise InputError("word not admissible")
        return pos_clipped

    def preimage_table(self, t: int):
        """For depth-``t`` words ``x``: all one-symbol prepends ``j x``.

        Returns ``(rows, ext, target)`` where ``ext`` holds the extended words of
        length ``t + 1``, ``rows`` the index of ``x`` and ``target`` the index of
        ``(j x)[:t]``.
        """
        key = ("pre", t)
        if key not in self._cache:
            X = self.words(t)
            js, rows = np.nonzero(self.A[:, X[:, 0]])
            order = np.lexsort((js, rows))
            js, rows = js[order], rows[order]
            ext = np.concatenate([js[:, None], X[rows]], axis=1)
            target = self.index(ext[:, :t])
            self._cache[key] = (rows, ext, target)
        return self._cache[key]


def encode(W: np.ndarray, k0: int) -> np.ndarray:
    W = np.asarray(W, dtype=np.int64)
    powers = k0 ** np.arange(W.shape[1] - 1, -1, -1, dtype=np.int64)
    return W @ powers


@dataclass(frozen=True)
class Cylinder:
    word: Word

    @property
    def depth(self) -> int:
        return len(self.word)

    def diam(self, theta: float) -> float:
        return theta ** self.depth


def _check_symbols(model: SubshiftModel, w: Sequence[int]):
    for s in w:
        if not (0 <= int(s) < model.k0):
            raise InputError(f"symbol {s} out of range for alphabet of size {model.k0}")


def is_admissible(model: SubshiftModel, w: Sequence[int]) -> bool:
    _check_symbols(model, w)
    return all(model.A[w[i], w[i + 1]] == 1 for i in range(len(w) - 1))


def enumerate_words(model: SubshiftModel, n: int) -> list[Word]:
    """All admissible words of length ``n`` in lexicographic order."""
    if n < 1:
        raise InputError("n must be >= 1")
    return [tuple(int(s) for s in row) for row in model.words(n)]


def check_aperiodic(model: SubshiftModel) -> int:
    """Smallest ``M0 <= k0**2`` with ``A**M0`` strictly positive."""
    A = model.A
    P = np.eye(model.k0, dtype=np.int64)
    for m in range(1, model.k0 ** 2 + 1):
        P = np.minimum(P @ A, 1)
        if np.all(P > 0):
            return m
    raise NotPrimitiveError("transition matrix is not primitive (no positive power up to k0^2)")


def common_prefix_len(u: Sequence[int], v: Sequence[int]) -> int:
    if len(u) != len(v):
        raise InputError("words must have equal length")
    n = 0
    for a, b in zip(u, v):
        if a != b:
            break
        n += 1
    return n


def d_theta(model: SubshiftModel, u: Sequence[int], v: Sequence[int]) -> float:
    if not (is_admissible(model, u) and is_admissible(model, v)):
        raise InputError("words must be admissible")
    n = common_prefix_len(u, v)
    if n == len(u):
        return 0.0
    return model.theta ** n


def prefix_groups(W: np.ndarray, k: int, k0: int) -> np.ndarray:
    """Group label per row: equal labels iff the rows share their first ``k`` symbols."""
    if k == 0:
        return np.zeros(len(W), dtype=np.int64)
    return encode(W[:, :k], k0)


def cpl_matrix(W: np.ndarray) -> np.ndarray:
    """Pairwise common-prefix lengths of the rows of ``W``."""
    n, t = W.shape
    out = np.zeros((n, n), dtype=np.int64)
    alive = np.ones((n, n), dtype=bool)
    for i in range(t):
        alive &= W[:, None, i] == W[None, :, i]
        out += alive
    return out
