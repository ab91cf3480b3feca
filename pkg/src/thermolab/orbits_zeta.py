"""Primitive periodic orbits, flow periods, the Ruelle zeta function and orbit counting."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import InputError
from .potentials import CylinderFunction, as_table
from .rpf import build_transfer_matrix, solve_P_f
from .subshift import SubshiftModel

log = logging.getLogger(__name__)

ENUM_CEILING = 26
LI_ABS_TOL = 1e-10
ROUNDING_ULPS = 64  # floating-point allowance added to every reported zeta error bound


def lyndon_words(k: int, n: int):
    """Lyndon words over ``{0..k-1}`` of length ``<= n`` in lexicographic order (Duval)."""
    w = [-1]
    while w:
        w[-1] += 1
        yield tuple(w)
        m = len(w)
        while len(w) < n:
            w.append(w[len(w) - m])
        while w and w[-1] == k - 1:
            w.pop()


def _cyclic_windows(W: np.ndarray, d: int) -> np.ndarray:
    """Rows of ``W`` extended periodically to length ``n + d - 1``."""
    n = W.shape[1]
    reps = -(-(n + d - 1) // n)
    return np.tile(W, (1, reps))[:, : n + d - 1]


def cyclic_birkhoff(func: CylinderFunction, W: np.ndarray) -> np.ndarray:
    """Sum of ``func`` around each periodic word (one full period)."""
    W = np.atleast_2d(W)
    n, d = W.shape[1], func.depth
    ext = _cyclic_windows(W, d)
    total = np.zeros(len(W))
    for j in range(n):
        total += func.on(ext[:, j : j + d])
    return total


@dataclass(frozen=True)
class PeriodicOrbit:
    word: tuple
    period: float

    @property
    def length(self) -> int:
        return len(self.word)


@dataclass(frozen=True, eq=False)
class OrbitTable:
    model: SubshiftModel
    n_max: int
    words: list  # Lyndon representatives, sorted by period
    lengths: np.ndarray
    periods: np.ndarray
    primitive_counts: dict
    point_counts: dict
    tau: CylinderFunction | None = None

    @property
    def tau0(self) -> float:
        return float(self.tau.values.min()) if self.tau is not None else 1.0

    def orbits(self):
        return [PeriodicOrbit(w, float(p)) for w, p in zip(self.words, self.periods)]

    def __len__(self):
        return len(self.words)


def enumeration_cost(k0: int, n_max: int) -> float:
    return sum(k0**n / n for n in range(1, n_max + 1))


def enumerate_primitive_orbits(model: SubshiftModel, n_max: int, tau=None,
                               ceiling: int = ENUM_CEILING) -> OrbitTable:
    """All primitive cycles up to symbolic length ``n_max``; periods from ``tau`` (default 1)."""
    if n_max < 1:
        raise InputError("n_max must be >= 1")
    if n_max > ceiling:
        raise InputError(f"n_max={n_max} above enumeration ceiling {ceiling} "
                         f"(about {enumeration_cost(model.k0, n_max):.2e} candidate words)")
    A = model.A
    by_len: dict[int, list] = {}
    for w in lyndon_words(model.k0, n_max):
        by_len.setdefault(len(w), []).append(w)
    if tau is None:
        tau_t = CylinderFunction(model, 1, np.ones(model.k0))
    else:
        d = tau.depth if tau.depth is not None else 8
        tau_t = as_table(tau, model, d)
    words, lengths, periods = [], [], []
    prim = {}
    for n in range(1, n_max + 1):
        cand = by_len.get(n, [])
        W = np.array(cand, dtype=np.int8).reshape(-1, n).astype(np.int64)
        ok = A[W[:, -1], W[:, 0]] == 1
        for i in range(n - 1):
            ok &= A[W[:, i], W[:, i + 1]] == 1
        W = W[ok]
        prim[n] = len(W)
        if len(W):
            words.extend(itertools.compress(cand, ok))
            lengths.append(np.full(len(W), n))
            periods.append(cyclic_birkhoff(tau_t, W))
    lengths = np.concatenate(lengths) if lengths else np.zeros(0, dtype=np.int64)
    periods = np.concatenate(periods) if periods else np.zeros(0)
    order = np.argsort(periods, kind="stable")
    words = [words[i] for i in order]
    points = {}
    P = np.eye(model.k0, dtype=object)
    Aobj = A.astype(object)
    for n in range(1, n_max + 1):
        P = P.dot(Aobj)
        points[n] = int(np.trace(P))
    return OrbitTable(model, n_max, words, lengths[order], periods[order], prim, points, tau_t)


def divisor_identity(table: OrbitTable) -> bool:
    """``sum_{d | n} d L(d) = tr(A^n)`` for every ``n <= n_max``."""
    L = table.primitive_counts
    return all(sum(d * L[d] for d in range(1, n + 1) if n % d == 0) == table.point_counts[n]
               for n in range(1, table.n_max + 1))


def orbit_period(orbit, tau, model: SubshiftModel | None = None) -> float:
    """Birkhoff sum of ``tau`` once around the cycle."""
    word = orbit.word if isinstance(orbit, PeriodicOrbit) else tuple(orbit)
    if isinstance(tau, CylinderFunction):
        t = tau
    else:
        if model is None:
            raise InputError("model needed for a non-table roof")
        t = as_table(tau, model, tau.depth if tau.depth is not None else 8)
    return float(cyclic_birkhoff(t, np.array([word]))[0])


def entropy_hT(model: SubshiftModel, tau) -> float:
    """Zero of ``s -> pressure(-s tau)``."""
    d = tau.depth if tau.depth is not None else 8
    zero = CylinderFunction(model, 1, np.zeros(model.k0))
    return solve_P_f(model, zero, tau, d)


def li(x: float) -> float:
    """``int_2^x du / log u`` (negative for ``1 < x < 2``)."""
    if x <= 1:
        raise InputError("li(x) needs x > 1")
    if x == 2:
        return 0.0
    lo, hi, sign = (2.0, x, 1.0) if x > 2 else (x, 2.0, -1.0)
    val, err = integrate.quad(lambda u: 1.0 / math.log(u), lo, hi, epsabs=LI_ABS_TOL, epsrel=1e-13, limit=500)
    return sign * val


def _check_complete(table: OrbitTable, lam: float):
    if table.n_max * table.tau0 < lam:
        raise InputError(f"orbit table may be incomplete at lambda={lam}; "
                         f"need n_max >= {math.ceil(lam / table.tau0)}")


def count_pi(table: OrbitTable, lam: float) -> int:
    """Number of primitive orbits with period ``<= lam``."""
    _check_complete(table, lam)
    return int(np.searchsorted(table.periods, lam * (1 + 1e-12), side="right"))


def poc_rows(table: OrbitTable, hT: float, lams):
    """``(lam, pi(lam), li(e^{hT lam}), ratio)`` per grid point."""
    rows = []
    for lam in lams:
        p = count_pi(table, lam)
        x = math.exp(hT * lam)
        L = li(x) if x > 1 else math.nan
        rows.append((float(lam), p, L, p / L if L and L > 0 else math.nan))
    return rows


# ----------------------------------------------------------------- zeta


@dataclass
class ZetaValue:
    s: complex
    value: complex
    tail_bound: float
    mode: str
    n_max: int


def _log1m(z: np.ndarray) -> np.ndarray:
    """``log(1 - z)`` without cancellation for small ``|z|`` (numpy's complex log1p is naive)."""
    out = np.empty_like(z)
    small = np.abs(z) < 1e-3
    zs = z[small]
    # |z|^6 / 6 < 1e-18 beyond the last kept term
    out[small] = -zs * (1 + zs * (1 / 2 + zs * (1 / 3 + zs * (1 / 4 + zs / 5))))
    out[~small] = np.log(1.0 - z[~small])
    return out


def _zeta_matrix(model, tau, s, t):
    tau_t = as_table(tau, model, t)
    return build_transfer_matrix(model, CylinderFunction(model, t, -s * tau_t.values), t)


def tail_bound(model: SubshiftModel, tau, s: complex, n_max: int) -> float:
    """Bound on ``sum_{n > n_max} |Z_n(s)| / n`` from the spectrum at ``Re s``.

    Bounds the log-error of both truncations; returned as an absolute error
    bound on the zeta value through ``|e^z - 1| <= |z| e^{|z|}``.
    """
    d = tau.depth if tau.depth is not None else 8
    M = _zeta_matrix(model, tau, complex(s).real, d).dense()
    mu = np.abs(np.linalg.eigvals(M))
    if np.any(mu >= 1):
        return math.inf
    m = n_max + 1
    return float(np.sum(mu**m / (m * (1.0 - mu))))


def zeta_truncated(model: SubshiftModel, tau, s: complex, n_max: int, mode: str = "trace-log",
                   table: OrbitTable | None = None) -> ZetaValue:
    """Truncated ``prod_gamma (1 - e^{-s l(gamma)})^{-1}``.

    ``orbit-product`` multiplies over enumerated primitive orbits; ``trace-log``
    sums ``tr(M_s^n) / n`` for ``n <= n_max`` with ``M_s`` the transfer matrix of ``-s tau``.
    """
    s = complex(s)
    d = tau.depth if tau.depth is not None else 8
    hT = entropy_hT(model, tau)
    if s.real <= hT:
        log.warning("Re(s)=%.4f <= h_T=%.4f: truncation does not converge", s.real, hT)
    if mode == "trace-log":
        M = _zeta_matrix(model, tau, s, d).dense()
        P = np.eye(M.shape[0], dtype=complex)
        total = 0j
        for n in range(1, n_max + 1):
            P = P @ M
            total += np.trace(P) / n
        value = np.exp(total)
    elif mode == "orbit-product":
        if table is None or table.n_max < n_max:
            table = enumerate_primitive_orbits(model, n_max, tau)
        keep = table.lengths <= n_max
        z = np.exp(-s * table.periods[keep])
        value = np.exp(-np.sum(_log1m(z)))
    else:
        raise InputError(f"unknown zeta mode {mode!r}")
    eps = tail_bound(model, tau, s, n_max) if s.real > hT else math.inf
    bound = abs(value) * (eps * math.exp(eps) + ROUNDING_ULPS * np.finfo(float).eps) if math.isfinite(eps) else math.inf
    return ZetaValue(s, complex(value), bound, mode, n_max)


# ----------------------------------------------------------------- weighted counts


@dataclass
class WeightedCount:
    T: float
    value: float
    pressure: float
    li_reference: float


def weighted_pi_F(table: OrbitTable, F, T: float) -> WeightedCount:
    """``sum_{l(gamma) <= T} e^{F-sum around gamma}`` with ``li(e^{Pr(F) T})`` for reference."""
    _check_complete(table, T)
    model = table.model
    d = F.depth if F.depth is not None else 8
    Ft = as_table(F, model, d)
    k = count_pi(table, T)
    total = 0.0
    by_len: dict[int, list] = {}
    for i in range(k):
        by_len.setdefault(len(table.words[i]), []).append(table.words[i])
    for n, ws in by_len.items():
        total += float(np.sum(np.exp(cyclic_birkhoff(Ft, np.array(ws)))))
    pr = solve_P_f(model, Ft, table.tau, max(d, table.tau.depth))
    x = math.exp(pr * T)
    ref = li(x) if x > 1 else math.nan
    return WeightedCount(T, total, pr, ref)
