"""Transfer matrices on cylinder spaces and Ruelle-Perron-Frobenius eigendata.

For a potential ``g`` depending on at most ``t + 1`` coordinates the space of
depth-``t`` functions is invariant under ``L_g``, so the matrices built here
act exactly, with no truncation error.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InputError, NumericalError
from .potentials import CylinderFunction, Potential, as_table
from .subshift import Cylinder, SubshiftModel, check_aperiodic

log = logging.getLogger(__name__)

POWER_TOL = 1e-13
POWER_STREAK = 10
DENSE_LIMIT = 4096
DEFAULT_A0 = 0.1


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    model: SubshiftModel
    depth: int
    matrix: sp.csr_matrix
    potential: CylinderFunction

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def __matmul__(self, h):
        return self.matrix @ h


def _potential_table(model, g, t):
    """Depth-``t`` or depth-``t+1`` table for ``g`` (deeper tables are rejected)."""
    if isinstance(g, CylinderFunction):
        if g.depth > t + 1:
            raise InputError(f"potential depth {g.depth} exceeds matrix depth {t} + 1")
        return g
    if isinstance(g, Potential) and g.depth is not None and g.depth > t + 1:
        raise InputError(f"potential depth {g.depth} exceeds matrix depth {t} + 1")
    d = t if (g.depth is None or g.depth <= t) else t + 1
    return as_table(g, model, d)


def build_transfer_matrix(model: SubshiftModel, g, t: int, weights=None) -> TransferMatrix:
    """Matrix of ``(L_g h)(x) = sum_{j: A[j, x0] = 1} e^{g(jx)} h(jx)`` on depth-``t`` functions.

    ``weights`` optionally multiplies each entry by a further factor evaluated on the
    extended word (used for the complex phase ``e^{-i b tau}``).
    """
    if t < 1:
        raise InputError("depth must be >= 1")
    gt = _potential_table(model, g, t)
    rows, ext, target = model.preimage_table(t)
    vals = np.exp(gt.on(ext))
    if weights is not None:
        vals = vals * weights(ext)
    n = len(model.words(t))
    M = sp.csr_matrix((vals, (rows, target)), shape=(n, n))
    return TransferMatrix(model, t, M, gt)


@dataclass(frozen=True, eq=False)
class RpfData:
    """Leading eigenvalue, eigenfunction, eigenmeasure and Gibbs measure."""

    model: SubshiftModel
    depth: int
    lam: float
    h: np.ndarray
    nu_hat: np.ndarray
    nu: np.ndarray
    potential: CylinderFunction
    iterations: int = 0
    method: str = "power"

    @property
    def pressure(self) -> float:
        return float(np.log(self.lam))

    def h_function(self) -> CylinderFunction:
        return CylinderFunction(self.model, self.depth, self.h)

    def normalized_potential(self) -> CylinderFunction:
        """``g + ln h - ln h o sigma - ln lambda`` as a depth-``t+1`` table."""
        t = self.depth
        W1 = self.model.words(t + 1)
        g = self.potential.on(W1)
        lh = np.log(self.h)
        idx0 = self.model.index(W1[:, :t])
        idx1 = self.model.index(W1[:, 1:])
        vals = g + lh[idx0] - lh[idx1] - np.log(self.lam)
        return CylinderFunction(self.model, t + 1, vals)


def _power_iterate(M, x0, max_iter):
    x = x0 / x0.sum()
    lam_prev = None
    streak = 0
    trace = []
    for it in range(1, max_iter + 1):
        y = M @ x
        lam = y.sum() / x.sum()
        y = y / y.sum()
        change = np.max(np.abs(y - x)) / np.max(np.abs(y))
        if lam_prev is not None:
            change = max(change, abs(lam - lam_prev) / abs(lam))
        trace.append(change)
        x = y
        lam_prev = lam
        streak = streak + 1 if change < POWER_TOL else 0
        if streak >= POWER_STREAK:
            return lam, x, it, True, trace
    return lam_prev, x, max_iter, False, trace


def _dense_perron(D):
    w, V = np.linalg.eig(D)
    i = int(np.argmax(w.real))
    lam = w[i].real
    v = np.real(V[:, i])
    v = v / v.sum()
    return lam, v


def leading_triple(M: TransferMatrix, max_iter: int = 20000) -> RpfData:
    """Leading eigenvalue with positive right eigenfunction and left eigenmeasure."""
    n = M.dim
    ones = np.ones(n)
    lam_r, h, it_r, ok_r, tr_r = _power_iterate(M.matrix, ones, max_iter)
    lam_l, nu_hat, it_l, ok_l, tr_l = _power_iterate(M.matrix.T.tocsr(), ones, max_iter)
    method = "power"
    if not (ok_r and ok_l):
        if n > DENSE_LIMIT:
            raise NumericalError(
                f"power iteration did not converge in {max_iter} steps (dimension {n})",
                trace=tr_r[-20:] + tr_l[-20:],
            )
        log.info("power iteration slow (dim %d); using dense eigensolver", n)
        D = M.dense()
        lam_r, h = _dense_perron(D)
        lam_l, nu_hat = _dense_perron(D.T)
        method = "dense"
    if np.any(h <= 0) or np.any(nu_hat < 0) or not np.isfinite(lam_r):
        raise NumericalError("Perron vectors not positive; is A primitive?")
    nu_hat = nu_hat / nu_hat.sum()
    h = h / float(h @ nu_hat)
    nu = h * nu_hat
    nu = nu / nu.sum()
    return RpfData(M.model, M.depth, float(lam_r), h, nu_hat, nu, M.potential, max(it_r, it_l), method)


def rpf(model: SubshiftModel, g, t: int) -> RpfData:
    return leading_triple(build_transfer_matrix(model, g, t))


def pressure(model: SubshiftModel, g, t: int) -> float:
    return rpf(model, g, t).pressure


def _combine(model, f, tau, s, t):
    ft = as_table(f, model, t).values
    taut = as_table(tau, model, t).values
    return CylinderFunction(model, t, ft - s * taut)


def solve_P_f(model: SubshiftModel, f, tau, t: int, tol: float = 1e-12) -> float:
    """Root ``s*`` of ``s -> pressure(f - s tau)`` by bracketed bisection."""
    taut = as_table(tau, model, t)
    tau0 = float(taut.values.min())
    tau1 = float(taut.values.max())
    if tau0 <= 0:
        raise InputError("roof must be >= tau0 > 0")

    def p(s):
        return pressure(model, _combine(model, f, tau, s, t), t)

    p0 = p(0.0)
    if p0 == 0.0:
        return 0.0
    # slope lies in [-tau1, -tau0]
    if p0 > 0:
        lo, hi = p0 / tau1, p0 / tau0
    else:
        lo, hi = p0 / tau0, p0 / tau1
    plo, phi = p(lo), p(hi)
    width = max(hi - lo, 1.0)
    for _ in range(200):
        if plo >= 0 >= phi:
            break
        lo, hi = lo - width, hi + width
        width *= 2
        plo, phi = p(lo), p(hi)
    else:
        raise NumericalError("could not bracket the zero of the pressure")
    mid = 0.5 * (lo + hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        pm = p(mid)
        if abs(pm) < tol or hi - lo < 1e-15 * max(1.0, abs(mid)):
            return mid
        if pm > 0:
            lo = mid
        else:
            hi = mid
    return mid


def gibbs_cylinder_measure(data: RpfData, C) -> float:
    """``nu(C)``; cylinders deeper than the eigendata use the normalised operator."""
    word = tuple(C.word if isinstance(C, Cylinder) else C)
    model, t = data.model, data.depth
    n = len(word)
    if n == 0:
        return 1.0
    W = model.words(t)
    if n <= t:
        mask = np.all(W[:, :n] == np.asarray(word)[None, :], axis=1)
        return float(data.nu[mask].sum())
    # nu(C) = int M^n chi_C dnu, with M the normalised operator
    f0 = data.normalized_potential()
    ok = model.A[word[-1], W[:, 0]] == 1
    X = W[ok]
    full = np.concatenate([np.broadcast_to(np.asarray(word), (len(X), n)), X], axis=1)
    total = np.zeros(len(X))
    for k in range(n):
        total += f0.on(full[:, k : k + t + 1])
    return float(np.sum(data.nu[ok] * np.exp(total)))


@dataclass(frozen=True, eq=False)
class NormalizedPotential:
    """``f^(a)`` together with the eigendata it was built from."""

    fa: CylinderFunction
    a: float
    P_f: float
    lam: float
    h: CylinderFunction
    tau: CylinderFunction
    f: CylinderFunction
    data: RpfData

    @property
    def depth(self) -> int:
        return self.h.depth

    def operator(self) -> TransferMatrix:
        return build_transfer_matrix(self.fa.model, self.fa, self.depth)


def normalize_potential(model: SubshiftModel, f, tau, a: float, t: int, a0: float = DEFAULT_A0,
                        P_f: float | None = None) -> NormalizedPotential:
    """``f^(a) = f - (P_f + a) tau + ln h_a - ln h_a o sigma - ln lambda_a``."""
    if abs(a) > a0:
        raise InputError(f"|a| = {abs(a)} exceeds a0 = {a0}")
    if P_f is None:
        P_f = solve_P_f(model, f, tau, t)
    F = _combine(model, f, tau, P_f + a, t)
    data = rpf(model, F, t)
    if np.any(data.h <= 0):
        raise NumericalError("eigenfunction h_a not strictly positive")
    fa = data.normalized_potential()
    return NormalizedPotential(fa, a, P_f, data.lam, data.h_function(), as_table(tau, model, t),
                               as_table(f, model, t), data)


def _subleading_modulus(D: np.ndarray) -> float:
    w = np.linalg.eigvals(D)
    mod = np.sort(np.abs(w))[::-1]
    return float(mod[1]) if len(mod) > 1 else 0.0


def mixing_rate(norm: NormalizedPotential) -> float:
    """Modulus of the second eigenvalue of the normalised operator ``M_0``."""
    if norm.a != 0:
        raise InputError("mixing rate is defined for the a = 0 normalisation")
    M = norm.operator()
    if M.dim > DENSE_LIMIT:
        raise NumericalError("dimension too large for dense eigensolver")
    try:
        return _subleading_modulus(M.dense())
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc


def birkhoff_of(func: CylinderFunction, word, m: int) -> float:
    """Birkhoff sum of a table along ``word`` (length at least ``m - 1 + depth``)."""
    W = np.asarray(word)[None, :]
    return float(sum(func.on(W[:, j : j + func.depth])[0] for j in range(m)))


def check_primitive(model: SubshiftModel) -> int:
    return check_aperiodic(model)
