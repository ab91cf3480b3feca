"""Suspension semiflow over a subshift, its invariant measure and correlations.

A point of the suspension is ``(x, u)`` with ``0 <= u < tau(x)``; the flow moves
``u`` upward at unit speed and jumps ``(x, tau(x)) -> (sigma x, 0)``.  The
invariant probability is ``dmu(x) du / int tau dmu`` with ``mu`` the Gibbs
measure of ``f - P_f tau``.

Observables are a locally constant base function times a piecewise-polynomial
height profile.  Along a fiber the flowed observable is piecewise polynomial
in ``u`` with breaks at the roof crossings, so every height integral below is
computed exactly with Gauss-Legendre nodes; only the base is either enumerated
(quadrature), propagated exactly along the window chain when the roof values
sit on a lattice (renewal), or sampled (Monte Carlo).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .potentials import CylinderFunction, as_table
from .rpf import normalize_potential, solve_P_f
from .subshift import SubshiftModel

log = logging.getLogger(__name__)

MAX_QUAD_DEPTH = 16
DEFAULT_SEED = 20240601
DEFAULT_SAMPLES = 20000


@dataclass(frozen=True, eq=False)
class HeightProfile:
    """Piecewise polynomial on ``[breaks[0], breaks[-1]]``, zero outside.

    ``coeffs[i]`` holds ascending power coefficients in the absolute height ``s``
    on ``[breaks[i], breaks[i+1])``.
    """

    breaks: np.ndarray
    coeffs: tuple

    def __post_init__(self):
        br = np.asarray(self.breaks, dtype=float)
        if br.ndim != 1 or len(br) < 2 or np.any(np.diff(br) <= 0):
            raise InputError("height profile breaks must be strictly increasing")
        if len(self.coeffs) != len(br) - 1:
            raise InputError("one coefficient list per profile piece")
        object.__setattr__(self, "breaks", br)
        object.__setattr__(self, "coeffs", tuple(np.atleast_1d(np.asarray(c, dtype=float)) for c in self.coeffs))

    @property
    def degree(self) -> int:
        return max(len(c) for c in self.coeffs) - 1

    @property
    def support(self) -> tuple[float, float]:
        return float(self.breaks[0]), float(self.breaks[-1])

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for i, c in enumerate(self.coeffs):
            m = (s >= self.breaks[i]) & (s < self.breaks[i + 1])
            out[m] = np.polynomial.polynomial.polyval(s[m], c)
        return out

    def sup(self) -> float:
        s = np.linspace(self.breaks[0], min(self.breaks[-1], self.breaks[0] + 1e3), 4001)
        return float(np.max(np.abs(self(s[:-1])))) if len(s) > 1 else 0.0

    @classmethod
    def constant(cls, value: float = 1.0, upto: float = math.inf) -> "HeightProfile":
        return cls([0.0, upto], ([value],))

    @classmethod
    def bump(cls, width: float = 1.0, scale: float | None = None) -> "HeightProfile":
        """``scale * s^2 (width - s)^2`` on ``[0, width]``; unit integral by default."""
        w = float(width)
        scale = 30.0 / w**5 if scale is None else scale
        c = np.polynomial.polynomial.polymul([0, 0, 1], [w * w, -2 * w, 1]) * scale
        return cls([0.0, w], (c,))


@dataclass(frozen=True, eq=False)
class Observable:
    base: CylinderFunction
    profile: HeightProfile = field(default_factory=HeightProfile.constant)

    def sup(self) -> float:
        return self.base.sup() * self.profile.sup()


def observable(model: SubshiftModel, base=None, profile: HeightProfile | None = None) -> Observable:
    if base is None:
        base = CylinderFunction(model, 1, np.ones(model.k0))
    return Observable(base, profile or HeightProfile.constant())


def pair_integral(alpha: HeightProfile, beta: HeightProfile | None, c, lo, hi) -> np.ndarray:
    """``int_lo^hi alpha(u) beta(u + c) du`` elementwise, exact for polynomial pieces."""
    c, lo, hi = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (c, lo, hi)))
    deg = alpha.degree + (beta.degree if beta is not None else 0)
    xg, wg = np.polynomial.legendre.leggauss(deg // 2 + 1)
    out = np.zeros(c.shape)
    bpieces = [(-math.inf, math.inf, np.array([1.0]))] if beta is None else [
        (beta.breaks[j], beta.breaks[j + 1], beta.coeffs[j]) for j in range(len(beta.coeffs))]
    for i, ca in enumerate(alpha.coeffs):
        for b0, b1, cb in bpieces:
            L = np.maximum.reduce([lo, np.full(c.shape, alpha.breaks[i]), b0 - c])
            R = np.minimum.reduce([hi, np.full(c.shape, alpha.breaks[i + 1]), b1 - c])
            ok = R > L
            if not ok.any():
                continue
            Lk, Rk, ck = L[ok], R[ok], c[ok]
            half = 0.5 * (Rk - Lk)
            u = Lk[:, None] + half[:, None] * (xg[None, :] + 1.0)
            val = np.polynomial.polynomial.polyval(u, ca)
            if beta is not None:
                val = val * np.polynomial.polynomial.polyval(u + ck[:, None], cb)
            out[ok] += half * (val @ wg)
    return out


@dataclass(frozen=True, eq=False)
class SuspensionModel:
    base: SubshiftModel
    roof: CylinderFunction
    g: CylinderFunction  # normalized potential of depth ``depth + 1``
    nu: np.ndarray  # Gibbs measure on depth-``depth`` words
    depth: int
    mean_roof: float
    P_f: float
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    @property
    def tau0(self) -> float:
        return float(self.roof.values.min())

    @property
    def tau_max(self) -> float:
        return float(self.roof.values.max())

    def measure(self, n: int) -> np.ndarray:
        """Gibbs measure of the length-``n`` cylinders, extended by ``nu(jC) = e^{g(jC)} nu(C)``."""
        if n <= self.depth:
            W = self.base.words(self.depth)
            codes = self.base.index(W[:, :n])
            return np.bincount(codes, weights=self.nu, minlength=len(self.base.words(n)))
        if n not in self._cache:
            prev = self.measure(n - 1)
            W = self.base.words(n)
            self._cache[n] = np.exp(self.g.on(W[:, : self.depth + 1])) * prev[self.base.index(W[:, 1:])]
        return self._cache[n]

    def transition(self) -> tuple[np.ndarray, np.ndarray]:
        """Forward window chain: ``P[w, j] = nu(w j) / nu(w)`` over depth-``depth`` windows ``w``."""
        t = self.depth
        W1 = self.base.words(t + 1)
        nu1 = self.measure(t + 1)
        w_idx = self.base.index(W1[:, :t])
        P = np.zeros((len(self.nu), self.base.k0))
        P[w_idx, W1[:, -1]] = nu1 / self.nu[w_idx]
        nxt = np.full((len(self.nu), self.base.k0), -1, dtype=np.int64)
        nxt[w_idx, W1[:, -1]] = self.base.index(W1[:, 1:])
        return P, nxt


def suspension_model(model: SubshiftModel, roof, f=None, depth: int | None = None) -> SuspensionModel:
    """Build the suspension; ``f`` defaults to zero (measure of maximal entropy of the flow)."""
    rd = roof.depth if roof.depth is not None else 8
    fd = 1 if f is None else (f.depth if f.depth is not None else rd)
    t = max(depth or 1, rd, fd)
    tau = as_table(roof, model, t)
    if tau.values.min() <= 0:
        raise InputError("roof must be >= tau0 > 0")
    f = CylinderFunction(model, 1, np.zeros(model.k0)) if f is None else f
    P_f = solve_P_f(model, f, tau, t)
    norm = normalize_potential(model, f, tau, 0.0, t, P_f=P_f)
    nu = norm.data.nu
    return SuspensionModel(model, tau, norm.fa, nu, t, float(nu @ tau.values), P_f)


def invariant_integral(model: SuspensionModel, H: Observable) -> float:
    """``int_R int_0^{tau(x)} H(x, s) ds dmu / int tau dmu`` over depth-``t`` cylinders."""
    n = max(model.depth, H.base.depth)
    W = model.base.words(n)
    mu = model.measure(n)
    tau = model.roof.on(W)
    inner = pair_integral(H.profile, None, 0.0, np.zeros(len(W)), tau)
    return float(np.sum(mu * H.base.on(W) * inner) / model.mean_roof)


# ----------------------------------------------------------------- flow sums


def _fiber_terms(model, A: Observable, B: Observable, X: np.ndarray, t: float, kmax: int) -> np.ndarray:
    """``a(x) sum_k b(sigma^k x) int alpha(u) beta(u + t - S_k) du`` per row of ``X``.

    The ``u``-range for crossing count ``k`` is ``[max(0, S_k - t), min(tau(x), S_{k+1} - t))``.
    """
    tau_d, b_d = model.roof.depth, B.base.depth
    taus = np.stack([model.roof.on(X[:, k : k + tau_d]) for k in range(kmax + 1)], axis=1)
    S = np.concatenate([np.zeros((len(X), 1)), np.cumsum(taus, axis=1)], axis=1)
    a = A.base.on(X[:, : A.base.depth])
    total = np.zeros(len(X))
    tau_x = taus[:, 0]
    for k in range(kmax + 1):
        lo = np.maximum(0.0, S[:, k] - t)
        hi = np.minimum(tau_x, S[:, k + 1] - t)
        live = hi > lo
        if not live.any():
            continue
        b = B.base.on(X[live, k : k + b_d])
        total[live] += b * pair_integral(A.profile, B.profile, t - S[live, k], lo[live], hi[live])
    return a * total


def _kmax_for(model, B, n):
    return n - max(model.roof.depth, B.base.depth)


def quadrature_depth(model: SuspensionModel, A: Observable, B: Observable, t: float,
                     ceiling: int = MAX_QUAD_DEPTH) -> int | None:
    """Smallest enumeration depth resolving the flow up to time ``t``, or None above ``ceiling``."""
    start = max(model.depth, A.base.depth, B.base.depth, model.roof.depth + 1)
    for n in range(start, ceiling + 1):
        kmax = _kmax_for(model, B, n)
        if kmax < 0:
            continue
        W = model.base.words(n)
        taus = np.stack([model.roof.on(W[:, k : k + model.roof.depth]) for k in range(kmax + 1)], axis=1)
        # crossings beyond kmax contribute nothing once S_{kmax+1} - tau(x) >= t
        if np.all(taus[:, 1:].sum(axis=1) >= t):
            return n
    return None


def raw_correlation_quad(model: SuspensionModel, A: Observable, B: Observable, t: float, n: int) -> float:
    W = model.base.words(n)
    mu = model.measure(n)
    vals = _fiber_terms(model, A, B, W, t, _kmax_for(model, B, n))
    return float(mu @ vals / model.mean_roof)


@dataclass(frozen=True, eq=False)
class PathSample:
    """Base paths drawn from the Gibbs-Markov chain, shared across a time grid."""

    X: np.ndarray
    seed: int

    @property
    def size(self) -> int:
        return len(self.X)


def sample_paths(model: SuspensionModel, length: int, samples: int = DEFAULT_SAMPLES,
                 seed: int = DEFAULT_SEED) -> PathSample:
    rng = np.random.default_rng(seed)
    t = model.depth
    W = model.base.words(t)
    if length < t:
        raise InputError("path length shorter than the measure depth")
    P, nxt = model.transition()
    state = rng.choice(len(W), size=samples, p=model.nu / model.nu.sum())
    cols = [W[state]]
    cum = np.cumsum(P, axis=1)
    for _ in range(length - t):
        r = rng.random(samples)
        j = np.minimum((r[:, None] > cum[state]).sum(axis=1), model.base.k0 - 1)
        cols.append(j[:, None])
        state = nxt[state, j]
    return PathSample(np.concatenate(cols, axis=1), seed)


def path_length_for(model: SuspensionModel, B: Observable, t_max: float) -> int:
    kmax = int(math.ceil(t_max / model.tau0)) + 1
    return max(model.depth, kmax + max(model.roof.depth, B.base.depth))


def raw_correlation_mc(model: SuspensionModel, A: Observable, B: Observable, t: float,
                       paths: PathSample) -> tuple[float, float]:
    """Monte-Carlo ``int A (B o phi_t) dm`` and its standard error."""
    kmax = _kmax_for(model, B, paths.X.shape[1])
    if kmax * model.tau0 < t:
        raise InputError("sampled paths too short for the requested time")
    vals = _fiber_terms(model, A, B, paths.X, t, kmax) / model.mean_roof
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals)))


def roof_lattice(values, max_div: int = 64, max_steps: int = 100000):
    """Write roof values as ``alpha + beta * n`` with integer ``n >= 0`` if possible.

    Returns ``(alpha, beta, n)`` or None.
    """
    v = np.asarray(values, dtype=float)
    alpha = float(v.min())
    d = v - alpha
    scale = max(1.0, float(v.max()))
    nz = d[d > 1e-12 * scale]
    if not len(nz):
        return alpha, 1.0, np.zeros(len(v), dtype=np.int64)
    base = float(nz.min())
    for q in range(1, max_div + 1):
        beta = base / q
        n = d / beta
        r = np.round(n)
        if np.all(np.abs(n - r) < 1e-7 * np.maximum(1.0, r)) and r.max() <= max_steps:
            return alpha, beta, r.astype(np.int64)
    return None


def renewal_applicable(model: SuspensionModel, A: Observable, B: Observable) -> bool:
    """Exact renewal sums need lattice-valued roof sums and profiles living below ``tau0``."""
    t0 = model.tau0
    return (roof_lattice(model.roof.values) is not None
            and A.profile.support[0] >= 0 and B.profile.support[0] >= 0
            and A.profile.support[1] <= t0 + 1e-12 and B.profile.support[1] <= t0 + 1e-12
            and max(A.base.depth, B.base.depth, model.roof.depth) <= model.depth)


def raw_correlation_renewal(model: SuspensionModel, A: Observable, B: Observable, ts) -> np.ndarray:
    """Exact ``int A (B o phi_t) dm`` for all ``t`` in ``ts``.

    With both height profiles inside ``[0, tau0]`` the flowed product reduces to
    ``sum_k a(x) b(sigma^k x) K(t - S_k(x))`` where ``K`` is the cross-correlation of
    the profiles.  Roof sums ``S_k = k alpha + beta D`` with integer ``D``, so the
    joint law of (current window, ``D``) is propagated exactly along the window chain.
    """
    if not renewal_applicable(model, A, B):
        raise InputError("renewal sums need a lattice-valued roof and profiles supported below tau0")
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    alpha, beta, n = roof_lattice(model.roof.values)
    t = model.depth
    W = model.base.words(t)
    P, nxt = model.transition()
    a = A.base.on(W)
    b = B.base.on(W)
    s_a = A.profile.support[1]
    t_max = float(ts.max())
    Dmax = int(math.floor((t_max + s_a) / beta)) + 1 if n.max() > 0 else 1
    mass = np.zeros((len(W), Dmax + 1))
    mass[:, 0] = model.nu * a
    out = np.zeros(len(ts))
    k = 0
    Dgrid = np.arange(Dmax + 1)
    while k * alpha <= t_max + s_a:
        mb = b @ mass
        live = np.nonzero(mb)[0]
        if len(live):
            c = ts[:, None] - (k * alpha + beta * Dgrid[live])[None, :]
            K = pair_integral(A.profile, B.profile, c, -math.inf, math.inf)
            out += K @ mb[live]
        new = np.zeros_like(mass)
        for w in range(len(W)):
            sh = int(n[w])
            if sh > Dmax:
                continue
            row = mass[w, : Dmax + 1 - sh]
            for j in range(model.base.k0):
                if P[w, j] > 0:
                    new[nxt[w, j], sh:] += P[w, j] * row
        mass = new
        k += 1
    return out / model.mean_roof


@dataclass
class CorrelationPoint:
    t: float
    value: float
    estimator: str
    samples: int
    stderr: float = 0.0


def correlation(model: SuspensionModel, A: Observable, B: Observable, t: float,
                paths: PathSample | None = None, method: str = "auto", samples: int = DEFAULT_SAMPLES,
                seed: int = DEFAULT_SEED) -> CorrelationPoint:
    """``int A (B o phi_t) dm - int A dm int B dm``."""
    if t < 0:
        raise InputError("t must be >= 0")
    means = invariant_integral(model, A) * invariant_integral(model, B)
    n = quadrature_depth(model, A, B, t) if method in ("auto", "quadrature") else None
    if n is not None:
        return CorrelationPoint(t, raw_correlation_quad(model, A, B, t, n) - means, "quadrature", 0)
    if method == "quadrature":
        raise InputError(f"time {t} needs enumeration deeper than {MAX_QUAD_DEPTH}")
    if method in ("auto", "renewal") and renewal_applicable(model, A, B):
        raw = raw_correlation_renewal(model, A, B, [t])[0]
        return CorrelationPoint(t, float(raw) - means, "renewal", 0)
    if method == "renewal":
        raise InputError("renewal sums not applicable to this roof/observable pair")
    log.info("t=%.3f beyond quadrature depth %d; sampling", t, MAX_QUAD_DEPTH)
    if paths is None:
        paths = sample_paths(model, path_length_for(model, B, t), samples, seed)
    raw, se = raw_correlation_mc(model, A, B, t, paths)
    return CorrelationPoint(t, raw - means, "montecarlo", paths.size, se)


def correlation_series(model: SuspensionModel, A: Observable, B: Observable, ts, method: str = "auto",
                       samples: int = DEFAULT_SAMPLES, seed: int = DEFAULT_SEED) -> list[CorrelationPoint]:
    """Correlations over a time grid; sampled points share one set of base paths."""
    ts = [float(t) for t in ts]
    paths = None
    out = []
    renewal = None
    for t in ts:
        if method in ("auto", "quadrature") and quadrature_depth(model, A, B, t) is not None:
            out.append(correlation(model, A, B, t, method="quadrature"))
            continue
        if method in ("auto", "renewal") and renewal_applicable(model, A, B):
            if renewal is None:
                means = invariant_integral(model, A) * invariant_integral(model, B)
                renewal = dict(zip(ts, raw_correlation_renewal(model, A, B, ts) - means))
            out.append(CorrelationPoint(t, float(renewal[t]), "renewal", 0))
            continue
        if method in ("quadrature", "renewal"):
            raise InputError(f"estimator {method} not available at t={t}")
        if paths is None:
            paths = sample_paths(model, path_length_for(model, B, max(ts)), samples, seed)
        out.append(correlation(model, A, B, t, paths=paths, method="montecarlo"))
    return out


@dataclass
class DecayFit:
    c: float
    quality: float
    used: int
    intercept: float = 0.0


def decay_fit(series, floor: float = 1e-10, envelope: bool = True) -> DecayFit:
    """Least-squares slope of ``log|C(t)|`` against ``t`` over samples above ``floor``.

    ``series`` holds ``(t, C)`` or ``(t, C, floor_t)``; a per-sample floor
    (e.g. three standard errors) overrides the global one.  With ``envelope``
    the fit uses ``max_{s >= t} |C(s)|`` so oscillation zeros do not enter the log.
    """
    rows = [tuple(r) for r in series]
    if len(rows) < 8:
        raise InputError("decay fit needs at least 8 samples")
    t = np.array([r[0] for r in rows], dtype=float)
    C = np.abs(np.array([r[1] for r in rows], dtype=float))
    if not np.any(C):
        raise InputError("all samples are zero")
    order = np.argsort(t, kind="stable")
    t, C = t[order], C[order]
    rows = [rows[i] for i in order]
    if envelope:
        C = np.maximum.accumulate(C[::-1])[::-1]
    fl = np.array([max(floor, r[2]) if len(r) > 2 else floor for r in rows])
    keep = C > fl
    if keep.sum() == 0:
        return DecayFit(math.inf, 1.0, 0)
    if keep.sum() == 1:
        return DecayFit(math.inf, 1.0, 1, float(np.log(C[keep][0])))
    y = np.log(C[keep])
    x = t[keep]
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss = float(np.sum((y - y.mean()) ** 2))
    quality = 1.0 if ss == 0 else 1.0 - float(np.sum(resid**2)) / ss
    return DecayFit(float(-slope) if slope != 0 else 0.0, quality, int(keep.sum()), float(icpt))
