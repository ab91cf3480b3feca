"""Dolgopyat-type contraction operators on cylinder spaces.

A family of cylinders of uniform length ``ell_b`` (with ``theta**ell_b`` of order
``epsilon1 / |b|``) carries, for each member, pairs of length-``N`` inverse
branches.  Damping functions dip by ``mu0`` on the image of one branch over one
sub-cylinder per member, and ``N_J h = M_a^N (omega_J h)``.  Everything is
checked pointwise on the working-depth basis.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .complex_transfer import ComplexTransferOperator, lipschitz_T
from .errors import ConfigError, InputError, NumericalError
from .potentials import CylinderFunction, as_table
from .rpf import NormalizedPotential
from .subshift import SubshiftModel, cpl_matrix, encode

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DolgopyatParams:
    N: int = 4
    epsilon1: float = 1.0
    mu0: float = 0.05
    E: float = 10.0
    ell0: int = 2
    a0: float = 0.1
    b0: float = 1.0
    q1: int = 1
    epsilon3: float = 0.1
    samples: int = 32

    def __post_init__(self):
        if not 0 < self.mu0 <= 0.5 and self.mu0 != 0:
            raise ConfigError("mu0 must lie in (0, 1/2]")
        if self.N < 1 or self.ell0 < 1 or self.q1 < 0:
            raise ConfigError("N and ell0 must be >= 1, q1 >= 0")

    def paper_mu0(self, theta: float, T: float) -> float:
        """First branch of the paper-mode smallness bound for ``mu0`` (geometric terms dropped)."""
        return theta ** (2 * self.N) / (6.0 * math.exp(T / (1.0 - theta)))


# ----------------------------------------------------------------- families


@dataclass(frozen=True, eq=False)
class CylinderFamily:
    model: SubshiftModel
    b: float
    epsilon1: float
    theta: float
    ell: int
    members: np.ndarray  # (m0, ell) words

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def B(self) -> float:
        """Smallest ``B`` with ``log|b| / B <= ell <= B log|b|``."""
        lb = math.log(abs(self.b))
        if lb <= 0:
            return math.inf
        return max(self.ell / lb, lb / self.ell)

    def member_index(self, W: np.ndarray) -> np.ndarray:
        return self.model.index(W[:, : self.ell])


def build_cylinder_family(model: SubshiftModel, b: float, epsilon1: float = 1.0,
                          theta: float | None = None, b0: float = 1.0) -> CylinderFamily:
    """All admissible cylinders of the length ``ell`` with ``theta**ell`` in ``[eps1/(2|b|), eps1/|b|]``."""
    theta = model.theta if theta is None else theta
    if abs(b) < b0:
        raise ConfigError(f"|b| = {abs(b)} below threshold b0 = {b0}")
    target = epsilon1 / abs(b)
    if target >= 1:
        raise ConfigError("epsilon1/|b| must be < 1")
    ell = max(1, math.ceil(math.log(target) / math.log(theta) - 1e-12))
    if theta**ell < target / 2 * (1 - 1e-12):
        raise ConfigError(f"no power of theta={theta} in [{target / 2}, {target}]")
    return CylinderFamily(model, float(b), epsilon1, theta, ell, model.words(ell))


def d_metric(family: CylinderFamily, u, v) -> float:
    """The family-adapted distance: ``theta**(cpl - ell)`` when ``cpl >= ell``, else 1."""
    u, v = tuple(u), tuple(v)
    if len(u) != len(v):
        raise InputError("words must have equal length")
    if u == v:
        return 0.0
    cpl = 0
    for x, y in zip(u, v):
        if x != y:
            break
        cpl += 1
    if cpl >= family.ell:
        return family.theta ** (cpl - family.ell)
    return 1.0


def d_matrix(family: CylinderFamily, W: np.ndarray) -> np.ndarray:
    cpl = cpl_matrix(W)
    D = np.where(cpl >= family.ell, family.theta ** (cpl - family.ell).astype(float), 1.0)
    D[cpl == W.shape[1]] = 0.0
    return D


# ----------------------------------------------------------------- branches


def sub_cylinders(family: CylinderFamily, q1: int) -> np.ndarray:
    """All sub-cylinders of co-length ``q1`` of family members, lexicographic."""
    return family.model.words(family.ell + q1)


def _branch_words(model: SubshiftModel, N: int, first: int) -> np.ndarray:
    Wn = model.words(N)
    return Wn[model.A[Wn[:, -1], first] == 1]


def temporal_function(tau: CylinderFunction, w1, w2, X: np.ndarray) -> np.ndarray:
    """``tau_N(w1 x) - tau_N(w2 x)`` at each row ``x`` of ``X``."""
    return _tau_N(tau, np.asarray(w1), X) - _tau_N(tau, np.asarray(w2), X)


def _tau_N(tau: CylinderFunction, w: np.ndarray, X: np.ndarray) -> np.ndarray:
    N = len(w)
    d = tau.depth
    if X.shape[1] < d - 1:
        raise InputError(f"points need at least {d - 1} coordinates")
    full = np.concatenate([np.broadcast_to(w, (len(X), N)), X], axis=1)
    if not np.all(tau.model.A[w[-1], X[:, 0]] == 1):
        raise InputError("branch word not admissible before the points")
    tot = np.zeros(len(X))
    for k in range(N):
        seg = full[:, k : k + d]
        if seg.shape[1] < d:
            raise InputError("points too short for the roof depth")
        tot += tau.on(seg)
    return tot


def separation(phi: np.ndarray, groups: np.ndarray):
    """Best ``min |phi(x) - phi(z)|`` over x, z in two different groups.

    Returns ``(value, (g1, g2))``.
    """
    labels = np.unique(groups)
    best, arg = 0.0, None
    for g1, g2 in itertools.combinations(labels, 2):
        a, c = phi[groups == g1], phi[groups == g2]
        val = float(np.min(np.abs(a[:, None] - c[None, :])))
        if arg is None or val > best:
            best, arg = val, (int(g1), int(g2))
    return best, arg


@dataclass(frozen=True, eq=False)
class BranchPairSet:
    family: CylinderFamily
    N: int
    q1: int
    pairs: list  # per member: list over ell of (w1, w2) tuples
    separations: list  # per member: list over ell of floats
    witnesses: list  # per member: list over ell of sub-cylinder index pairs
    candidates_scanned: int

    @property
    def delta_hat(self) -> np.ndarray:
        return np.array([s[0] for s in self.separations])

    def branch(self, m: int, ell: int, i: int) -> tuple:
        return self.pairs[m][ell][i]


def _sample_points(model, prefix, depth, samples):
    W = model.words(depth)
    mask = np.all(W[:, : len(prefix)] == np.asarray(prefix)[None, :], axis=1)
    X = W[mask]
    if len(X) > samples:
        pos = np.unique(np.linspace(0, len(X) - 1, samples).round().astype(int))
        X = X[pos]
    return X


def select_branch_pairs(model: SubshiftModel, tau, family: CylinderFamily, N: int, ell0: int,
                        q1: int = 1, samples: int = 32, depth: int | None = None) -> BranchPairSet:
    """For each member, the ``ell0`` branch pairs with the largest sampled separation."""
    if N < 1:
        raise InputError("N must be >= 1")
    tdepth = tau.depth if isinstance(tau, CylinderFunction) else (tau.depth or 1)
    depth = depth or max(family.ell + q1, tdepth - 1, 1)
    depth = max(depth, family.ell + q1)
    taut = as_table(tau, model, max(tdepth, 1))
    pairs, seps, wits = [], [], []
    scanned = 0
    for c in family.members:
        words = _branch_words(model, N, int(c[0]))
        if len(words) < 2:
            raise InputError(f"cylinder {tuple(c)} has fewer than two length-{N} branches")
        X = _sample_points(model, c, depth, samples)
        groups = encode(X[:, : family.ell + q1], model.k0)
        S = np.stack([_tau_N(taut, w, X) for w in words])
        scored = []
        for p, (a, bb) in enumerate(itertools.combinations(range(len(words)), 2)):
            val, arg = separation(S[a] - S[bb], groups)
            scored.append((-val, p, a, bb, arg))
            scanned += 1
        scored.sort(key=lambda s: (s[0], s[1]))
        top = scored[:ell0]
        pairs.append([(tuple(int(x) for x in words[a]), tuple(int(x) for x in words[bb])) for _, _, a, bb, _ in top])
        seps.append([-s[0] for s in top])
        wits.append([s[4] for s in top])
    return BranchPairSet(family, N, q1, pairs, seps, wits, scanned)


# ----------------------------------------------------------------- operators


@dataclass(frozen=True, eq=False)
class NStepTable:
    """All ``N``-step preimages ``w u`` of the basis words ``u`` at depth ``t``."""

    model: SubshiftModel
    depth: int
    N: int
    rows: np.ndarray  # index of u
    target: np.ndarray  # index of (w u)[:t]
    words: np.ndarray  # the prefix w, shape (len, N)
    fN: np.ndarray
    tauN: np.ndarray

    def lookup(self, w: tuple, u_idx: np.ndarray) -> np.ndarray:
        """Row positions of the preimages ``w u`` for the given basis indices."""
        key = self._keys[tuple(w)]
        return key[u_idx]

    def __post_init__(self):
        keys = {}
        n = len(self.model.words(self.depth))
        codes = encode(self.words, self.model.k0)
        for code in np.unique(codes):
            sel = np.nonzero(codes == code)[0]
            arr = np.full(n, -1, dtype=np.int64)
            arr[self.rows[sel]] = sel
            keys[tuple(int(x) for x in self.words[sel[0]])] = arr
        object.__setattr__(self, "_keys", keys)


def n_step_table(fa: CylinderFunction, tau: CylinderFunction, t: int, N: int) -> NStepTable:
    model = fa.model
    U = model.words(t)
    Wn = model.words(N)
    wi, ui = np.nonzero(model.A[Wn[:, -1]][:, U[:, 0]])
    order = np.lexsort((wi, ui))
    wi, ui = wi[order], ui[order]
    full = np.concatenate([Wn[wi], U[ui]], axis=1)
    fN = np.zeros(len(full))
    tN = np.zeros(len(full))
    for k in range(N):
        fN += fa.on(full[:, k : k + fa.depth])
        tN += tau.on(full[:, k : k + tau.depth])
    target = model.index(full[:, :t])
    return NStepTable(model, t, N, ui, target, Wn[wi], fN, tN)


@dataclass(frozen=True, eq=False)
class DampingFunction:
    J: list  # (m, i, j, ell) with j the global sub-cylinder index
    mu0: float
    omega: CylinderFunction
    family: CylinderFamily
    pairs: BranchPairSet

    def W_J(self) -> np.ndarray:
        """Mask of basis words lying in the damped sub-cylinders."""
        model, t = self.omega.model, self.omega.depth
        W = model.words(t)
        L = self.family.ell + self.pairs.q1
        subs = sub_cylinders(self.family, self.pairs.q1)
        codes = encode(subs[[j for _, _, j, _ in self.J]], model.k0) if self.J else np.array([], dtype=np.int64)
        return np.isin(encode(W[:, :L], model.k0), codes)


def build_damping(family: CylinderFamily, pairs: BranchPairSet, J, mu0: float, t: int) -> DampingFunction:
    """``omega_J = 1 - mu0 * sum of indicators of w_i D_j`` at depth ``t``."""
    model = family.model
    L = family.ell + pairs.q1
    if pairs.N + L > t:
        raise InputError(f"working depth {t} too small for branch images of length {pairs.N + L}")
    subs = sub_cylinders(family, pairs.q1)
    W = model.words(t)
    omega = np.ones(len(W))
    seen = set()
    for (m, i, j, ell) in J:
        if j in seen:
            raise InputError("representative sets allow at most one triple per sub-cylinder")
        seen.add(j)
        w = pairs.branch(m, ell, i)
        X = np.concatenate([np.asarray(w), subs[j]])
        mask = np.all(W[:, : len(X)] == X[None, :], axis=1)
        omega[mask] -= mu0
    return DampingFunction(list(J), mu0, CylinderFunction(model, t, omega), family, pairs)


def apply_contraction(norm: NormalizedPotential, omega: DampingFunction, N: int, h) -> CylinderFunction:
    """``M_a^N (omega_J h)``."""
    M = norm.operator()
    t = M.depth
    if isinstance(h, CylinderFunction):
        if h.depth > t:
            raise InputError("depth mismatch")
        x = h.lift(t).values
    else:
        x = np.asarray(h)
    if omega.omega.depth != t:
        raise InputError("damping function depth differs from operator depth")
    x = omega.omega.values * x
    for _ in range(N):
        x = M.matrix @ x
    return CylinderFunction(M.model, t, x)


def cone_membership(family: CylinderFamily, H: CylinderFunction, E: float, rtol: float = 1e-12):
    """``(True, None)`` if ``H`` lies in the cone, else ``(False, (u, u'))``."""
    vals = np.asarray(H.values)
    if np.iscomplexobj(vals) or np.any(vals <= 0):
        if np.iscomplexobj(vals):
            return False, None
        k = int(np.argmin(vals))
        return False, (k, k)
    W = H.model.words(H.depth)
    ell = family.ell
    if H.depth <= ell:
        return True, None
    prefix = W[:, :ell]
    change = np.any(prefix[1:] != prefix[:-1], axis=1)
    starts = np.concatenate([[0], np.nonzero(change)[0] + 1, [len(W)]])
    theta = family.theta
    for a, c in zip(starts[:-1], starts[1:]):
        block = W[a:c]
        cpl = cpl_matrix(block)
        D = theta ** (cpl - ell).astype(float)
        hv = vals[a:c]
        lhs = np.abs(hv[:, None] - hv[None, :]) / hv[None, :]
        bad = (lhs > E * D * (1 + rtol)) & (cpl < H.depth)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            return False, (int(a + i), int(a + j))
    return True, None


# ----------------------------------------------------------------- J selection


@dataclass
class SelectionReport:
    cases: list  # per member: 1, 2 or "fail"
    chosen: list  # per member: (i, j, ell) or None
    phase_gaps: list
    dichotomy: list  # per member: list of (j, i, ell, status)
    violations: list
    bound_ok: bool

    @property
    def failed(self) -> bool:
        return any(c == "fail" for c in self.cases)

    @property
    def failures(self) -> list:
        return [m for m, c in enumerate(self.cases) if c == "fail"]


@dataclass(frozen=True, eq=False)
class DolgopyatSetup:
    """Everything fixed for a given ``(model, f, tau, a, b)``: family, branches, tables."""

    op: ComplexTransferOperator
    family: CylinderFamily
    pairs: BranchPairSet
    table: NStepTable
    params: DolgopyatParams
    nu: np.ndarray
    norm0: NormalizedPotential

    @property
    def depth(self) -> int:
        return self.op.depth

    @property
    def model(self) -> SubshiftModel:
        return self.op.model


def working_depth(family_ell: int, params: DolgopyatParams, tau_depth: int) -> int:
    return max(tau_depth, params.N + family_ell + params.q1)


def setup(model: SubshiftModel, f, tau, a: float, b: float, params: DolgopyatParams = DolgopyatParams(),
          depth: int | None = None) -> DolgopyatSetup:
    """Build the family, branch pairs, ``L_ab`` and ``M_a`` at a common working depth."""
    from .complex_transfer import transfer_operator
    from .rpf import normalize_potential, solve_P_f

    family = build_cylinder_family(model, b, params.epsilon1, b0=params.b0)
    td = tau.depth if isinstance(tau, CylinderFunction) else tau.depth
    if td is None:
        raise InputError("roof must be a finite-depth table here; truncate series roofs first")
    t = max(depth or 0, working_depth(family.ell, params, td))
    base = max(td, getattr(f, "depth", None) or 1)
    P_f = solve_P_f(model, f, tau, base)
    norm = normalize_potential(model, f, tau, a, t, a0=max(params.a0, abs(a)), P_f=P_f)
    norm0 = norm if a == 0 else normalize_potential(model, f, tau, 0.0, t, a0=params.a0, P_f=P_f)
    op = transfer_operator(norm, b)
    pairs = select_branch_pairs(model, norm.tau, family, params.N, params.ell0, params.q1,
                                params.samples, depth=t)
    table = n_step_table(norm.fa, norm.tau, t, params.N)
    return DolgopyatSetup(op, family, pairs, table, params, norm0.data.nu, norm0)


def _phase_gap(z1, z2):
    ang = np.abs(np.angle(z1) - np.angle(z2)) % (2 * np.pi)
    return np.minimum(ang, 2 * np.pi - ang)


def select_J(S: DolgopyatSetup, h, H) -> tuple[DampingFunction, SelectionReport]:
    """Pick one damped triple per family member so that ``|L_ab^N h| <= N_J H``.

    Candidates whose branch satisfies the 3/4 domination on its sub-cylinder
    (case 1) come first, then candidates ordered by decreasing sampled phase
    gap between the two branch contributions (case 2, gap at least
    ``epsilon3``).  The first candidate for which the pointwise bound holds on
    its sub-cylinder is taken; a member with no such candidate is reported as
    a failure.
    """
    model, t = S.model, S.depth
    params, fam, pairs, tab = S.params, S.family, S.pairs, S.table
    hv = (h.lift(t).values if isinstance(h, CylinderFunction) else np.asarray(h)).astype(complex)
    Hv = (H.lift(t).values if isinstance(H, CylinderFunction) else np.asarray(H)).astype(float)
    b = S.op.b
    # full L^N h and M^N H through the N-step table
    wts = np.exp(tab.fN - 1j * b * tab.tauN)
    n = len(Hv)
    LNh = np.bincount(tab.rows, weights=(wts * hv[tab.target]).real, minlength=n) + 1j * np.bincount(
        tab.rows, weights=(wts * hv[tab.target]).imag, minlength=n)
    MNH = np.bincount(tab.rows, weights=np.exp(tab.fN) * Hv[tab.target], minlength=n)
    absL = np.abs(LNh)

    W = model.words(t)
    L = fam.ell + pairs.q1
    subs = sub_cylinders(fam, pairs.q1)
    sub_codes = encode(subs, model.k0)
    word_sub = np.searchsorted(sub_codes, encode(W[:, :L], model.k0))
    fam_of_sub = fam.member_index(subs)

    cases, chosen, gaps, dich, J = [], [], [], [], []
    for m in range(fam.size):
        js = np.nonzero(fam_of_sub == m)[0]
        case1, case2 = [], []
        dm = []
        for j in js:
            u_idx = np.nonzero(word_sub == j)[0]
            for ell in range(len(pairs.pairs[m])):
                rows = [tab.lookup(pairs.branch(m, ell, i), u_idx) for i in (0, 1)]
                z = [wts[r] * hv[tab.target[r]] for r in rows]
                for i in (0, 1):
                    v = tab.target[rows[i]]
                    r = np.abs(hv[v]) / Hv[v]
                    status = "le34" if np.all(r <= 0.75) else ("ge14" if np.all(r >= 0.25) else "neither")
                    dm.append((int(j), i, ell, status))
                    if status == "le34":
                        case1.append((int(j), i, ell, rows[i], u_idx))
                gap = float(np.min(_phase_gap(z[0], z[1]))) if len(u_idx) else 0.0
                if gap >= params.epsilon3:
                    ratio = [float(np.max(np.abs(z[i]) / np.maximum(np.abs(z[1 - i]), 1e-300))) for i in (0, 1)]
                    i = int(np.argmin(ratio))
                    case2.append((gap, int(j), i, ell, rows[i], u_idx))
        case2.sort(key=lambda c: (-c[0], c[1], c[2], c[3]))
        pick = None
        for label, cand in itertools.chain((((1, c) for c in case1)),
                                           ((2, c[1:]) for c in case2)):
            j, i, ell, r, u_idx = cand
            damped = MNH[u_idx] - params.mu0 * np.exp(tab.fN[r]) * Hv[tab.target[r]]
            if np.all(absL[u_idx] <= damped * (1 + 1e-12)):
                pick = (label, i, j, ell)
                break
        dich.append(dm)
        gaps.append(max((c[0] for c in case2), default=0.0))
        if pick is None:
            cases.append("fail")
            chosen.append(None)
        else:
            label, i, j, ell = pick
            cases.append(label)
            chosen.append((i, j, ell))
            J.append((m, i, j, ell))
    damping = build_damping(fam, pairs, J, params.mu0, t)
    NJH = MNH - params.mu0 * _damped_part(S, damping, Hv)
    bad = np.nonzero(absL > NJH * (1 + 1e-12))[0]
    violations = [(int(k), float(absL[k]), float(NJH[k])) for k in bad]
    report = SelectionReport(cases, chosen, gaps, dich, violations, not len(violations))
    return damping, report


def _damped_part(S: DolgopyatSetup, damping: DampingFunction, Hv: np.ndarray) -> np.ndarray:
    """``M^N((1 - omega_J) H) / mu0`` via the N-step table."""
    tab = S.table
    ind = (1.0 - damping.omega.values) / damping.mu0 if damping.mu0 else np.zeros_like(Hv)
    n = len(Hv)
    return np.bincount(tab.rows, weights=np.exp(tab.fN) * ind[tab.target] * Hv[tab.target], minlength=n)


def contraction_values(S: DolgopyatSetup, damping: DampingFunction, H) -> np.ndarray:
    """``N_J H`` evaluated through the N-step table (same as :func:`apply_contraction`)."""
    Hv = H.values if isinstance(H, CylinderFunction) else np.asarray(H)
    tab = S.table
    om = damping.omega.values
    return np.bincount(tab.rows, weights=np.exp(tab.fN) * om[tab.target] * Hv[tab.target],
                       minlength=len(Hv))


def random_representative_J(S: DolgopyatSetup, rng: np.random.Generator) -> DampingFunction:
    fam, pairs = S.family, S.pairs
    subs = sub_cylinders(fam, pairs.q1)
    fam_of_sub = fam.member_index(subs)
    J = []
    for m in range(fam.size):
        js = np.nonzero(fam_of_sub == m)[0]
        j = int(rng.choice(js))
        J.append((m, int(rng.integers(2)), j, int(rng.integers(len(pairs.pairs[m])))))
    return build_damping(fam, pairs, J, S.params.mu0, S.depth)


def random_cone_member(S: DolgopyatSetup, rng: np.random.Generator, spread: float = 0.5) -> CylinderFunction:
    """A random positive function whose log-increments shrink like ``theta`` past the family length.

    Membership is not guaranteed by construction; callers check with :func:`cone_membership`.
    """
    model, t, fam = S.model, S.depth, S.family
    W = model.words(t)
    logH = rng.uniform(-2.0, 2.0, size=len(model.words(fam.ell)))[fam.member_index(W)]
    for k in range(fam.ell + 1, t + 1):
        codes = encode(W[:, :k], model.k0)
        uniq, inv = np.unique(codes, return_inverse=True)
        logH = logH + spread * fam.theta ** (k - fam.ell) * rng.uniform(-1, 1, size=len(uniq))[inv]
    return CylinderFunction(model, t, np.exp(logH))


# ----------------------------------------------------------------- iteration


class DominationFailure(NumericalError):
    def __init__(self, message, step, witness=None, trajectory=None, report=None):
        super().__init__(message)
        self.step = step
        self.witness = witness
        self.trajectory = trajectory or []
        self.report = report


@dataclass
class Trajectory:
    rows: list  # (m, int H^2 dnu, ||h||_0)
    reports: list = field(default_factory=list)

    @property
    def integrals(self):
        return [r[1] for r in self.rows]


def dominated_iteration(S: DolgopyatSetup, steps: int, h0=None) -> Trajectory:
    """``h^(m) = L_ab^{N m} h0`` dominated by ``H^(m) = N_{J_m} H^(m-1)``, ``H^(0) = 1``."""
    from .complex_transfer import NormThetaB, norm_theta_b

    model, t = S.model, S.depth
    n = len(model.words(t))
    h = np.ones(n, dtype=complex) if h0 is None else (
        h0.lift(t).values if isinstance(h0, CylinderFunction) else np.asarray(h0)).astype(complex)
    nb = NormThetaB(max(abs(S.op.b), 1.0), model.theta)
    h = h / norm_theta_b(CylinderFunction(model, t, h), nb)
    H = np.ones(n)
    nu = S.nu
    rows = [(0, float(nu @ H**2), float(np.max(np.abs(h))))]
    reports = []
    N = S.params.N
    for m in range(1, steps + 1):
        damping, rep = select_J(S, h, H)
        reports.append(rep)
        if rep.failed or not rep.bound_ok:
            wit = rep.violations[0] if rep.violations else rep.failures[0]
            raise DominationFailure(f"J selection failed at step {m}", m, wit, rows, rep)
        h = S.op.apply(h, N).values
        H = contraction_values(S, damping, H)
        bad = np.nonzero(np.abs(h) > H * (1 + 1e-12))[0]
        if len(bad):
            k = int(bad[0])
            raise DominationFailure(f"domination lost at step {m}", m, (k, float(abs(h[k])), float(H[k])), rows, rep)
        rows.append((m, float(nu @ H**2), float(np.max(np.abs(h)))))
    return Trajectory(rows, reports)


# ----------------------------------------------------------------- L2 estimate


@dataclass
class L2Report:
    lhs: float
    rhs: float
    ok: bool
    rho3: float
    C5: float
    T: float
    coverage: float


def l2_contraction_check(S: DolgopyatSetup, damping: DampingFunction, H, a0: float | None = None,
                         T: float | None = None) -> L2Report:
    """``int (N_J H)^2 dnu <= rho3 int L_{f^(0)}^N (H^2) dnu`` over the family union."""
    params = S.params
    a0 = params.a0 if a0 is None else a0
    Hv = H.values if isinstance(H, CylinderFunction) else np.asarray(H, dtype=float)
    nu = S.nu
    if T is None:
        T = lipschitz_T(S.op.norm, a0=a0 if a0 > 0 else None)
    NJH = contraction_values(S, damping, Hv)
    M0 = S.norm0.operator()
    LH2 = Hv**2
    for _ in range(params.N):
        LH2 = M0.matrix @ LH2
    # 1 - omega_0: smallest relative weight of a damped sub-cylinder inside its member
    W = S.model.words(S.depth)
    mem = S.family.member_index(W)
    WJ = damping.W_J()
    ratios = []
    for m in range(S.family.size):
        in_m = mem == m
        tot = nu[in_m].sum()
        if tot > 0:
            ratios.append(nu[in_m & WJ].sum() / tot)
    coverage = float(min(ratios)) if ratios else 0.0
    C5 = 4 * params.E**2 / coverage if coverage > 0 else math.inf
    N = params.N
    rho3 = math.exp(a0 * N * T) / (1.0 + params.mu0 * math.exp(-N * T) / C5)
    lhs = float(nu @ NJH**2)
    rhs = rho3 * float(nu @ LH2)
    return L2Report(lhs, rhs, lhs <= rhs * (1 + 1e-12), rho3, C5, T, coverage)
