"""Complex normalised transfer operators ``L_ab`` and the ``||.||_{theta,b}`` norm."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .potentials import CylinderFunction, as_table, theta_seminorm
from .rpf import DEFAULT_A0, NormalizedPotential, TransferMatrix, build_transfer_matrix, normalize_potential
from .subshift import SubshiftModel

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ComplexTransferOperator:
    """Matrix of ``L_{f^(a) - i b tau}`` on depth-``t`` complex functions."""

    norm: NormalizedPotential
    b: float
    op: TransferMatrix
    modulus: TransferMatrix = field(repr=False)

    @property
    def model(self) -> SubshiftModel:
        return self.op.model

    @property
    def depth(self) -> int:
        return self.op.depth

    @property
    def a(self) -> float:
        return self.norm.a

    def apply(self, h, times: int = 1) -> CylinderFunction:
        x = _values(h, self.depth)
        for _ in range(times):
            x = self.op.matrix @ x
        return CylinderFunction(self.model, self.depth, x)

    def apply_modulus(self, h, times: int = 1) -> CylinderFunction:
        """``M_a^times`` applied to ``h``."""
        x = _values(h, self.depth)
        for _ in range(times):
            x = self.modulus.matrix @ x
        return CylinderFunction(self.model, self.depth, x)


def _values(h, t):
    if isinstance(h, CylinderFunction):
        if h.depth > t:
            raise InputError(f"function depth {h.depth} exceeds operator depth {t}")
        return h.lift(t).values
    x = np.asarray(h)
    if x.ndim == 0:
        raise InputError("expected a cylinder function or a value vector")
    return x


def transfer_operator(norm: NormalizedPotential, b: float) -> ComplexTransferOperator:
    """Build ``L_ab`` from a normalisation ``f^(a)``; ``tau`` sets the phase."""
    model, t = norm.fa.model, norm.depth
    tau = norm.tau

    def phase(ext):
        return np.exp(-1j * b * tau.on(ext))

    op = build_transfer_matrix(model, norm.fa, t, weights=phase)
    mod = build_transfer_matrix(model, norm.fa, t)
    return ComplexTransferOperator(norm, float(b), op, mod)


def build_operator(model: SubshiftModel, f, tau, a: float, b: float, t: int,
                   a0: float = DEFAULT_A0, P_f: float | None = None) -> ComplexTransferOperator:
    return transfer_operator(normalize_potential(model, f, tau, a, t, a0=a0, P_f=P_f), b)


def apply_L_ab(op: ComplexTransferOperator, h) -> CylinderFunction:
    return op.apply(h)


@dataclass(frozen=True)
class NormThetaB:
    b: float
    theta: float

    def __post_init__(self):
        if abs(self.b) < 1:
            raise InputError("the (theta, b) norm needs |b| >= 1")


def norm_theta_b(h: CylinderFunction, n: NormThetaB) -> float:
    """``||h||_0 + |h|_theta / |b|``."""
    if abs(n.b) < 1:
        raise InputError("the (theta, b) norm needs |b| >= 1")
    return h.sup() + theta_seminorm(h, n.theta) / abs(n.b)


@dataclass
class Profile:
    rows: list  # (m, norm, envelope)
    rho_hat: float
    log_scale: float = 0.0
    depth: int = 0

    @property
    def norms(self):
        return [r[1] for r in self.rows]


def contraction_profile(op: ComplexTransferOperator, m_max: int, h0=None) -> Profile:
    """Norms ``||L_ab^m h0||_{theta,b}`` for ``m = 0..m_max``.

    ``rho_hat`` is the geometric mean contraction over the last half of the run.
    """
    if m_max < 1:
        raise InputError("m_max must be >= 1")
    theta = op.model.theta
    nb = NormThetaB(b=max(abs(op.b), 1.0), theta=theta)
    if h0 is None:
        h0 = np.ones(op.op.dim, dtype=complex)
    x = _values(h0, op.depth).astype(complex)
    log_scale = 0.0
    norms = []
    for m in range(m_max + 1):
        if m:
            x = op.op.matrix @ x
        s = np.max(np.abs(x))
        if s > 1e100 or (0 < s < 1e-100):
            x = x / s
            log_scale += math.log(s)
            log.info("renormalised profile at m=%d by %.3e (log scale %.3f)", m, s, log_scale)
        val = norm_theta_b(CylinderFunction(op.model, op.depth, x), nb)
        norms.append(val * math.exp(log_scale) if log_scale < 700 else math.inf)
    env = list(norms)
    for i in range(len(env) - 2, -1, -1):
        env[i] = max(env[i], env[i + 1])
    half = m_max // 2
    first, last = norms[half], norms[m_max]
    if first <= 0:
        rho = 0.0
    elif last <= 0:
        rho = 0.0
    else:
        rho = (last / first) ** (1.0 / (m_max - half))
    rows = [(m, norms[m], env[m]) for m in range(m_max + 1)]
    return Profile(rows, rho, log_scale, op.depth)


def lipschitz_T(norm: NormalizedPotential, a0: float | None = None, theta: float | None = None) -> float:
    """``max(||f^(a)||_0, |f^(a)|_theta, |tau|_theta)`` for the given normalisation.

    When ``a0`` is given, the sup ``||f^(a) - f^(0)||_0 / |a|`` over ``a = +-a0`` is
    included as well so that the bound is uniform in ``|a| <= a0``.
    """
    model = norm.fa.model
    theta = model.theta if theta is None else theta
    T = max(norm.fa.sup(), theta_seminorm(norm.fa, theta), theta_seminorm(norm.tau, theta))
    if a0:
        base = normalize_potential(model, norm.f, norm.tau, 0.0, norm.depth, a0=a0, P_f=norm.P_f)
        for a in (-a0, a0):
            other = normalize_potential(model, norm.f, norm.tau, a, norm.depth, a0=a0, P_f=norm.P_f)
            T = max(T, other.fa.sup(), theta_seminorm(other.fa, theta),
                    float(np.max(np.abs(other.fa.values - base.fa.values))) / a0)
    return float(T)


def lasota_yorke_A0(T: float, theta: float) -> float:
    """``e^{theta T/(1-theta)} * max(1, 2 theta T/(1-theta))``."""
    x = theta * T / (1.0 - theta)
    return math.exp(x) * max(1.0, 2.0 * x)


@dataclass
class LasotaYorkeReport:
    ok: bool
    A0: float
    T: float
    B: float
    m: int
    b: float
    max_ratio: float
    pairs_checked: int
    violations: list
    skipped: list

    def summary(self) -> dict:
        return {"ok": self.ok, "A0": self.A0, "T": self.T, "B": self.B, "m": self.m, "b": self.b,
                "max_ratio": self.max_ratio, "pairs_checked": self.pairs_checked,
                "violations": len(self.violations), "skipped": len(self.skipped)}


def same_cylinder_pairs(W: np.ndarray):
    """Ordered pairs ``(u, u')`` of distinct words with the same first symbol, with their cpl."""
    n, t = W.shape
    first = W[:, 0]
    I, J = np.nonzero((first[:, None] == first[None, :]) & ~np.eye(n, dtype=bool))
    eq = W[I] == W[J]
    cpl = np.cumprod(eq, axis=1).sum(axis=1)
    return I, J, cpl


def minimal_B(h: CylinderFunction, H: CylinderFunction) -> float:
    """Smallest ``B`` with ``|h(v) - h(v')| <= B H(v') D_theta(v, v')`` on same-1-cylinder pairs."""
    t = max(h.depth, H.depth)
    hv, Hv = h.lift(t).values, H.lift(t).values
    W = h.model.words(t)
    I, J, cpl = same_cylinder_pairs(W)
    D = h.model.theta ** cpl
    return float(np.max(np.abs(hv[I] - hv[J]) / (Hv[J] * D))) if len(I) else 0.0


def lasota_yorke_check(op: ComplexTransferOperator, m: int, h, H, B: float, T: float | None = None,
                       rtol: float = 1e-12) -> LasotaYorkeReport:
    """Check the Lasota-Yorke inequality on every same-1-cylinder pair at working depth."""
    if abs(op.b) < 1:
        raise InputError("|b| >= 1 required")
    t = op.depth
    model = op.model
    theta = model.theta
    hv = _values(h, t).astype(complex)
    Hv = _values(H, t).astype(float)
    if np.any(Hv <= 0):
        raise InputError("H must be strictly positive")
    if T is None:
        T = lipschitz_T(op.norm)
    A0 = lasota_yorke_A0(T, theta)
    W = model.words(t)
    I, J, cpl = same_cylinder_pairs(W)
    D = theta ** cpl
    pre_ok = np.abs(hv[I] - hv[J]) <= B * Hv[J] * D * (1 + rtol) + 1e-300
    skipped = [(int(i), int(j)) for i, j in zip(I[~pre_ok], J[~pre_ok])]
    Lh = hv
    MH = Hv.copy()
    Mh = np.abs(hv)
    for _ in range(m):
        Lh = op.op.matrix @ Lh
        MH = op.modulus.matrix @ MH
        Mh = op.modulus.matrix @ Mh
    if skipped:
        return LasotaYorkeReport(False, A0, T, B, m, op.b, math.nan, 0, [], skipped)
    lhs = np.abs(Lh[I] - Lh[J])
    rhs = A0 * (B * theta**m * MH[J] + abs(op.b) * Mh[J]) * D
    bad = lhs > rhs * (1 + rtol)
    viol = [(int(i), int(j), float(l), float(r)) for i, j, l, r in zip(I[bad], J[bad], lhs[bad], rhs[bad])]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, lhs / rhs, np.where(lhs > 0, np.inf, 0.0))
    return LasotaYorkeReport(not viol, A0, T, B, m, op.b, float(ratio.max()) if len(ratio) else 0.0,
                             len(I), viol, [])


def spectral_radius_lattice_check(op: ComplexTransferOperator, m_max: int) -> list[float]:
    """``||L_ab^m 1||_0`` for ``m = 1..m_max``."""
    x = np.ones(op.op.dim, dtype=complex)
    out = []
    for _ in range(m_max):
        x = op.op.matrix @ x
        out.append(float(np.max(np.abs(x))))
    return out


def tau_table(model, tau, t):
    return as_table(tau, model, t)
