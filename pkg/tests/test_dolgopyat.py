import itertools
import math

import numpy as np
import pytest

from thermolab import dolgopyat as dg
from thermolab import presets
from thermolab.errors import ConfigError
from thermolab.potentials import CylinderFunction, as_table
from thermolab.subshift import encode

# differences of sums of O(1) roof values below this are rounding, not separation
ROUNDING_FLOOR = 1e-12


@pytest.fixture(scope="module")
def S(series8_mod):
    m = series8_mod.model
    return dg.setup(m, presets.zero_potential(m), series8_mod, 0.0, 20.0)


@pytest.fixture(scope="module")
def series8_mod():
    m = presets.full_shift(2)
    return as_table(presets.series_roof(), m, 8)


@pytest.fixture(scope="module")
def S_lattice():
    m = presets.full_shift(2)
    return dg.setup(m, presets.zero_potential(m), presets.constant_roof(m), 0.0, 20.0)


def interaction_roof(model):
    """Depth-8 series roof plus a coupling 0.2 [y0 = 1][y7 = 1]: not cohomologous to a depth-1 roof."""
    base = as_table(presets.series_roof(), model, 8)
    W = model.words(8)
    return base.with_values(base.values + 0.2 * (W[:, 0] == 1) * (W[:, 7] == 1))


# ----------------------------------------------------------------- families and metric


def test_family_examples(full2, golden):
    fam = dg.build_cylinder_family(full2, 16.0)
    assert fam.ell == 4 and fam.size == 16
    assert dg.build_cylinder_family(full2, 1024.0).ell == 10
    g = dg.build_cylinder_family(golden, 16.0)
    assert g.ell == 4
    assert g.size == int(np.linalg.matrix_power(golden.A, 3).sum()) == 8
    with pytest.raises(ConfigError):
        dg.build_cylinder_family(full2, 0.5)


def test_d_metric_examples(full2):
    fam = dg.build_cylinder_family(full2, 16.0)
    u = (0, 1, 1, 0, 1, 1, 0, 0)
    assert dg.d_metric(fam, u, u) == 0
    v = u[:6] + (1, 1)  # common prefix ell + 2
    assert dg.d_metric(fam, u, v) == pytest.approx(full2.theta**2, abs=0)
    w = (0, 1, 0) + u[3:]  # different family cylinders
    assert dg.d_metric(fam, u, w) == 1
    W = full2.words(7)
    D = dg.d_matrix(fam, W)
    for i, j in [(0, 1), (3, 77), (10, 10), (5, 100)]:
        assert D[i, j] == dg.d_metric(fam, W[i], W[j])


def test_metric_contraction_under_branches(full2):
    fam = dg.build_cylinder_family(full2, 16.0)
    N, t = 3, 7
    U = full2.words(t)
    for w in full2.words(N):
        for a, c in itertools.combinations(range(len(U)), 2):
            u, up = U[a], U[c]
            if int(np.cumprod(u == up).sum()) < fam.ell:
                continue
            lhs = dg.d_metric(fam, tuple(w) + tuple(u), tuple(w) + tuple(up))
            assert lhs == fam.theta**N * dg.d_metric(fam, u, up)


# ----------------------------------------------------------------- temporal functions and branch pairs


def test_temporal_depth1_constant(full2):
    tau = presets.two_valued_roof(full2)
    X = full2.words(6)
    for w1, w2 in itertools.combinations([tuple(w) for w in full2.words(4)], 2):
        phi = dg.temporal_function(tau, w1, w2, X)
        assert np.ptp(phi) == 0


def test_temporal_depth2_oracle(full2):
    tau = CylinderFunction(full2, 2, np.array([1.0, 1.3, 1.7, 2.9]))
    X = full2.words(5)
    w1, w2 = (0, 1, 1), (1, 0, 0)
    phi = dg.temporal_function(tau, w1, w2, X)

    def tauN(w, x):
        y = w + tuple(x)
        return sum(tau(y[k : k + 2]) for k in range(len(w)))

    for x, p in zip(X, phi):
        assert p == pytest.approx(tauN(w1, x) - tauN(w2, x), abs=1e-14)
    for x0 in (0, 1):
        assert np.ptp(phi[X[:, 0] == x0]) < 1e-14
    assert np.ptp(phi) > 0


def _max_I(model, tau, family, N, depth, samples=64):
    best = 0.0
    for c in family.members:
        X = dg._sample_points(model, c, depth, samples)
        words = dg._branch_words(model, N, int(c[0]))
        for w1, w2 in itertools.combinations(words, 2):
            phi = dg.temporal_function(tau, w1, w2, X)
            best = max(best, float(np.ptp(phi)))
    return best


def test_temporal_series_depth8_positive(series8_mod):
    """Literal check of the stated example; fails for additive series roofs (see the identity test)."""
    m = series8_mod.model
    fam = dg.build_cylinder_family(m, 20.0)
    assert _max_I(m, series8_mod, fam, 4, 10) > ROUNDING_FLOOR


def test_additive_roof_identity(series8_mod):
    # for c + sum_k w(x_k) rho^k the x-dependent part of tau_N(w x) does not depend on w
    m = series8_mod.model
    fam = dg.build_cylinder_family(m, 20.0)
    assert _max_I(m, series8_mod, fam, 4, 10) < ROUNDING_FLOOR
    tau = interaction_roof(m)
    assert _max_I(m, tau, fam, 4, 10) > 0.01


def test_pairs_lattice(full2):
    fam = dg.build_cylinder_family(full2, 4.0)
    P = dg.select_branch_pairs(full2, presets.constant_roof(full2), fam, 2, 2)
    assert all(s == 0 for row in P.separations for s in row)
    words = [tuple(w) for w in full2.words(2)]
    for row in P.pairs:
        assert row == [(words[0], words[1]), (words[0], words[2])]


def test_pairs_scan_counts(full2):
    fam = dg.build_cylinder_family(full2, 4.0)
    P = dg.select_branch_pairs(full2, presets.two_valued_roof(full2), fam, 2, 2)
    assert len(dg._branch_words(full2, 2, 0)) == 4
    assert P.candidates_scanned == 6 * fam.size


def test_pairs_depth1_roof_zero_separation(full2):
    fam = dg.build_cylinder_family(full2, 20.0)
    P = dg.select_branch_pairs(full2, presets.two_valued_roof(full2), fam, 4, 2)
    assert np.all(P.delta_hat == 0)


def test_pairs_series_positive(S):
    """Literal check of the stated example; the additive series roof gives exactly 0."""
    assert np.all(S.pairs.delta_hat > ROUNDING_FLOOR)


def test_pairs_interaction_roof_positive(full2):
    fam = dg.build_cylinder_family(full2, 20.0)
    P = dg.select_branch_pairs(full2, interaction_roof(full2), fam, 4, 2, depth=10)
    assert np.all(P.delta_hat > ROUNDING_FLOOR)


# ----------------------------------------------------------------- damping and cone


def test_apply_contraction_examples(S, rng):
    norm = S.op.norm
    M = norm.operator()
    J = dg.random_representative_J(S, rng).J
    t, N = S.depth, S.params.N
    zero = dg.build_damping(S.family, S.pairs, J, 0.0, t)
    h = rng.random(M.dim)
    ref = h.copy()
    for _ in range(N):
        ref = M.matrix @ ref
    np.testing.assert_allclose(dg.apply_contraction(norm, zero, N, h).values, ref, rtol=1e-13)
    om = dg.build_damping(S.family, S.pairs, J, 0.05, t)
    one = dg.apply_contraction(norm, om, N, np.ones(M.dim)).values
    assert np.all(one >= 1 - 0.05 - 1e-12) and np.all(one <= 1 + 1e-12)
    two = om.omega.values * h
    for _ in range(N):
        two = M.matrix @ two
    np.testing.assert_allclose(dg.apply_contraction(norm, om, N, h).values, two, rtol=1e-13)
    np.testing.assert_allclose(dg.contraction_values(S, om, h), two, rtol=1e-12)


def test_omega_bounds(S, rng):
    for _ in range(20):
        om = dg.random_representative_J(S, rng).omega.values
        assert np.all(om >= 1 - S.params.mu0) and np.all(om <= 1)
        assert set(np.unique(om)) <= {1.0, 1 - S.params.mu0}


def test_cone_examples(full2):
    fam = dg.build_cylinder_family(full2, 16.0)
    t, E = 8, 10.0
    W = full2.words(t)
    assert dg.cone_membership(fam, CylinderFunction(full2, t, np.full(len(W), 3.0)), E)[0]
    z = np.ones(len(W))
    z[17] = 0
    assert not dg.cone_membership(fam, CylinderFunction(full2, t, z), E)[0]
    min_d = fam.theta ** (t - 1 - fam.ell)
    bump = np.ones(len(W))
    bump[37] += E * min_d / 2
    assert dg.cone_membership(fam, CylinderFunction(full2, t, bump), E)[0]
    bump[37] = 1 + 2 * E
    ok, wit = dg.cone_membership(fam, CylinderFunction(full2, t, bump), E)
    assert not ok and 37 in wit


def test_cone_preservation(S):
    r = np.random.default_rng(7)
    E = S.params.E
    tested = 0
    while tested < 100:
        H = dg.random_cone_member(S, r)
        if not dg.cone_membership(S.family, H, E)[0]:
            continue
        tested += 1
        chosen, _ = dg.select_J(S, np.zeros(len(H.values)), H)
        for om in (chosen, dg.random_representative_J(S, r), dg.random_representative_J(S, r)):
            out = dg.apply_contraction(S.op.norm, om, S.params.N, H)
            assert dg.cone_membership(S.family, out, E)[0]


# ----------------------------------------------------------------- J selection


def test_select_J_zero_h(S):
    n = S.op.op.dim
    damping, rep = dg.select_J(S, np.zeros(n), np.ones(n))
    assert rep.bound_ok and not rep.failed
    assert all(c == 1 for c in rep.cases)
    assert len(damping.J) == S.family.size


def test_select_J_case1_domination(S, rng):
    n = S.op.op.dim
    H = np.ones(n)
    h = 0.5 * np.exp(2j * np.pi * rng.random(n))
    damping, rep = dg.select_J(S, h, H)
    assert all(c == 1 for c in rep.cases)
    # independent re-check: |L^N h| <= M^N(omega H) pointwise, via plain matrix products
    Lh = S.op.apply(h, S.params.N).values
    NJH = dg.apply_contraction(S.op.norm, damping, S.params.N, H).values
    assert np.all(np.abs(Lh) <= NJH * (1 + 1e-12))


def test_select_J_case2_phase(S):
    n = S.op.op.dim
    damping, rep = dg.select_J(S, np.ones(n), np.ones(n))
    assert not rep.failed and rep.bound_ok
    assert all(c == 2 for c in rep.cases)
    assert min(rep.phase_gaps) >= S.params.epsilon3


def test_select_J_lattice_fails(S_lattice):
    n = S_lattice.op.op.dim
    _, rep = dg.select_J(S_lattice, np.ones(n), np.ones(n))
    assert rep.failed


# ----------------------------------------------------------------- iteration and L2


def test_iteration_series(S):
    traj = dg.dominated_iteration(S, 20)
    ints = traj.integrals
    assert traj.rows[0][1] == pytest.approx(1.0, abs=1e-12)
    assert len(ints) == 21
    assert all(b < a for a, b in zip(ints, ints[1:]))


def test_iteration_lattice_negative_control(S_lattice):
    try:
        traj = dg.dominated_iteration(S_lattice, 20)
    except dg.DominationFailure as exc:
        assert exc.step >= 1
        return
    ints = traj.integrals
    assert ints[-1] > 0.5 * ints[0]


def test_l2_mu0_zero_cauchy_schwarz(series8_mod, rng):
    m = series8_mod.model
    S0 = dg.setup(m, presets.zero_potential(m), series8_mod, 0.0, 20.0, dg.DolgopyatParams(mu0=0.0))
    for _ in range(10):
        H = dg.random_cone_member(S0, rng)
        om = dg.random_representative_J(S0, rng)
        rep = dg.l2_contraction_check(S0, om, H, a0=0.0)
        assert rep.rho3 == 1.0 and rep.ok


def test_l2_H_one_structure(S, rng):
    n = S.op.op.dim
    om = dg.random_representative_J(S, rng)
    rep = dg.l2_contraction_check(S, om, np.ones(n), a0=1e-12)
    damped = float(S.nu[om.omega.values < 1].sum())
    assert 0 < rep.coverage <= 1
    assert rep.lhs <= (1 - S.params.mu0 * damped) * rep.rhs / rep.rho3 + 1e-12
    assert rep.rhs / rep.rho3 == pytest.approx(1.0, abs=1e-12)


def test_l2_random_cone_members(S):
    r = np.random.default_rng(11)
    T = dg.lipschitz_T(S.op.norm, a0=1e-12)
    count = 0
    while count < 100:
        H = dg.random_cone_member(S, r)
        if not dg.cone_membership(S.family, H, S.params.E)[0]:
            continue
        count += 1
        om, _ = dg.select_J(S, np.zeros(len(H.values)), H)
        rep = dg.l2_contraction_check(S, om, H, a0=1e-12, T=T)
        assert rep.rho3 < 1 and rep.ok
