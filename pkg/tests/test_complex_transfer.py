import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thermolab import presets
from thermolab.complex_transfer import (NormThetaB, apply_L_ab, build_operator, contraction_profile,
                                        lasota_yorke_check, minimal_B, norm_theta_b,
                                        spectral_radius_lattice_check)
from thermolab.errors import InputError
from thermolab.potentials import CylinderFunction


@pytest.fixture(scope="module")
def lattice_ops():
    m = presets.full_shift(2)
    z, one = presets.zero_potential(m), presets.constant_roof(m)
    return {b: build_operator(m, z, one, 0.0, b, 1) for b in (0.0, 1.0, math.pi, 10.0, 2 * math.pi)}


@pytest.fixture(scope="module")
def series_op():
    m = presets.full_shift(2)
    from thermolab.potentials import as_table
    tau = as_table(presets.series_roof(), m, 8)
    return build_operator(m, presets.zero_potential(m), tau, 0.0, 20.0, 8)


def test_lattice_phase_factors_out(lattice_ops):
    for b in (1.0, math.pi, 10.0):
        out = apply_L_ab(lattice_ops[b], np.ones(2)).values
        np.testing.assert_allclose(out, np.exp(-1j * b), atol=1e-15)


def test_b_zero_is_M_a(lattice_ops, series_op):
    op = lattice_ops[0.0]
    np.testing.assert_allclose(apply_L_ab(op, np.ones(2)).values, 1, atol=1e-15)
    m = series_op.model
    op0 = build_operator(m, presets.zero_potential(m), series_op.norm.tau, 0.0, 0.0, 8)
    h = np.random.default_rng(1).normal(size=op0.op.dim)
    np.testing.assert_allclose(apply_L_ab(op0, h).values, op0.apply_modulus(h).values, atol=1e-14)
    np.testing.assert_allclose(op0.apply_modulus(np.ones(op0.op.dim)).values, 1, atol=1e-12)


def test_series_naive_preimage_oracle(series_op):
    op = series_op
    m, fa, tau, b = op.model, op.norm.fa, op.norm.tau, op.b
    got = apply_L_ab(op, np.ones(op.op.dim)).values
    for i, x in enumerate(m.words(8)):
        ref = 0j
        for j in range(m.k0):
            if m.A[j, x[0]]:
                y = (j,) + tuple(x)
                ref += math.exp(fa(y)) * np.exp(-1j * b * tau(y[:8]))
        assert abs(got[i] - ref) < 1e-12


def test_norm_examples(full2):
    one = CylinderFunction(full2, 3, np.ones(8))
    for b in (1.0, 7.0, 100.0):
        assert norm_theta_b(one, NormThetaB(b, 0.5)) == pytest.approx(1)
    chi = CylinderFunction(full2, 1, np.array([1.0, 0.0]))
    assert norm_theta_b(chi, NormThetaB(10.0, 0.5)) == pytest.approx(1.1, abs=1e-15)
    h = CylinderFunction(full2, 3, np.random.default_rng(3).normal(size=8))
    n = NormThetaB(4.0, 0.5)
    assert norm_theta_b(h.with_values(2 * h.values), n) == pytest.approx(2 * norm_theta_b(h, n), rel=1e-14)
    with pytest.raises(InputError):
        NormThetaB(0.5, 0.5)


def test_contraction_profile_examples(lattice_ops, series_op):
    for b in (1.0, 10.0):
        prof = contraction_profile(lattice_ops[b], 30)
        np.testing.assert_allclose(prof.norms, 1, atol=1e-13)
    prof = contraction_profile(lattice_ops[0.0], 20)
    np.testing.assert_allclose(prof.norms, 1, atol=1e-13)
    prof = contraction_profile(series_op, 40)
    assert prof.rho_hat < 1
    assert len(prof.rows) == 41
    env = [r[2] for r in prof.rows]
    assert all(e1 >= e2 for e1, e2 in zip(env, env[1:]))


def test_lasota_yorke_examples(lattice_ops, series_op, rng):
    op = lattice_ops[math.pi]
    rep = lasota_yorke_check(op, 3, np.ones(2), np.ones(2), 0.0)
    assert rep.ok and rep.max_ratio == 0
    m = series_op.model
    W = m.words(8)
    h = CylinderFunction(m, 8, rng.normal(size=len(W)) + 1j * rng.normal(size=len(W)))
    H = CylinderFunction(m, 8, 1 + rng.random(len(W)))
    B = minimal_B(h, H)
    rep = lasota_yorke_check(series_op, 1, h, H, B)
    assert rep.ok and not rep.skipped
    rep5 = lasota_yorke_check(series_op, 1, h.with_values(5 * h.values), H, 5 * B, T=rep.T)
    assert rep5.ok == rep.ok
    assert rep5.max_ratio == pytest.approx(rep.max_ratio, rel=1e-9)


def test_pointwise_domination_and_norms(series_op, rng):
    op = series_op
    n = op.op.dim
    for _ in range(100):
        h = rng.normal(size=n) + 1j * rng.normal(size=n)
        Lh = apply_L_ab(op, h).values
        Mh = op.apply_modulus(np.abs(h)).values
        assert np.all(np.abs(Lh) <= Mh * (1 + 1e-13))
        assert np.max(np.abs(Lh)) <= np.max(np.abs(Mh)) * (1 + 1e-13) <= np.max(np.abs(h)) * (1 + 1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_lattice_identity(k):
    # tau in c Z with c = 2 and b = 2 pi k / c: the phase is identically 1
    m = presets.full_shift(2)
    tau = CylinderFunction(m, 1, np.array([2.0, 4.0]))
    op = build_operator(m, presets.zero_potential(m), tau, 0.0, 2 * math.pi * k / 2, 1)
    assert spectral_radius_lattice_check(op, 100) == [1.0] * 100


def test_lattice_unit_modulus(lattice_ops):
    # |e^{-imb}| is 1 up to rounding; one rounding step per application at most
    eps = np.finfo(float).eps
    for b in (1.0, math.pi, 10.0):
        v = np.array(spectral_radius_lattice_check(lattice_ops[b], 100))
        assert np.all(np.abs(v - 1) <= eps * np.arange(1, 101))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 6), st.integers(0, 6), st.integers(0, 2**32 - 1))
def test_semigroup(m, n, seed):
    mod = presets.full_shift(2)
    tau = presets.two_valued_roof(mod)
    op = build_operator(mod, presets.zero_potential(mod), tau, 0.03, 7.5, 3)
    r = np.random.default_rng(seed)
    h = r.normal(size=8) + 1j * r.normal(size=8)
    lhs = op.apply(h, m + n).values
    rhs = op.apply(op.apply(h, n), m).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)
