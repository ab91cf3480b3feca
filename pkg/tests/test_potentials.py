import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thermolab import presets
from thermolab.potentials import (CylinderFunction, SeriesPotential, TablePotential, birkhoff_sum, birkhoff_values,
                                  evaluate, theta_seminorm, truncate_to_depth)


@pytest.fixture
def roof12(full2):
    return TablePotential(CylinderFunction(full2, 1, np.array([1.0, 2.0])))


def test_evaluate_examples(full2, roof12):
    zero = TablePotential(CylinderFunction(full2, 1, np.zeros(2)))
    assert evaluate(zero, (0, 1, 1)) == 0
    assert evaluate(roof12, (1, 0, 0)) == 2
    assert evaluate(SeriesPotential(1.0, (0.0, 0.5), 0.5), (1, 1, 0)) == pytest.approx(1.75, abs=1e-15)


def test_birkhoff_examples(full2, roof12):
    zero = TablePotential(CylinderFunction(full2, 1, np.zeros(2)))
    assert birkhoff_sum(zero, (0, 1, 0, 1, 1), 5) == 0
    assert birkhoff_sum(roof12, (0, 1, 0, 1), 3) == 4


def test_birkhoff_series_naive_oracle():
    p = presets.series_roof()
    w = (1, 0, 1, 1, 0, 1, 0, 0)
    ref = 0.0
    for j in range(4):
        for k, s in enumerate(w[j:]):
            ref += p.weights[s] * p.rho**k
        ref += p.c
    assert birkhoff_sum(p, w, 4) == pytest.approx(ref, abs=1e-13)


def test_truncation_examples(full2):
    tab = TablePotential(CylinderFunction(full2, 1, np.array([1.0, 2.0])))
    t3 = truncate_to_depth(tab, full2, 3)
    W = full2.words(3)
    assert t3.depth == 3
    np.testing.assert_array_equal(t3.values, np.where(W[:, 0] == 0, 1.0, 2.0))
    s = SeriesPotential(1.0, (0.0, 1.0), 0.5)
    t2 = truncate_to_depth(s, full2, 2)
    midpoint = 0.5 * 0.5**2 / (1 - 0.5)
    assert t2((1, 1)) == pytest.approx(1 + 1 + 0.5 + midpoint, abs=1e-15) == pytest.approx(2.75)
    flat = SeriesPotential(3.0, (0.0, 0.0), 0.5)
    for t in (1, 4, 7):
        assert np.all(truncate_to_depth(flat, full2, t).values == 3.0)


def test_truncation_error_geometric(full2):
    p = presets.series_roof()
    errs = []
    for t in range(2, 11):
        tab = truncate_to_depth(p, full2, t)
        W = full2.words(14)
        exact = np.array([p.evaluate(tuple(w)) for w in W])
        err = float(np.max(np.abs(exact - tab.on(W[:, :t]))))
        assert err <= p.tail_amplitude(t) + 1e-12
        errs.append(err)
    ratios = np.array(errs[1:]) / np.array(errs[:-1])
    np.testing.assert_allclose(ratios, p.rho, rtol=0.02)


def test_seminorm_examples(full2, golden):
    assert theta_seminorm(CylinderFunction(full2, 3, np.full(8, 2.5)), 0.5) == 0
    assert theta_seminorm(CylinderFunction(full2, 1, np.array([0.0, 1.0])), 0.5) == 1
    theta = 0.5
    for model in (full2, golden):
        for m in range(1, 6):
            W = model.words(m)
            for C in W:
                chi = CylinderFunction(model, m, np.all(W == C, axis=1).astype(float))
                val = theta_seminorm(chi, theta)
                assert val <= theta**-m + 1e-12
                # exhaustive oracle over all pairs
                best = 0.0
                for u, v in itertools.combinations(range(len(W)), 2):
                    k = int(np.cumprod(W[u] == W[v]).sum())
                    best = max(best, abs(chi.values[u] - chi.values[v]) / theta**k)
                assert val == pytest.approx(best, rel=1e-14)
                sibling = np.any(np.all(W[:, : m - 1] == C[: m - 1], axis=1) & ~np.all(W == C, axis=1))
                if sibling:
                    assert val == pytest.approx(theta ** -(m - 1), rel=1e-14)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5), st.floats(0.1, 0.9), st.floats(-5, 5), st.integers(0, 2**32 - 1))
def test_seminorm_subadditive_homogeneous(t, theta, c, seed):
    m = presets.full_shift(2, theta)
    r = np.random.default_rng(seed)
    h1 = CylinderFunction(m, t, r.normal(size=2**t))
    h2 = CylinderFunction(m, t, r.normal(size=2**t))
    s12 = theta_seminorm(h1.with_values(h1.values + h2.values), theta)
    assert s12 <= theta_seminorm(h1, theta) + theta_seminorm(h2, theta) + 1e-9
    assert theta_seminorm(h1.with_values(c * h1.values), theta) == pytest.approx(abs(c) * theta_seminorm(h1, theta),
                                                                                rel=1e-12, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=12, max_size=12), st.integers(1, 5), st.integers(1, 5))
def test_birkhoff_additivity(w, m, n):
    p = presets.series_roof()
    assert birkhoff_sum(p, w, m + n) == pytest.approx(birkhoff_sum(p, w, m) + birkhoff_sum(p, w[m:], n), abs=1e-12)
    tab = truncate_to_depth(p, presets.full_shift(2), 2)
    W = np.array([w])
    assert birkhoff_values(tab, W, m + n)[0] == pytest.approx(
        birkhoff_values(tab, W, m)[0] + birkhoff_values(tab, W[:, m:], n)[0], abs=1e-12)


def test_roof_positivity(full2, series8):
    assert series8.values.min() >= 1.0
    golden_roof = presets.two_valued_roof(full2)
    assert golden_roof.values.min() >= 1.0
    assert math.isclose(golden_roof.values.max(), presets.PHI)
