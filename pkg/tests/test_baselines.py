from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from conftest import make_dataset
from oracles import brute_midranks, brute_pearson
from whatif.baselines import (
    betainc_regularized,
    correlation_matrix,
    correlation_screen,
    neutral_test,
    neutral_tests,
    stars_for,
    strong_pairs_table,
    t_two_sided_p,
)


def _likert(values):
    values = np.asarray(values, dtype=float)
    return make_dataset(values, kinds=["likert7"] * values.shape[1])


def _survey(rng, n=200):
    latent = rng.normal(size=(n, 1))
    x = latent + 0.4 * rng.normal(size=(n, 4))
    x[:, 3] = rng.normal(size=n)
    return _likert(np.clip(np.round(4 + 1.2 * x), 1, 7))


@pytest.mark.parametrize("method", ["pearson", "spearman"])
def test_matrix_matches_brute_force(method, rng):
    x = np.column_stack([rng.integers(1, 8, size=60), rng.normal(size=60), rng.integers(1, 8, size=60), np.full(60, 3.0)]).astype(float)
    r, flat = correlation_matrix(x, method)
    src = x if method == "pearson" else np.column_stack([brute_midranks(list(x[:, j])) for j in range(4)])
    for i in range(4):
        for j in range(4):
            expected = 1.0 if i == j else brute_pearson(src, i, j)
            assert abs(r[i, j] - expected) < 1e-12
    assert flat == [3]


def test_spearman_matches_scipy(rng):
    x = rng.integers(1, 8, size=(80, 3)).astype(float)
    r, _ = correlation_matrix(x, "spearman")
    ref = stats.spearmanr(x).statistic
    assert np.max(np.abs(r - ref)) < 1e-12


@settings(max_examples=50, deadline=None)
@given(
    arrays(np.float64, (25, 2), elements=st.floats(-100, 100)),
    st.floats(0.1, 10),
    st.floats(-50, 50),
)
def test_pearson_affine_invariance(x, scale, shift):
    if np.ptp(x[:, 0]) < 1e-3 or np.ptp(x[:, 1]) < 1e-3:
        return
    r, _ = correlation_matrix(x)
    y = x.copy()
    y[:, 0] = scale * y[:, 0] + shift
    r2, _ = correlation_matrix(y)
    assert abs(r[0, 1] - r2[0, 1]) < 1e-9


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (25, 2), elements=st.integers(1, 7).map(float)))
def test_spearman_monotone_invariance(x):
    r, _ = correlation_matrix(x, "spearman")
    y = x.copy()
    y[:, 1] = np.exp(y[:, 1])
    r2, _ = correlation_matrix(y, "spearman")
    assert r[0, 1] == r2[0, 1]


def test_screen_consistency(rng):
    d = _survey(rng)
    screen = correlation_screen(d, "pearson", 0.5)
    m = screen.matrix
    assert np.array_equal(m, m.T)
    assert np.all(np.diag(m) == 1.0)
    pos = {v: k for k, v in enumerate(screen.variables)}
    expected = {(screen.variables[a], screen.variables[b]) for a in range(len(pos)) for b in range(a + 1, len(pos)) if abs(m[a, b]) > 0.5}
    assert {(a, b) for a, b, _ in screen.strong_pairs} == expected
    mags = [abs(r) for _, _, r in screen.strong_pairs]
    assert mags == sorted(mags, reverse=True)
    assert len(strong_pairs_table(screen, d.names)) == len(screen.strong_pairs) + 1


def test_screen_skips_categorical(rng):
    x = rng.integers(0, 3, size=(30, 3)).astype(float)
    d = make_dataset(x, kinds=["categorical", "numeric", "likert7"])
    assert correlation_screen(d).variables == (1, 2)


def test_screen_impossible_threshold(rng):
    assert correlation_screen(_survey(rng), threshold=1.01).strong_pairs == ()


def test_screen_noise_has_no_strong_pairs():
    clean = 0
    for seed in range(100):
        x = np.random.default_rng(seed).normal(size=(10000, 5))
        clean += correlation_screen(make_dataset(x)).strong_pairs == ()
    assert clean >= 99


@pytest.mark.parametrize("a,b,x", [(0.5, 0.5, 0.3), (2.0, 5.0, 0.2), (10.0, 0.5, 0.95), (150.0, 0.5, 0.99), (1.0, 1.0, 0.5)])
def test_betainc_matches_scipy(a, b, x):
    from scipy.special import betainc

    assert abs(betainc_regularized(a, b, x) - betainc(a, b, x)) < 1e-12


@pytest.mark.parametrize("n", [5, 30, 300])
def test_t_p_value_matches_scipy(n):
    rng = np.random.default_rng(n)
    for shift in (0.0, 0.1, 0.5, 1.5):
        col = np.clip(np.round(4 + shift + 1.3 * rng.normal(size=n)), 1, 7)
        if col.std() == 0:
            continue
        res = neutral_test(_likert(col[:, None]), 0)
        ref = stats.ttest_1samp(col, 4.0)
        assert abs(res.p_value - ref.pvalue) < 1e-6
        assert abs(res.t_statistic - ref.statistic) < 1e-9


def test_t_tail_extremes():
    assert t_two_sided_p(0.0, 10) == pytest.approx(1.0)
    assert t_two_sided_p(math.inf, 10) == 0.0
    assert t_two_sided_p(50.0, 200) < 1e-100


def test_neutral_column_all_fours():
    r = neutral_test(_likert(np.full((10, 1), 4.0)), 0)
    assert (r.effect_size, r.p_value, r.stars) == (0.0, 1.0, "")


def test_constant_off_neutral():
    r = neutral_test(_likert(np.full((10, 1), 2.0)), 0)
    assert r.effect_size == -2.0 and r.p_value == 0.0 and r.t_statistic == -math.inf


def test_mean_five_column():
    rng = np.random.default_rng(0)
    col = 5.0 + rng.normal(size=100)
    r = neutral_test(make_dataset(col[:, None], kinds=["likert7"]), 0)
    assert abs(r.effect_size - 1.0) < 0.3
    assert 7 < r.t_statistic < 13
    assert r.p_value < 0.001 and r.stars == "***"


def test_neutral_test_needs_three():
    with pytest.raises(ValueError):
        neutral_test(_likert([[1.0], [2.0]]), 0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1))
def test_stars_consistent(p):
    s = stars_for(p)
    assert s == ("***" if p < 0.001 else "**" if p < 0.01 else "*" if p < 0.05 else "")


def test_neutral_tests_sorted_and_bonferroni(rng):
    d = _survey(rng)
    plain = neutral_tests(d)
    effects = [r.effect_size for r in plain]
    assert effects == sorted(effects)
    adj = {r.variable: r for r in neutral_tests(d, bonferroni=True)}
    for r in plain:
        assert adj[r.variable].p_value == pytest.approx(min(1.0, r.p_value * d.p))
