import itertools
import math

import numpy as np
import pytest

from sigtail import brownian as bm
from sigtail.tensor_algebra import word_index


def test_same_seed_same_path():
    a = bm.sample_brownian(3, 1.0, 10, seed=5, trial=2)
    b = bm.sample_brownian(3, 1.0, 10, seed=5, trial=2)
    c = bm.sample_brownian(3, 1.0, 10, seed=5, trial=3)
    assert np.array_equal(a.points, b.points)
    assert not np.array_equal(a.points, c.points)


def test_refinement_keeps_skeleton():
    coarse = bm.sample_brownian(2, 1.0, 8, seed=1)
    fine = bm.sample_brownian(2, 1.0, 9, seed=1)
    assert np.array_equal(fine.points[::2], coarse.points)


def test_endpoint_variance():
    M, T = 10_000, 2.0
    inc = bm.brownian_increments(1, T, 0, seed=3, M=M)
    x = inc[:, 0, 0]
    var = x.var(ddof=1)
    # Var of the sample variance of a Gaussian is 2 σ⁴/(M-1)
    assert abs(var - T) <= 4 * T * math.sqrt(2 / (M - 1))
    assert abs(x.mean()) <= 4 * math.sqrt(T / M)


def test_fine_increments_have_mesh_variance():
    k = 14
    inc = bm.sample_brownian(1, 1.0, k, seed=4).increments[:, 0]
    m = inc.size
    scaled = inc**2 * m
    assert abs(scaled.mean() - 1.0) <= 4 * math.sqrt(2 / m)


def test_depth_limits():
    with pytest.raises(ValueError):
        bm.sample_brownian(2, 1.0, bm.MAX_DEPTH + 1)


def test_expected_signature_values():
    es = bm.expected_signature(2, 1.0, 4)
    for w in ((1, 1), (2, 2)):
        assert es.coefficient(w) == 0.5
    for w in ((1, 2), (2, 1)):
        assert es.coefficient(w) == 0.0
    nonzero = {(1, 1, 1, 1), (1, 1, 2, 2), (2, 2, 1, 1), (2, 2, 2, 2)}
    for w in itertools.product((1, 2), repeat=4):
        assert es.coefficient(w) == (0.125 if w in nonzero else 0.0)
    for d in (1, 3):
        es = bm.expected_signature(d, 2.0, 3)
        assert not np.any(es.level(1)) and not np.any(es.level(3))
    assert bm.expected_signature(3, 2.0, 4).coefficient((3, 3, 1, 1)) == pytest.approx(4 / 8)


def test_chord_expected_signature_single_chord():
    # one chord X ~ N(0, t I): level n is E[X^{⊗n}]/n!
    t = 1.5
    es = bm.expected_chord_signature(2, t, 0, 4)
    assert es.coefficient((1, 1)) == pytest.approx(t / 2)
    assert es.coefficient((1, 1, 2, 2)) == pytest.approx(t * t / 24)
    assert es.coefficient((1, 1, 1, 1)) == pytest.approx(3 * t * t / 24)
    assert es.coefficient((1, 2)) == 0.0


def test_chord_expected_signature_converges():
    exact = bm.expected_signature(2, 1.0, 6)
    gaps = [bm.expected_chord_signature(2, 1.0, k, 6).max_abs_diff(exact) for k in (4, 6, 8, 10)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-3
    # level 2 is exact for every depth
    assert bm.expected_chord_signature(2, 1.0, 3, 2).max_abs_diff(bm.expected_signature(2, 1.0, 2)) < 1e-15


def test_mc_matches_chord_expectation():
    mc = bm.mc_expected_signature(2, 1.0, 4, M=2000, k=6, seed=11)
    exact = bm.expected_chord_signature(2, 1.0, 6, 4)
    for n in range(1, 5):
        z = np.abs(mc.mean.level(n) - exact.level(n)) / mc.stderr.level(n)
        assert np.max(z) <= 4.0


def test_mc_single_sample():
    mc = bm.mc_expected_signature(2, 1.0, 3, M=1, k=4, seed=2)
    assert mc.stderr is None and mc.M == 1
    from sigtail.path_signature import signature

    direct = signature(bm.sample_brownian(2, 1.0, 4, seed=2, trial=0).path, N=3).series
    assert mc.mean.max_abs_diff(direct) == 0.0


def test_exact_second_moments_from_gaussian_calculus():
    es = bm.expected_signature(2, 1.0, 4)
    assert bm.exact_second_moment((1,), es) == pytest.approx(1.0)
    # (B¹)²/2 has second moment 3/4
    assert bm.exact_second_moment((1, 1), es) == pytest.approx(0.75)
    # ∫B¹dB² has second moment ∫ s ds = 1/2
    assert bm.exact_second_moment((1, 2), es) == pytest.approx(0.5)


def test_second_moment_bounds():
    assert bm.second_moment_bound(1, 1.0) == pytest.approx(1.0)
    assert bm.second_moment_bound(2, 1.0) == pytest.approx(0.75)
    assert bm.second_moment_bound(3, 2.0) == pytest.approx(20 / (6 * 8) * 8)
    for n in range(1, 12):
        assert bm.second_moment_bound_stirling(n, 1.0) >= bm.second_moment_bound(n, 1.0)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_constant_words_attain_second_moment_bound(n):
    es = bm.expected_signature(2, 1.0, 2 * n)
    assert bm.exact_second_moment((1,) * n, es) == pytest.approx(bm.second_moment_bound(n, 1.0), rel=1e-12)


def test_all_words_below_second_moment_bound():
    es = bm.expected_signature(2, 1.0, 8)
    for n in range(1, 5):
        bound = bm.second_moment_bound(n, 1.0)
        for w in itertools.product((1, 2), repeat=n):
            assert bm.exact_second_moment(w, es) <= bound * (1 + 1e-12)


def test_sup_moment_bound_values():
    assert bm.sup_moment_bound(3, 1.0) == pytest.approx(1.727, abs=2.5e-3)
    for n in (3, 4, 6):
        assert bm.sup_moment_bound(n, 0.5) == pytest.approx(2 ** (-n / 2) * bm.sup_moment_bound(n, 1.0), rel=1e-13)
    with pytest.raises(ValueError):
        bm.sup_moment_bound(2, 1.0)


def test_mc_second_moment_examples():
    r1 = bm.mc_second_moment((1,), 1.0, M=4000, k=8, seed=1)
    assert r1.bound == pytest.approx(1.0)
    assert abs(r1.mean - 1.0) <= 4 * r1.stderr
    r2 = bm.mc_second_moment((1, 2), 1.0, M=4000, k=8, seed=1)
    assert r2.bound == pytest.approx(0.75)
    assert r2.passed
    assert abs(r2.mean - 0.5) <= 4 * r2.stderr


def test_second_moment_time_scaling():
    word = (1, 2, 2)
    a = bm.mc_second_moment(word, 1.0, M=200, k=8, seed=9)
    b = bm.mc_second_moment(word, 2.0, M=200, k=8, seed=9)
    assert b.mean == pytest.approx(2**3 * a.mean, rel=1e-10)


def test_sup_moments_below_bound():
    rng = np.random.default_rng(0)
    words = bm.random_words(rng, 5, 2, 3, 6)
    for r in bm.mc_sup_moments(words, 0.0, 1.0, M=1000, k=10, seed=4):
        assert r.kind == "sup"
        assert r.passed
    with pytest.raises(ValueError):
        bm.mc_sup_moments(words, 1.0, 1.0)


def test_sup_dominates_final_value():
    words = [(1, 2, 1), (2, 2, 1, 1)]
    final, sup = bm.word_coefficients(words, 2, 1.0, 50, 8, 3)
    assert np.all(sup >= np.abs(final) - 1e-15)


def test_word_coefficients_match_signature():
    from sigtail.path_signature import signature

    words = [(1,), (2, 1), (1, 2, 2)]
    final, _ = bm.word_coefficients(words, 2, 1.0, 3, 6, 8)
    for j in range(3):
        sig = signature(bm.sample_brownian(2, 1.0, 6, 8, j).path, N=3).series
        for i, w in enumerate(words):
            assert final[j, i] == pytest.approx(sig.coefficient(w), rel=1e-12, abs=1e-14)


def test_random_words():
    a = bm.random_words(np.random.default_rng(1), 20, 3, 1, 8)
    b = bm.random_words(np.random.default_rng(1), 20, 3, 1, 8)
    assert a == b
    assert all(1 <= len(w) <= 8 and all(1 <= x <= 3 for x in w) for w in a)


def test_moment_csv():
    r = bm.MomentReport.from_values((1, 2), np.array([0.1, 0.3, 0.2]), 0.75, "second")
    text = bm.moments_to_csv([r])
    assert text.splitlines()[0] == "word,n,M,mean,stderr,bound,pass"
    assert text.splitlines()[1].endswith(",1")


def ito_left_sums(inc, word):
    """Left-point iterated sums Σ_{j1<...<jn} Δ^{w1}_{j1}···Δ^{wn}_{jn}, pure python."""
    acc = [1.0] + [0.0] * len(word)
    for v in inc:
        for i in range(len(word), 0, -1):
            acc[i] += acc[i - 1] * v[word[i - 1]]
    return acc[-1]


def test_ito_levels_against_left_sums():
    s = bm.sample_brownian(2, 1.0, 5, seed=7)
    ito = bm.ito_signature(s, 4)
    for n in (1, 2, 3, 4):
        for w in itertools.product(range(2), repeat=n):
            assert ito.level(n)[word_index(w, 2)] == pytest.approx(ito_left_sums(s.increments, w), abs=1e-13)


def test_ito_versus_stratonovich_on_one_path():
    s = bm.sample_brownian(2, 1.0, 10, seed=2)
    ito, strat = bm.ito_signature(s, 2), bm.stratonovich_signature(s, 2)
    end = s.points[-1] - s.points[0]
    np.testing.assert_allclose(ito.level(1), end, atol=1e-13)
    np.testing.assert_allclose(strat.level(1), end, atol=1e-13)
    qv = np.sum(s.increments**2, axis=0)
    for i in range(2):
        assert strat.coefficient((i + 1, i + 1)) == pytest.approx(end[i] ** 2 / 2, abs=1e-12)
        assert ito.coefficient((i + 1, i + 1)) == pytest.approx((end[i] ** 2 - qv[i]) / 2, abs=1e-12)


def test_ito_mean_gap():
    M = 3000
    inc = bm.brownian_increments(2, 1.0, 8, 5, M)
    ito = bm.ito_levels(inc, 2)[2]
    from sigtail.path_signature import signature_levels

    strat = signature_levels(inc, 2)[2]
    for idx, target_ito, target_strat in ((0, 0.0, 0.5), (3, 0.0, 0.5), (1, 0.0, 0.0), (2, 0.0, 0.0)):
        for vals, target in ((ito[:, idx], target_ito), (strat[:, idx], target_strat)):
            se = vals.std(ddof=1) / math.sqrt(M)
            assert abs(vals.mean() - target) <= 4 * se
