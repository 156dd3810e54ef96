import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sigtail.path_signature import (
    PiecewiseLinearPath,
    normalized_level_sequence,
    prefix_signatures,
    reverse_series,
    reverse_signature,
    signature,
    signature_levels,
    signature_levels_at,
    signature_levels_chunked,
)
from sigtail.tensor_algebra import NormKind, is_group_like, level_norm, segment_exp


def random_path(rng, m, d, scale=1.0):
    inc = scale * rng.standard_normal((m, d)) / math.sqrt(m)
    times = np.concatenate([[0.0], np.sort(rng.uniform(0, 1, m - 1)), [1.0]])
    return PiecewiseLinearPath(times, np.vstack([np.zeros(d), np.cumsum(inc, axis=0)]))


def dp_signature(increments, word):
    """Coefficient of ``word`` (0-based) by dynamic programming over chords, pure python."""
    n = len(word)
    coef = [1.0] + [0.0] * n  # coef[i]: coefficient of word[:i] so far
    for v in increments:
        new = [0.0] * (n + 1)
        for j in range(n + 1):
            acc = 0.0
            for i in range(j + 1):
                block = 1.0
                for letter in word[i:j]:
                    block *= v[letter]
                acc += coef[i] * block / math.factorial(j - i)
            new[j] = acc
        coef = new
    return coef[n]


def riemann_level2(path, a, b, mesh=200_000):
    t = np.linspace(path.times[0], path.times[-1], mesh + 1)
    x = np.stack([np.interp(t, path.times, path.points[:, i]) for i in range(path.d)], axis=1)
    dx = np.diff(x, axis=0)
    left = x[:-1, a] - x[0, a]
    return float(np.sum((left + 0.5 * dx[:, a]) * dx[:, b]))


def staircase():
    return PiecewiseLinearPath(np.array([0.0, 0.5, 1.0]), np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]))


def test_single_segment_is_exponential():
    v = np.array([0.4, -1.3, 0.2])
    rec = signature(PiecewiseLinearPath.line(v), N=6)
    assert rec.series.max_abs_diff(segment_exp(v, 6)) < 1e-15


def test_staircase_level_two_against_riemann():
    rec = signature(staircase(), N=4)
    p = staircase()
    assert rec.series.coefficient((1, 2)) == 1.0
    assert rec.series.coefficient((2, 1)) == 0.0
    assert riemann_level2(p, 0, 1) == pytest.approx(1.0, abs=1e-4)
    assert riemann_level2(p, 1, 0) == pytest.approx(0.0, abs=1e-4)
    area2 = rec.series.coefficient((1, 2)) - rec.series.coefficient((2, 1))
    assert area2 == 1.0


def test_random_path_against_riemann():
    rng = np.random.default_rng(0)
    p = random_path(rng, 7, 2)
    rec = signature(p, N=2)
    for a, b in itertools.product(range(2), repeat=2):
        assert rec.series.coefficient((a + 1, b + 1)) == pytest.approx(riemann_level2(p, a, b), abs=1e-5)


@pytest.mark.parametrize("d,n", [(2, 3), (2, 5), (3, 4)])
def test_against_dynamic_programming(d, n):
    rng = np.random.default_rng(10 * d + n)
    inc = rng.standard_normal((9, d))
    levels = signature_levels(inc, n)
    for idx, word in enumerate(itertools.product(range(d), repeat=n)):
        assert levels[n][idx] == pytest.approx(dp_signature(inc, word), rel=1e-12, abs=1e-14)


def test_monotone_one_dimensional():
    inc = np.array([[0.1], [0.7], [0.05], [1.2]])
    levels = signature_levels(inc, 10)
    total = inc.sum()
    for n in range(11):
        assert levels[n][0] == pytest.approx(total**n / math.factorial(n), rel=1e-13)


def test_kernel_matches_numpy_evaluator():
    rng = np.random.default_rng(1)
    inc = rng.standard_normal((3, 300, 2)) * 0.05
    fast = signature_levels(inc, 8)
    slow = signature_levels_chunked(inc, 8, chunks=7)
    for a, b in zip(fast, slow):
        np.testing.assert_allclose(a, b, rtol=1e-11, atol=1e-14)


def test_batch_does_not_change_bits():
    rng = np.random.default_rng(2)
    inc = rng.standard_normal((4, 64, 3)) * 0.1
    batch = signature_levels(inc, 5)
    for b in range(4):
        single = signature_levels(inc[b], 5)
        for n in range(6):
            assert np.array_equal(batch[n][b], single[n])


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), u=st.floats(0.01, 0.99))
def test_chen_identity(seed, u):
    rng = np.random.default_rng(seed)
    p = random_path(rng, 10, 2)
    whole = signature(p, N=8).series
    split = signature(p, 0.0, u, N=8).series * signature(p, u, 1.0, N=8).series
    assert whole.max_abs_diff(split) < 1e-12


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_signatures_are_group_like(seed):
    rng = np.random.default_rng(seed)
    rec = signature(random_path(rng, 12, 3), N=6)
    assert is_group_like(rec.series, tol=1e-9).ok


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 3))
def test_bounded_variation_factorial_bound(seed, d):
    rng = np.random.default_rng(seed)
    p = random_path(rng, 15, d, scale=3.0)
    L = p.length(ord=1)
    rec = signature(p, N=8)
    for n in range(9):
        assert level_norm(rec.series.level(n), NormKind.L1_PROJ) <= L**n / math.factorial(n) * (1 + 1e-12)


def test_reverse_of_segment():
    v = np.array([0.3, -0.8])
    assert reverse_series(segment_exp(v, 6)).max_abs_diff(segment_exp(-v, 6)) < 1e-15


def test_reverse_matches_reversed_path():
    rng = np.random.default_rng(3)
    p = random_path(rng, 8, 2)
    back = PiecewiseLinearPath(1.0 - p.times[::-1], p.points[::-1])
    rev = reverse_signature(signature(p, N=6))
    assert rev.series.max_abs_diff(signature(back, N=6).series) < 1e-13
    assert reverse_signature(rev).series.max_abs_diff(signature(p, N=6).series) == 0.0
    for kind in (NormKind.L1_PROJ, NormKind.L2_COORD):
        np.testing.assert_allclose(rev.log_norms(kind), signature(p, N=6).log_norms(kind), rtol=1e-13)


def test_line_normalized_sequence():
    rec = signature(PiecewiseLinearPath.line([1.0, 0.0]), N=14)
    a = normalized_level_sequence(rec, 2.0)
    n = np.arange(1, 15)
    want = np.exp((2.0 / n) * (np.array([math.lgamma(k / 2 + 1) - math.lgamma(k + 1) for k in n])))
    np.testing.assert_allclose(a, want, rtol=1e-12)
    assert np.all(np.diff(a) < 0)


def test_p_one_recovers_length():
    rec = signature(PiecewiseLinearPath.line([2.5, -1.0]), N=12)
    np.testing.assert_allclose(normalized_level_sequence(rec, 1.0), 3.5, rtol=1e-12)


def test_staircase_a4_p1_against_brute_force():
    p = staircase()
    inc = p.increments
    total = sum(abs(dp_signature(inc, w)) for w in itertools.product(range(2), repeat=4))
    a4 = normalized_level_sequence(signature(p, N=4), 1.0)[3]
    assert a4 == pytest.approx((math.factorial(4) * total) ** 0.25, rel=1e-13)


def test_normalized_sequence_rejects_small_p():
    with pytest.raises(ValueError):
        normalized_level_sequence(signature(staircase(), N=3), 0.5)


def test_vanishing_level_maps_to_zero():
    rec = signature(PiecewiseLinearPath(np.array([0.0, 1.0]), np.zeros((2, 2))), N=4)
    assert np.all(normalized_level_sequence(rec) == 0.0)


def test_dilation_scales_normalized_levels():
    rng = np.random.default_rng(4)
    p = random_path(rng, 20, 2)
    a = normalized_level_sequence(signature(p, N=10))
    b = normalized_level_sequence(signature(p.dilate(3.0), N=10))
    np.testing.assert_allclose(b, 9.0 * a, rtol=1e-12)


def test_prefix_signatures_match_restricted():
    rng = np.random.default_rng(5)
    p = random_path(rng, 30, 2)
    taus = [0.9, 0.25, 0.5, p.times[7], 1.0, 0.5]
    recs = prefix_signatures(p, taus, N=6)
    assert [r.t for r in recs] == sorted(set(taus))
    for r in recs:
        assert r.series.max_abs_diff(signature(p, 0.0, r.t, N=6).series) < 1e-13
    with pytest.raises(ValueError):
        prefix_signatures(p, [0.0], N=4)


def test_signature_levels_at_checkpoints():
    rng = np.random.default_rng(6)
    inc = rng.standard_normal((12, 2)) * 0.3
    out = signature_levels_at(inc, 5, [12, 3, 3, 7])
    for cp, levels in zip([3, 7, 12], out):
        ref = signature_levels(inc[:cp], 5)
        for a, b in zip(levels, ref):
            np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-15)
    with pytest.raises(ValueError):
        signature_levels_at(inc, 5, [0])


def test_path_validation_and_csv():
    with pytest.raises(ValueError):
        PiecewiseLinearPath(np.array([0.0, 0.0]), np.zeros((2, 1)))
    with pytest.raises(ValueError):
        PiecewiseLinearPath(np.array([0.0]), np.zeros((1, 1)))
    rng = np.random.default_rng(7)
    p = random_path(rng, 5, 3)
    q = PiecewiseLinearPath.from_csv(p.to_csv())
    assert np.array_equal(p.times, q.times) and np.array_equal(p.points, q.points)
    assert p.to_csv().splitlines()[0] == "t,x1,x2,x3"
    with pytest.raises(ValueError):
        PiecewiseLinearPath.from_csv("s,x1\n0,0\n1,1\n")
    with pytest.raises(ValueError):
        p.restrict(0.5, 1.5)


def test_reparametrize_keeps_trace():
    rng = np.random.default_rng(8)
    p = random_path(rng, 10, 2)
    q = p.reparametrize(np.sqrt)
    assert signature(q, N=6).series.max_abs_diff(signature(p, N=6).series) == 0.0
    assert np.allclose(q(math.sqrt(p.times[3])), p.points[3], atol=1e-14)
