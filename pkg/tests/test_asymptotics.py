import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ks_2samp

from sigtail import asymptotics as asy
from sigtail.brownian import brownian_increments, sample_brownian
from sigtail.path_signature import PiecewiseLinearPath, signature, signature_levels


@pytest.fixture(scope="module")
def brownian_record():
    return signature(sample_brownian(2, 1.0, 12, seed=0).path, N=14)


def test_default_window():
    assert asy.default_window(14) == (8, 14)
    assert asy.default_window(6) == (3, 6)
    rec = signature(PiecewiseLinearPath.line([1.0, 1.0]), N=6)
    with pytest.raises(ValueError):
        asy.estimate_limsup(rec, window=(5, 9))
    with pytest.raises(ValueError):
        asy.estimate_limsup(rec, window=(4, 3))
    with pytest.raises(ValueError):
        asy.estimate_limsup(rec, p=0.5)


def test_line_estimate_vanishes_with_depth():
    line = PiecewiseLinearPath.line([1.0, 0.0])
    ks = [asy.estimate_limsup(signature(line, N=N)).kappa_hat for N in (8, 12, 16)]
    assert ks[0] > ks[1] > ks[2]
    # a_n = (Γ(n/2+1)/n!)^(2/n) is decreasing, so the window max sits at its left end
    for k, N in zip(ks, (8, 12, 16)):
        n = asy.default_window(N)[0]
        want = math.exp((2.0 / n) * (math.lgamma(n / 2 + 1) - math.lgamma(n + 1)))
        assert k == pytest.approx(want, rel=1e-12)


def test_brownian_estimate_in_slackened_range(brownian_record):
    rep = asy.estimate_limsup(brownian_record)
    assert rep.window == (8, 14) and rep.N == 14
    assert 0.2 <= rep.kappa_hat <= 5.0
    assert not rep.degenerate
    assert rep.window_max == pytest.approx(rep.a[7:].max())


def test_dilation_scales_estimate_exactly(brownian_record):
    path = sample_brownian(2, 1.0, 12, seed=0).path
    for c in (0.5, 3.0):
        rep = asy.estimate_limsup(signature(path.dilate(c), N=14))
        base = asy.estimate_limsup(brownian_record)
        np.testing.assert_allclose(rep.a, c * c * base.a, rtol=1e-12)
        assert rep.kappa_hat == pytest.approx(c * c * base.kappa_hat, rel=1e-12)


def test_report_serialization(brownian_record):
    rep = asy.estimate_limsup(brownian_record)
    body = json.loads(rep.to_json())
    assert body["window"] == [8, 14] and len(body["a"]) == 14
    lines = rep.to_csv().splitlines()
    assert lines[0] == "n,a_n" and lines[-1].startswith("kappa_hat,")


def test_kappa_from_levels_matches_record(brownian_record):
    inc = sample_brownian(2, 1.0, 12, seed=0).increments
    k = asy.kappa_from_levels(signature_levels(inc, 14), 1.0)
    assert k[0] == pytest.approx(asy.estimate_limsup(brownian_record).kappa_hat, rel=1e-12)


def test_degenerate_and_single_trial():
    flat = signature(PiecewiseLinearPath(np.array([0.0, 1.0]), np.zeros((2, 2))), N=6)
    assert asy.estimate_limsup(flat).degenerate
    res = asy.concentration_test(2, 1.0, trials=1, k=6, N=6)
    assert res.dispersion is None and not res.passed


def test_concentration_reports_halves():
    res = asy.concentration_test(2, 1.0, trials=8, k=10, N=10, seed=3)
    assert res.dispersion is not None and res.dispersion >= 0
    assert res.samples.first_half.shape == (8,)
    assert res.half_ratio == pytest.approx(float(np.median(res.samples.half_ratios)))


def test_sandwich_for_two_and_three_dimensions():
    led2 = asy.kappa_sandwich(2, samples=asy.kappa_samples(2, 1.0, 16, 12, 14, seed=0, halves=False))
    assert (led2.lower, led2.upper) == (0.5, 4.0)
    assert led2.passed
    led3 = asy.kappa_sandwich(3, samples=asy.kappa_samples(3, 1.0, 16, 12, 10, seed=0, halves=False))
    assert (led3.lower, led3.upper) == (1.0, 9.0)
    assert led3.passed


def test_brownian_scaling_common_noise():
    # the midpoint construction scales exactly with √T, so with the same stream
    # the 4t sample shrunk by 1/2 is the t sample
    for j in range(4):
        a = brownian_increments(2, 1.0, 10, 7, 1, first_trial=j)[0]
        b = brownian_increments(2, 4.0, 10, 7, 1, first_trial=j)[0] / 2
        assert np.array_equal(a, b)
        ka = asy.kappa_from_levels(signature_levels(a, 12), 1.0)
        kb = asy.kappa_from_levels(signature_levels(b, 12), 1.0)
        assert ka[0] == kb[0]


def test_brownian_scaling_distribution():
    a = asy.kappa_samples(2, 1.0, 16, 12, 14, seed=0, halves=False).kappas
    b = []
    for j in range(16):
        inc = brownian_increments(2, 4.0, 12, 1, 1, first_trial=j)[0] / 2
        b.append(asy.kappa_from_levels(signature_levels(inc, 14), 1.0)[0])
    assert ks_2samp(a, np.array(b)).statistic <= 0.25


def test_subadditivity_examples():
    line = PiecewiseLinearPath.line([1.0, -0.5])
    r = asy.subadditivity_check(line, 0.0, 0.5, 1.0, N=14)
    # each half is the whole shrunk by 1/2, so at finite depth the parts add to half
    assert r.rhs == pytest.approx(r.lhs / 2, rel=1e-12)
    assert r.finite_ratio <= 1.0
    path = sample_brownian(2, 1.0, 12, seed=0).path
    mid = asy.subadditivity_check(path, 0.0, 0.5, 1.0, N=14)
    assert mid.finite_ratio <= 1.0
    assert math.isfinite(mid.relative_margin)
    # a tiny first piece leaves the second one carrying everything
    edge = asy.subadditivity_check(path, 0.0, 1e-9, 1.0, N=14)
    assert edge.rhs == pytest.approx(edge.lhs, rel=1e-3)
    assert edge.passed
    with pytest.raises(ValueError):
        asy.subadditivity_check(path, 0.0, 1.0, 1.0)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), u=st.floats(0.05, 0.95))
def test_finite_level_subadditivity_is_exact(seed, u):
    rng = np.random.default_rng(seed)
    inc = rng.standard_normal((64, 2)) * 0.2
    path = PiecewiseLinearPath.from_increments(inc)
    r = asy.subadditivity_check(path, 0.0, u, 1.0, N=10)
    assert r.finite_ratio <= 1.0 + 1e-12


def test_neoclassical_examples():
    assert asy.neoclassical_check(0.7, 2.2, 1.0, 30) == pytest.approx(1.0, rel=1e-12)
    assert asy.neoclassical_check(1.0, 1.0, 2.0, 4) <= 1.0
    assert asy.neoclassical_check(3.0, 0.0, 2.0, 20) == pytest.approx(0.5, rel=1e-12)
    with pytest.raises(ValueError):
        asy.neoclassical_check(-1.0, 1.0, 2.0, 4)


def test_neoclassical_against_gamma():
    a, b, p, N = 1.3, 0.4, 1.5, 7
    lhs = sum(a ** (i / p) * b ** ((N - i) / p) / (math.gamma(i / p + 1) * math.gamma((N - i) / p + 1)) for i in range(N + 1))
    rhs = p * (a + b) ** (N / p) / math.gamma(N / p + 1)
    ll, lr = asy.neoclassical_log_sides(a, b, p, N)
    assert math.exp(ll) == pytest.approx(lhs, rel=1e-12)
    assert math.exp(lr) == pytest.approx(rhs, rel=1e-12)


def test_neoclassical_sweep():
    assert asy.neoclassical_sweep(1000, seed=0) <= 1.0 + 1e-12


def test_factorial_ratio():
    r = asy.factorial_ratio_check(2, 2, 200)
    np.testing.assert_allclose(r.values, 0.5, rtol=1e-12)
    r = asy.factorial_ratio_check(1, 1, 200)
    np.testing.assert_allclose(r.values, 1.0, rtol=1e-12)
    r = asy.factorial_ratio_check(3, 2, 200)
    assert r.bounded and math.isfinite(r.C)
    with pytest.raises(ValueError):
        asy.factorial_ratio_check(100, 2, 150)


def test_recover_line_parametrization_exactly():
    # with p = 1 every a_n of a line equals its length, so σ̂ is exact
    line = PiecewiseLinearPath(np.linspace(0, 1, 5), np.outer(np.linspace(0, 1, 5), [2.0, 1.0]))
    grid = np.linspace(0.1, 1.0, 10)
    est = asy.recover_parametrization(line, 3.0, grid, N=8, p=1.0)
    np.testing.assert_allclose(est, grid, rtol=1e-12)
    slow = line.reparametrize(np.sqrt)
    est = asy.recover_parametrization(slow, 3.0, grid, N=8, p=1.0)
    # only the vertex times move, so the length fraction interpolates between them
    np.testing.assert_allclose(est, np.interp(grid, slow.times, line.times), rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(est[[0, 4, 9]], [0.05, 0.25, 1.0], rtol=1e-10)


def test_recover_accepts_callable_and_zero():
    path = sample_brownian(2, 1.0, 8, seed=1).path
    kap = asy.estimate_limsup(signature(path, N=10)).kappa_hat
    grid = [0.0, 0.5, 1.0]
    direct = asy.recover_parametrization(path, kap, grid, N=10)
    via = asy.recover_parametrization(lambda ts: [signature(path, 0.0, t, N=10) for t in ts], kap, grid, N=10)
    np.testing.assert_allclose(direct, via, rtol=1e-12)
    assert direct[0] == 0.0 and direct[-1] == pytest.approx(1.0)
    assert np.all(np.diff(direct) >= 0)


def test_recover_errors():
    flat = PiecewiseLinearPath(np.array([0.0, 1.0]), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        asy.recover_parametrization(flat, 1.0, [0.5, 1.0], N=6)
    with pytest.raises(ValueError):
        asy.recover_parametrization(flat, 0.0, [0.5, 1.0], N=6)


def test_ito_bounds():
    led, low = asy.ito_bound_check(2, 1.0, samples=8, N=14, k=10, seed=0)
    assert (led.lower, led.upper) == (1.0, 2.0)
    assert not low
    assert led.passed
    _, low = asy.ito_bound_check(2, 1.0, samples=2, N=4, window=(2, 4), k=6, seed=0)
    assert low


def test_ito_one_dimensional_is_positive():
    kap = asy.ito_kappa_samples(1, 1.0, 4, 10, 14, seed=0)
    assert np.all(kap > 0)


def test_height_cross_small():
    rows = asy.height_cross_check(2, 1.0, lams=(4,), trials=2, k=10, N=14, seed=0)
    assert len(rows) == 2 and all(r.passed for r in rows)
    assert all(r.depth >= 10 for r in rows)


def test_height_series_small():
    rows = asy.height_series_check(2, 1.0, lams=(0.25,), trials=2, k=8, N=14, seed=0)
    assert all(r.passed for r in rows)
