"""Registered verification checks, grouped into scale tiers.

Each check returns a :class:`CheckResult` with a pass flag, scalar metrics
and optional CSV files.  :func:`run_verify` runs every check of a tier and
writes the CSV files plus ``manifest.json`` to an output directory.  Wall
times go to a separate ``timing.json`` so that everything else is
byte-identical between runs with the same seed.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from . import asymptotics as asy
from . import brownian as bm
from . import hyperbolic as hy
from .path_signature import (
    PiecewiseLinearPath,
    normalized_level_sequence,
    reverse_series,
    signature,
    signature_levels,
)
from .tensor_algebra import (
    NormKind,
    Permutation,
    apply_permutation,
    is_group_like,
    level_norm,
    outer,
    shuffles,
    truncated_product,
)

# one tag per verified statement; every tag must be claimed by some check
REQUIRED_TAGS = (
    "normalized-limsup",
    "tensor-algebra",
    "admissible-norms",
    "projective-norm",
    "shuffle-identity",
    "chen-identity",
    "moment-estimates",
    "fawcett-expected-signature",
    "upper-estimate",
    "reversal-symmetry",
    "group-like-nonvanishing",
    "factorial-ratio",
    "subadditivity",
    "neoclassical-inequality",
    "deterministic-constant",
    "hyperboloid-model",
    "length-preservation",
    "triangle-defect",
    "dual-projective-norm",
    "cartan-sde",
    "height-series",
    "height-limsup-comparison",
    "height-decay",
    "lower-estimate",
    "parametrization-recovery",
    "ito-signature",
    "sup-vs-limsup",
)

TIERS = {
    "smoke": dict(
        alg_paths=10, alg_N=6, fawcett_M=0, moments_M=0, hyp_chords=1000, triangles=20,
        decay_M=0, kappa_trials=0, sub_pairs=0, cross_trials=0, recover_samples=0, ito_samples=0,
        neo_points=200,
    ),
    "desk": dict(
        alg_paths=50, alg_N=8, fawcett_M=10_000, fawcett_k=10, moments_M=5000, moments_k=12,
        second_words=20, sup_words=8, hyp_chords=10_000, triangles=100, decay_M=2000, decay_k=8,
        sde_M=2000, kappa_trials=16, kappa_k=12, kappa_N=14, sub_pairs=20, cross_trials=8,
        recover_samples=4, ito_samples=16, ito_gap_M=4000, neo_points=1000,
    ),
    "deep": dict(
        alg_paths=200, alg_N=8, fawcett_M=40_000, fawcett_k=12, moments_M=20_000, moments_k=12,
        second_words=40, sup_words=16, hyp_chords=100_000, triangles=1000, decay_M=8000, decay_k=8,
        sde_M=4000, kappa_trials=32, kappa_k=13, kappa_N=14, sub_pairs=40, cross_trials=16,
        recover_samples=8, ito_samples=32, ito_gap_M=10_000, neo_points=5000,
    ),
}


CHECK_TAGS = {
    "algebra": ("tensor-algebra", "chen-identity", "shuffle-identity", "admissible-norms", "projective-norm",
                "reversal-symmetry", "group-like-nonvanishing", "sup-vs-limsup", "dual-projective-norm"),
    "fawcett": ("fawcett-expected-signature",),
    "moments": ("moment-estimates", "upper-estimate"),
    "hyperbolic": ("hyperboloid-model", "length-preservation", "triangle-defect"),
    "height_decay": ("height-decay", "cartan-sde", "lower-estimate"),
    "kappa": ("deterministic-constant", "upper-estimate", "lower-estimate", "normalized-limsup"),
    "subadditivity": ("subadditivity", "neoclassical-inequality", "factorial-ratio"),
    "height_cross": ("height-limsup-comparison", "height-series"),
    "bv": ("normalized-limsup",),
    "recovery": ("parametrization-recovery",),
    "ito": ("ito-signature",),
}


@dataclass
class CheckResult:
    name: str
    tags: tuple[str, ...]
    passed: bool
    metrics: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)
    note: str = ""


def _rng(seed: int, stream: int) -> np.random.Generator:
    # streams for check-local randomness, disjoint from Brownian trial streams
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(1_000_000 + stream,))))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _f(x) -> float:
    return float(x)


# checks -------------------------------------------------------------------------


def check_algebra(seed: int, P: dict) -> CheckResult:
    """Exact identities on random unit-scale piecewise-linear paths, d = 2."""
    d, N, count = 2, P["alg_N"], P["alg_paths"]
    rng = _rng(seed, 1)
    worst = dict(chen=0.0, group_like=0.0, perm_norm=0.0, cross_norm=0.0, double_reversal=0.0,
                 inverse=0.0, associativity=0.0, bv_bound=0.0, nonvanishing=0.0, sup_limsup=0.0,
                 dual_lower=0.0)
    for _ in range(count):
        m = 10
        path = PiecewiseLinearPath.from_increments(rng.normal(size=(m, d)) / math.sqrt(m))
        u = float(rng.uniform(0.05, 0.95))
        g = signature(path, N=N).series
        left = signature(path, 0.0, u, N).series
        right = signature(path, u, 1.0, N).series
        worst["chen"] = max(worst["chen"], truncated_product(left, right).max_abs_diff(g))
        worst["associativity"] = max(worst["associativity"],
                                     ((left * right) * g).max_abs_diff(left * (right * g)))
        worst["group_like"] = max(worst["group_like"], is_group_like(g, tol=1e-12).violation)
        rg = reverse_series(g)
        worst["double_reversal"] = max(worst["double_reversal"], reverse_series(rg).max_abs_diff(g))
        worst["inverse"] = max(worst["inverse"], (g * rg).max_abs_diff(g.unit(d, N)))
        L1 = path.length(ord=1)
        for n in range(1, N + 1):
            lev = g.level(n)
            sigma = Permutation(rng.permutation(n))
            moved = apply_permutation(sigma, lev, d)
            for kind in (NormKind.L1_PROJ, NormKind.L2_COORD, NormKind.L1_OF_COORDS_UPPER):
                a, b = level_norm(lev, kind), level_norm(moved, kind)
                worst["perm_norm"] = max(worst["perm_norm"], abs(a - b) / max(a, 1e-300))
            # ‖g_n‖ ≤ L^n / n! with the l¹ length
            bound = L1**n / math.factorial(n)
            worst["bv_bound"] = max(worst["bv_bound"], level_norm(lev, "l1_proj") - bound)
        for n in range(1, N):
            for k in range(1, N - n + 1):
                a, b = g.level(n), g.level(k)
                prod = level_norm(outer(a, b), "l1_proj")
                ref = level_norm(a, "l1_proj") * level_norm(b, "l1_proj")
                worst["cross_norm"] = max(worst["cross_norm"], abs(prod - ref) / max(ref, 1e-300))
        for k in range(1, N + 1):
            gk = level_norm(g.level(k), "l1_proj")
            for n in range(2, N // k + 1):
                gnk = level_norm(g.level(n * k), "l1_proj")
                coeff = math.exp(math.lgamma(n * k + 1) - n * math.lgamma(k + 1))
                worst["nonvanishing"] = max(worst["nonvanishing"], (gk**n - coeff * gnk) / max(gk**n, 1e-300))
                lhs = (math.factorial(k) * gk) ** (1.0 / k)
                rhs = (math.factorial(n * k) * gnk) ** (1.0 / (n * k))
                worst["sup_limsup"] = max(worst["sup_limsup"], (lhs - rhs) / max(lhs, 1e-300))
        lev = g.level(3)
        lo = level_norm(lev, "sampled_dual_lower", d=d, samples=2000, seed=seed)
        hi = level_norm(lev, "l1_upper")
        worst["dual_lower"] = max(worst["dual_lower"], lo - hi)
    shuffle_count_ok = all(
        sum(1 for _ in shuffles(n, k)) == math.comb(n + k, n) for n in range(0, 11) for k in range(0, 11 - n)
    )
    tol = 1e-12
    passed = shuffle_count_ok and all(v <= tol for v in worst.values())
    metrics = {k: _f(v) for k, v in worst.items()}
    metrics["shuffle_count_ok"] = shuffle_count_ok
    metrics["paths"] = count
    metrics["N"] = N
    return CheckResult("algebra", CHECK_TAGS["algebra"], passed, metrics)


def check_fawcett(seed: int, P: dict) -> CheckResult:
    d, t, N = 2, 1.0, 4
    exact = bm.expected_signature(d, t, N)
    chord = bm.expected_chord_signature(d, t, P.get("fawcett_k", 10), N)
    metrics = {"chord_vs_closed_form": _f(chord.max_abs_diff(exact))}
    files = {}
    passed = True
    if P["fawcett_M"]:
        mc = bm.mc_expected_signature(d, t, N, P["fawcett_M"], P["fawcett_k"], seed)
        rows, zmax = [], 0.0
        for n in range(1, N + 1):
            for idx in range(d**n):
                word = np.unravel_index(idx, (d,) * n)
                w = tuple(int(x) + 1 for x in word)
                m, s, e = mc.mean.level(n)[idx], mc.stderr.level(n)[idx], exact.level(n)[idx]
                z = abs(m - e) / s
                zmax = max(zmax, z)
                rows.append([" ".join(map(str, w)), n, repr(_f(m)), repr(_f(s)), repr(_f(e)), repr(_f(z))])
        files["fawcett.csv"] = _csv(["word", "n", "mean", "stderr", "expected", "z"], rows)
        metrics.update(M=mc.M, k=P["fawcett_k"], max_z=_f(zmax),
                       mean_11=_f(mc.mean.coefficient((1, 1))), stderr_11=_f(mc.stderr.coefficient((1, 1))),
                       mean_1122=_f(mc.mean.coefficient((1, 1, 2, 2))),
                       stderr_1122=_f(mc.stderr.coefficient((1, 1, 2, 2))))
        passed = zmax <= 4.0
    return CheckResult("fawcett", CHECK_TAGS["fawcett"], passed, metrics, files)


def check_moments(seed: int, P: dict) -> CheckResult:
    d, t = 2, 1.0
    rng = _rng(seed, 3)
    second_words = bm.random_words(rng, P["second_words"], d, 1, 8)
    sup_words = bm.random_words(rng, P["sup_words"], d, 3, 6)
    M, k = P["moments_M"], P["moments_k"]
    final, sup = bm.word_coefficients(second_words + sup_words, d, t, M, k, seed)
    reports = []
    for i, w in enumerate(second_words):
        reports.append(bm.MomentReport.from_values(w, final[:, i] ** 2, bm.second_moment_bound(len(w), t), "second",
                                                   bm.second_moment_bound_stirling(len(w), t)))
    for j, w in enumerate(sup_words):
        reports.append(bm.MomentReport.from_values(w, sup[:, len(second_words) + j], bm.sup_moment_bound(len(w), t), "sup"))
    sec = [r for r in reports if r.kind == "second"]
    sp = [r for r in reports if r.kind == "sup"]
    files = {"second_moments.csv": bm.moments_to_csv(sec), "sup_moments.csv": bm.moments_to_csv(sp)}
    metrics = dict(M=M, k=k, second_failures=sum(not r.passed for r in sec), sup_failures=sum(not r.passed for r in sp),
                   second_worst_z=_f(max((r.mean - r.bound) / r.stderr for r in sec)),
                   sup_worst_ratio=_f(max(r.mean / r.bound for r in sp)))
    return CheckResult("moments", CHECK_TAGS["moments"], all(r.passed for r in reports), metrics, files)


def check_hyperbolic(seed: int, P: dict) -> CheckResult:
    rng = _rng(seed, 4)
    chord_err = 0.0
    for _ in range(50):
        d = int(rng.integers(1, 5))
        v = rng.normal(size=d)
        lam = float(rng.uniform(0.1, 8.0))
        X = hy.chord_exp(lam * v).point()
        chord_err = max(chord_err, abs(hy.hyperbolic_distance(X, hy.HyperbolicPoint.origin(d)) - lam * np.linalg.norm(v)))
    m = P["hyp_chords"]
    path = PiecewiseLinearPath.from_increments(rng.normal(size=(m, 2)) / math.sqrt(m))
    tr = hy.develop(path, 1.0)
    length_err = abs(tr.length() - path.length(2)) / path.length(2)
    cosh_err = float(np.max(np.abs(-hy.minkowski(tr.points, hy.origin(2)[None, :]) - tr.heights) / tr.heights))
    sweep = hy.triangle_sweep(P["triangles"], seed)
    tri_rows = [[repr(b), repr(c), repr(th), repr(r.a), repr(r.defect), repr(r.bound), "1" if r.ok else "0"]
                for b, c, th, r in sweep]
    two_chord_ok = True
    for _ in range(10):
        v1, v2 = rng.normal(size=2), rng.normal(size=2)
        for lam in (1.0, 2.0, 4.0, 8.0):
            dft, bnd = hy.two_chord_defect(v1, v2, lam)
            two_chord_ok &= -1e-9 <= dft <= bnd + 1e-9
    metrics = dict(chord_distance_err=_f(chord_err), max_frame_defect=_f(tr.frame_defects.max()), chords=m,
                   length_rel_err=_f(length_err), cosh_rho_err=_f(cosh_err),
                   triangles=len(sweep), triangle_failures=sum(not r.ok for *_, r in sweep),
                   two_chord_ok=bool(two_chord_ok))
    passed = (chord_err <= 1e-10 and tr.frame_defects.max() <= 1e-9 and length_err <= 1e-9 and cosh_err <= 1e-9
              and metrics["triangle_failures"] == 0 and two_chord_ok)
    files = {"triangles.csv": _csv(["b", "c", "theta", "a", "defect", "bound", "pass"], tri_rows),
             "development_trace.csv": tr.to_csv()}
    return CheckResult("hyperbolic", CHECK_TAGS["hyperbolic"], passed, metrics, files)


def check_height_decay(seed: int, P: dict) -> CheckResult:
    rows = hy.height_decay_experiment((2, 3, 4), (0.5, 1.0), (1.0, 2.0), 1.0, P["decay_M"], P["decay_k"], seed)
    # μ = d - 1.5 as well (d = 2 already has 0.5)
    for d in (3, 4):
        rows += hy.height_decay_experiment((d,), (d - 1.5,), (1.0, 2.0), 1.0, P["decay_M"], P["decay_k"], seed)
    h_sde = hy.ito_height_paths(3, 1.0, 2.0, P["sde_M"], None, seed)
    v = 1.0 / h_sde
    sde_mean, sde_se = float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))
    ref = next(r for r in rows if r.d == 3 and r.mu == 1.0 and r.lam == 2.0)
    sde_agree = abs(sde_mean - ref.mean) <= 3.0 * math.hypot(sde_se, ref.stderr)
    metrics = dict(M=P["decay_M"], failures=sum(not r.passed for r in rows),
                   boundary_points=sum(not r.in_range for r in rows),
                   d3_mu1_lam2_mean=_f(ref.mean), d3_mu1_lam2_bound=_f(ref.bound),
                   sde_mean=_f(sde_mean), sde_stderr=_f(sde_se), sde_agrees=bool(sde_agree))
    passed = all(r.passed for r in rows) and sde_agree
    return CheckResult("height_decay", CHECK_TAGS["height_decay"], passed, metrics,
                       {"height_decay.csv": hy.height_rows_to_csv(rows)})


def check_kappa(seed: int, P: dict) -> CheckResult:
    ks = asy.kappa_samples(2, 1.0, P["kappa_trials"], P["kappa_k"], P["kappa_N"], seed)
    conc = asy.concentration_test(2, samples=ks)
    led = asy.kappa_sandwich(2, samples=ks)
    rows = [[j, repr(_f(a)), repr(_f(b)), repr(_f(c))] for j, (a, b, c) in enumerate(zip(ks.kappas, ks.first_half, ks.second_half))]
    metrics = dict(trials=ks.kappas.size, k=ks.k, N=ks.N, window=list(ks.window), median=_f(ks.median),
                   dispersion=_f(conc.dispersion), lower_limit=_f(led.slack_lower * led.lower),
                   upper_limit=_f(led.slack_upper * led.upper), half_ratio=_f(conc.half_ratio),
                   halves_stable=bool(conc.halves_stable))
    passed = led.passed and conc.passed
    return CheckResult("kappa", CHECK_TAGS["kappa"],
                       passed, metrics, {"kappa.csv": _csv(["trial", "kappa_hat", "first_half", "second_half"], rows)})


def check_subadditivity(seed: int, P: dict) -> CheckResult:
    rng = _rng(seed, 7)
    rows, worst, finite = [], math.inf, 0.0
    for j in range(P["sub_pairs"]):
        s = bm.sample_brownian(2, 1.0, P["kappa_k"], seed, trial=1000 + j)
        u = float(rng.uniform(0.1, 0.9))
        r = asy.subadditivity_check(s.path, 0.0, u, 1.0, P["kappa_N"])
        worst = min(worst, r.relative_margin)
        finite = max(finite, r.finite_ratio)
        rows.append([1000 + j, repr(u), repr(r.lhs), repr(r.rhs), repr(r.relative_margin), repr(r.finite_ratio),
                     "1" if r.passed else "0"])
    neo = asy.neoclassical_sweep(P["neo_points"], seed)
    fr = [asy.factorial_ratio_check(a, p, 200) for a, p in ((1, 1), (2, 2), (3, 2), (1.5, 1.3))]
    metrics = dict(pairs=P["sub_pairs"], worst_relative_margin=_f(worst), worst_finite_level_ratio=_f(finite),
                   neoclassical_worst=_f(neo),
                   factorial_C=[_f(f.C) for f in fr], factorial_slopes=[_f(f.tail_slope) for f in fr])
    passed = worst >= -asy.SUBADDITIVE_SLACK and neo <= 1 + 1e-12 and all(f.bounded for f in fr)
    return CheckResult("subadditivity", CHECK_TAGS["subadditivity"], passed, metrics,
                       {"subadditivity.csv": _csv(["trial", "u", "lhs", "rhs", "rel_margin", "finite_ratio", "pass"], rows)})


def check_height_cross(seed: int, P: dict) -> CheckResult:
    cross = asy.height_cross_check(2, 1.0, (4, 8, 16), P["cross_trials"], P["kappa_k"], P["kappa_N"], seed)
    series = asy.height_series_check(2, 1.0, (0.25, 0.5), P["cross_trials"], P["kappa_k"], P["kappa_N"], seed)
    rows = [[r.trial, repr(r.lam), repr(r.log_h_over_lam2), repr(r.limit), r.depth, "1" if r.passed else "0"] for r in cross]
    srows = [[r.trial, repr(r.lam), repr(r.h_ode), repr(r.h_series), repr(r.tail), "1" if r.passed else "0"] for r in series]
    metrics = dict(trials=P["cross_trials"], cross_failures=sum(not r.passed for r in cross),
                   worst_cross_ratio=_f(max(r.log_h_over_lam2 / r.limit for r in cross)),
                   series_failures=sum(not r.passed for r in series),
                   worst_series_gap=_f(max(abs(r.h_ode - r.h_series) for r in series)))
    passed = all(r.passed for r in cross) and all(r.passed for r in series)
    return CheckResult("height_cross", CHECK_TAGS["height_cross"], passed, metrics,
                       {"height_cross.csv": _csv(["trial", "lambda", "logh_over_lam2", "limit", "depth", "pass"], rows),
                        "height_series.csv": _csv(["trial", "lambda", "h_ode", "h_series", "tail", "pass"], srows)})


def bv_paths(scale: float = 0.5) -> dict[str, PiecewiseLinearPath]:
    """A line and a unit-step staircase rescaled to l¹ length ``scale``."""
    line = PiecewiseLinearPath.line([scale, 0.0])
    steps = np.array([[1, 0], [0, 1], [1, 0], [0, 1]], dtype=float) * (scale / 4)
    return {"line": line, "staircase": PiecewiseLinearPath.from_increments(steps)}


def check_bv(seed: int, P: dict) -> CheckResult:
    N = 14
    lo, hi = asy.default_window(N)
    rows, ok = [], True
    metrics = {}
    for name, path in bv_paths().items():
        a = normalized_level_sequence(signature(path, N=N), 2.0)
        mono = bool(np.all(np.diff(a[lo - 1 : hi]) < 0))
        ok &= a[-1] < 0.05 and mono
        metrics[f"{name}_a_N"] = _f(a[-1])
        metrics[f"{name}_monotone"] = mono
        rows += [[name, n, repr(_f(v))] for n, v in enumerate(a, start=1)]
    # unit-scale values for reference: these sit above 0.05 at N = 14
    for name, path in bv_paths(1.0).items():
        metrics[f"{name}_unit_a_N"] = _f(normalized_level_sequence(signature(path, N=N), 2.0)[-1])
    return CheckResult("bv", CHECK_TAGS["bv"], bool(ok), metrics, {"bv.csv": _csv(["path", "n", "a_n"], rows)})


def check_recovery(seed: int, P: dict) -> CheckResult:
    grid = np.linspace(0.1, 1.0, 10)
    rows, worst = [], 0.0
    for j in range(P["recover_samples"]):
        s = bm.sample_brownian(2, 1.0, P["kappa_k"], seed, trial=2000 + j)
        path = s.path
        kap = asy.estimate_limsup(signature(path, N=P["kappa_N"])).kappa_hat
        for name, target, p in (("identity", grid, path), ("squared", grid**2, path.reparametrize(np.sqrt))):
            est = asy.recover_parametrization(p, kap, grid, N=P["kappa_N"])
            err = float(np.max(np.abs(est - target)))
            worst = max(worst, err)
            rows += [[2000 + j, name, repr(_f(g)), repr(_f(x)), repr(_f(y))] for g, x, y in zip(grid, est, target)]
    metrics = dict(samples=P["recover_samples"], worst_sup_error=_f(worst))
    return CheckResult("recovery", CHECK_TAGS["recovery"], worst <= 0.15, metrics,
                       {"recovery.csv": _csv(["trial", "case", "t", "sigma_hat", "sigma"], rows)})


def check_ito(seed: int, P: dict) -> CheckResult:
    led, low_conf = asy.ito_bound_check(2, 1.0, P["ito_samples"], P["kappa_N"], None, P["kappa_k"], seed)
    M = P["ito_gap_M"]
    inc = bm.brownian_increments(2, 1.0, 10, seed, M, first_trial=3000)
    ito = bm.ito_levels(inc, 2)[2]
    strat = signature_levels(inc, 2)[2]
    gap_ok = True
    gaps = []
    for idx in (0, 3):  # words (1,1) and (2,2)
        diff = strat[:, idx] - ito[:, idx]
        se = math.hypot(strat[:, idx].std(ddof=1), ito[:, idx].std(ddof=1)) / math.sqrt(M)
        gaps.append(_f(diff.mean()))
        gap_ok &= abs(strat[:, idx].mean() - ito[:, idx].mean() - 0.5) <= 4 * se
    metrics = dict(median=_f(led.median), lower_limit=_f(led.slack_lower * led.lower),
                   upper_limit=_f(led.slack_upper * led.upper), low_confidence=bool(low_conf),
                   diagonal_gaps=gaps, gap_ok=bool(gap_ok), note="Itô-variant bounds are stated without proof")
    return CheckResult("ito", CHECK_TAGS["ito"], led.passed and gap_ok, metrics)


@dataclass(frozen=True)
class Check:
    name: str
    fn: Callable[[int, dict], CheckResult]
    tiers: tuple[str, ...]


REGISTRY = (
    Check("algebra", check_algebra, ("smoke", "desk", "deep")),
    Check("fawcett", check_fawcett, ("smoke", "desk", "deep")),
    Check("moments", check_moments, ("desk", "deep")),
    Check("hyperbolic", check_hyperbolic, ("smoke", "desk", "deep")),
    Check("height_decay", check_height_decay, ("desk", "deep")),
    Check("kappa", check_kappa, ("desk", "deep")),
    Check("subadditivity", check_subadditivity, ("desk", "deep")),
    Check("height_cross", check_height_cross, ("desk", "deep")),
    Check("bv", check_bv, ("smoke", "desk", "deep")),
    Check("recovery", check_recovery, ("desk", "deep")),
    Check("ito", check_ito, ("desk", "deep")),
)



def missing_tags(names) -> list[str]:
    covered = {t for n in names for t in CHECK_TAGS[n]}
    return [t for t in REQUIRED_TAGS if t not in covered]


@dataclass
class VerifyOutcome:
    tier: str
    seed: int
    results: list[CheckResult]
    manifest: dict
    timings: dict

    @property
    def passed(self) -> bool:
        return self.manifest["all_passed"]

    def result(self, name: str) -> CheckResult:
        return next(r for r in self.results if r.name == name)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def run_verify(tier: str = "desk", seed: int = 1, outdir: str | Path | None = None, only=None, log=None) -> VerifyOutcome:
    """Run every check of ``tier`` and optionally write outputs to ``outdir``."""
    if tier not in TIERS:
        raise ValueError(f"unknown tier {tier!r}")
    P = TIERS[tier]
    checks = [c for c in REGISTRY if tier in c.tiers and (only is None or c.name in only)]
    results, timings = [], {}
    for c in checks:
        t0 = time.perf_counter()
        res = c.fn(seed, P)
        timings[c.name] = time.perf_counter() - t0
        if log:
            log(f"{c.name:14s} {'pass' if res.passed else 'FAIL'}  ({timings[c.name]:.1f} s)")
        results.append(res)
    all_names = [c.name for c in REGISTRY]
    manifest = {
        "library": "sigtail",
        "version": __version__,
        "tier": tier,
        "seed": seed,
        "config": P,
        "rng": "numpy PCG64, trial j of seed s uses SeedSequence(s, spawn_key=(j,))",
        "slack": {"lower": asy.SLACK_LOWER, "upper": asy.SLACK_UPPER, "subadditivity": asy.SUBADDITIVE_SLACK,
                  "dispersion_limit": asy.DISPERSION_LIMIT},
        "checks": [
            {"name": r.name, "tags": list(r.tags), "passed": bool(r.passed), "metrics": _jsonable(r.metrics),
             "files": sorted(r.files)}
            for r in results
        ],
        "coverage": {"required": list(REQUIRED_TAGS), "missing": missing_tags(all_names)},
        "failures": [r.name for r in results if not r.passed],
    }
    manifest["all_passed"] = not manifest["failures"] and not manifest["coverage"]["missing"]
    timings["total"] = sum(timings.values())
    if outdir is not None:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        for r in results:
            for fname, text in r.files.items():
                (out / fname).write_text(text)
        (out / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=1, sort_keys=True) + "\n")
        (out / "timing.json").write_text(json.dumps({k: round(v, 3) for k, v in timings.items()}, indent=1) + "\n")
    return VerifyOutcome(tier, seed, results, manifest, timings)
