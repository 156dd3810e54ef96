"""Finite-N estimators of the normalized limsup and checks of its properties.

For a signature g over [s, t] the normalized levels are
a_n = ((n/p)! ‖g_n‖)^{p/n}.  The limsup in n is replaced by the maximum of
a_n over a trailing window [N₀, N] with N₀ = max(3, N - 6), and
κ̂ = max_window a_n / (t - s).
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import isotonic_regression
from scipy.special import gammaln, logsumexp

from .brownian import brownian_increments, ito_levels
from .hyperbolic import develop_brownian_height, develop_height, height_series, series_tail_bound
from .path_signature import (
    PiecewiseLinearPath,
    SignatureRecord,
    normalized_levels_from_log,
    prefix_signatures,
    signature,
    signature_levels,
)
from .tensor_algebra import NormKind

# pre-registered slack on the asymptotic bounds (d-1)/2 <= κ_d <= d²
SLACK_LOWER = 0.4
SLACK_UPPER = 1.25
SUBADDITIVE_SLACK = 0.15
DISPERSION_LIMIT = 0.35


def default_window(N: int) -> tuple[int, int]:
    return (max(3, N - 6), N)


def _check_window(window: tuple[int, int], N: int) -> tuple[int, int]:
    lo, hi = int(window[0]), int(window[1])
    if not 1 <= lo <= hi <= N:
        raise ValueError(f"window {window} must be a non-empty range inside [1, {N}]")
    return lo, hi


@dataclass
class AsymptoticsReport:
    """Normalized level sequence and the windowed estimate for one signature."""

    s: float
    t: float
    p: float
    kind: str
    a: np.ndarray
    window: tuple[int, int]
    kappa_hat: float
    degenerate: bool
    log_norms: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return self.a.size

    @property
    def window_max(self) -> float:
        """max_window a_n, i.e. κ̂·(t - s)."""
        return self.kappa_hat * (self.t - self.s)

    def to_json(self) -> str:
        d = asdict(self)
        d["a"] = [float(x) for x in self.a]
        d["log_norms"] = [float(x) if np.isfinite(x) else None for x in self.log_norms]
        d["window"] = list(self.window)
        return json.dumps(d, indent=1, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "a_n"])
        for n, v in enumerate(self.a, start=1):
            writer.writerow([n, repr(float(v))])
        writer.writerow(["kappa_hat", repr(float(self.kappa_hat))])
        return buf.getvalue()


def report_from_log_norms(log_norms: np.ndarray, s: float, t: float, p: float = 2.0, kind="l1_proj", window=None) -> AsymptoticsReport:
    N = len(log_norms) - 1
    window = _check_window(default_window(N) if window is None else window, N)
    a = normalized_levels_from_log(np.asarray(log_norms, dtype=np.float64), p)
    win = a[window[0] - 1 : window[1]]
    top = float(win.max())
    return AsymptoticsReport(float(s), float(t), float(p), NormKind.parse(kind).value, a, window,
                             top / (t - s), bool(top == 0.0), np.asarray(log_norms))


def estimate_limsup(rec: SignatureRecord, p: float = 2.0, kind=NormKind.L1_PROJ, window=None, **norm_kw) -> AsymptoticsReport:
    """Windowed surrogate of the normalized limsup for one signature record."""
    if p < 1:
        raise ValueError("p must be at least 1")
    return report_from_log_norms(rec.log_norms(kind, **norm_kw), rec.s, rec.t, p, kind, window)


def log_l1_norms(levels: Sequence[np.ndarray]) -> np.ndarray:
    """log Σ|coefficients| per level along the last axis; level 0 maps to 0."""
    with np.errstate(divide="ignore"):
        out = [np.log(np.sum(np.abs(lev), axis=-1)) for lev in levels]
    out[0] = np.zeros_like(out[0])
    return np.stack(out, axis=-1)


def kappa_from_levels(levels: Sequence[np.ndarray], dt: float, p: float = 2.0, window=None) -> np.ndarray:
    """κ̂ under L1_PROJ for a batch of signatures given as level arrays (B, d**n)."""
    logs = log_l1_norms(levels)
    N = logs.shape[-1] - 1
    lo, hi = _check_window(default_window(N) if window is None else window, N)
    a = np.stack([normalized_levels_from_log(row, p) for row in np.atleast_2d(logs)])
    return a[:, lo - 1 : hi].max(axis=1) / dt


# Brownian κ̂ samples -------------------------------------------------------------


@dataclass
class KappaSamples:
    """κ̂ for independent Brownian trials, with the [0, t/2] and [t/2, t] halves of each."""

    d: int
    t: float
    k: int
    N: int
    window: tuple[int, int]
    seed: int
    kappas: np.ndarray
    first_half: np.ndarray
    second_half: np.ndarray

    @property
    def median(self) -> float:
        return float(np.median(self.kappas))

    @property
    def dispersion(self) -> float | None:
        """Interquartile range over median; None with fewer than two trials."""
        if self.kappas.size < 2:
            return None
        q1, q3 = np.percentile(self.kappas, [25, 75])
        return float((q3 - q1) / np.median(self.kappas))

    @property
    def half_ratios(self) -> np.ndarray:
        return self.first_half / self.second_half


def kappa_samples(d: int, t: float = 1.0, trials: int = 16, k: int = 12, N: int = 14, seed: int = 0,
                  window=None, p: float = 2.0, halves: bool = True) -> KappaSamples:
    """κ̂ of trials 0..trials-1 under L1_PROJ (halves reuse the same sample path)."""
    window = _check_window(default_window(N) if window is None else window, N)
    kap, h1, h2 = [], [], []
    for j in range(trials):
        inc = brownian_increments(d, t, k, seed, 1, first_trial=j)[0]
        kap.append(kappa_from_levels(signature_levels(inc, N), t, p, window)[0])
        if halves:
            half = inc.shape[0] // 2
            h1.append(kappa_from_levels(signature_levels(inc[:half], N), t / 2, p, window)[0])
            h2.append(kappa_from_levels(signature_levels(inc[half:], N), t / 2, p, window)[0])
    nan = np.full(trials, np.nan)
    return KappaSamples(d, t, k, N, window, seed, np.array(kap),
                        np.array(h1) if halves else nan, np.array(h2) if halves else nan)


@dataclass
class ConcentrationResult:
    samples: KappaSamples
    dispersion: float | None
    half_ratio: float | None
    limit: float = DISPERSION_LIMIT

    @property
    def passed(self) -> bool:
        return self.dispersion is not None and self.dispersion <= self.limit

    @property
    def halves_stable(self) -> bool | None:
        """Median κ̂[0,t/2]/κ̂[t/2,t] within [0.6, 1.6]; None if halves were skipped."""
        if self.half_ratio is None:
            return None
        return 0.6 <= self.half_ratio <= 1.6


def concentration_test(d: int, t: float = 1.0, trials: int = 16, k: int = 12, N: int = 14, seed: int = 0,
                       window=None, samples: KappaSamples | None = None) -> ConcentrationResult:
    """Relative IQR of κ̂ across trials, plus the median ratio κ̂[0,t/2] / κ̂[t/2,t].

    A single trial gives no dispersion (reported as None, and not a pass).
    """
    if samples is None:
        samples = kappa_samples(d, t, trials, k, N, seed, window)
    ratios = samples.half_ratios
    ratio = float(np.median(ratios)) if np.all(np.isfinite(ratios)) and ratios.size else None
    return ConcentrationResult(samples, samples.dispersion, ratio)


@dataclass
class BoundLedger:
    """Median κ̂ against the slackened interval [SLACK_LOWER·lower, SLACK_UPPER·upper]."""

    d: int
    lower: float
    upper: float
    median: float
    q1: float
    q3: float
    trials: int
    slack_lower: float = SLACK_LOWER
    slack_upper: float = SLACK_UPPER

    @property
    def lower_ok(self) -> bool:
        return self.median >= self.slack_lower * self.lower

    @property
    def upper_ok(self) -> bool:
        return self.median <= self.slack_upper * self.upper

    @property
    def passed(self) -> bool:
        return self.lower_ok and self.upper_ok

    @classmethod
    def from_kappas(cls, d: int, kappas: np.ndarray, lower: float, upper: float) -> "BoundLedger":
        q1, med, q3 = np.percentile(kappas, [25, 50, 75])
        return cls(d, lower, upper, float(med), float(q1), float(q3), int(np.size(kappas)))


def kappa_sandwich(d: int, samples: KappaSamples | None = None, **kw) -> BoundLedger:
    """(d-1)/2 ≤ κ_d ≤ d² with the global slack factors, on the median κ̂."""
    samples = kappa_samples(d, **kw) if samples is None else samples
    return BoundLedger.from_kappas(d, samples.kappas, (d - 1) / 2.0, float(d * d))


# subadditivity ------------------------------------------------------------------


@dataclass(frozen=True)
class SubadditivityResult:
    lhs: float
    rhs: float
    finite_ratio: float = math.nan

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def relative_margin(self) -> float:
        return self.margin / self.rhs if self.rhs > 0 else (0.0 if self.lhs == 0 else -math.inf)

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs * (1.0 + SUBADDITIVE_SLACK) + 1e-15


def subadditivity_check(path: PiecewiseLinearPath, s: float, u: float, t: float, N: int = 14, p: float = 2.0,
                        kind=NormKind.L1_PROJ, window=None) -> SubadditivityResult:
    """κ̂_{s,t}(t-s) against κ̂_{s,u}(u-s) + κ̂_{u,t}(t-u), all from the same path."""
    if not s < u < t:
        raise ValueError("need s < u < t")
    whole = estimate_limsup(signature(path, s, t, N), p, kind, window)
    left = estimate_limsup(signature(path, s, u, N), p, kind, window)
    right = estimate_limsup(signature(path, u, t, N), p, kind, window)
    return SubadditivityResult(whole.window_max, left.window_max + right.window_max,
                               finite_level_ratio(whole.a, left.a, right.a, p))


def finite_level_ratio(whole: np.ndarray, left: np.ndarray, right: np.ndarray, p: float = 2.0) -> float:
    """Worst a_n(whole) / (p^{p/n} (max_{i<=n} a_i(left) + max_{j<=n} a_j(right))).

    Chen's identity and the neo-classical inequality make this at most 1 for
    every n, with no limit taken.
    """
    n = np.arange(1, whole.size + 1)
    bound = p ** (p / n) * (np.maximum.accumulate(left) + np.maximum.accumulate(right))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(bound > 0, whole / bound, np.where(whole > 0, np.inf, 0.0))
    return float(np.max(r))


# neo-classical inequality and factorial ratios ----------------------------------


def neoclassical_log_sides(a: float, b: float, p: float, N: int) -> tuple[float, float]:
    """log of Σ_i a^{i/p} b^{(N-i)/p} / ((i/p)!((N-i)/p)!) and of p (a+b)^{N/p}/(N/p)!."""
    i = np.arange(N + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        la = np.log(a)
        lb = np.log(b)
        # 0^0 = 1
        ta = np.where(i == 0, 0.0, (i / p) * la)
        tb = np.where(i == N, 0.0, ((N - i) / p) * lb)
    lhs = logsumexp(ta + tb - gammaln(i / p + 1) - gammaln((N - i) / p + 1))
    with np.errstate(divide="ignore"):
        rhs = math.log(p) + (0.0 if N == 0 else (N / p) * math.log(a + b) if a + b > 0 else -math.inf) - gammaln(N / p + 1)
    return float(lhs), float(rhs)


def neoclassical_check(a: float, b: float, p: float, Nmax: int) -> float:
    """max over N ≤ Nmax of LHS/RHS (0 when both sides vanish)."""
    if a < 0 or b < 0 or p < 1:
        raise ValueError("need a, b >= 0 and p >= 1")
    worst = 0.0
    for N in range(Nmax + 1):
        lhs, rhs = neoclassical_log_sides(a, b, p, N)
        if lhs == -math.inf:
            continue
        worst = max(worst, math.exp(lhs - rhs))
    return worst


def neoclassical_sweep(points: int = 1000, seed: int = 0, Nmax: int = 60) -> float:
    """Worst ratio over random a, b ∈ [0, 10], p ∈ [1, 2] and N ≤ Nmax."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(0,))))
    worst = 0.0
    for _ in range(points):
        a, b = rng.uniform(0.0, 10.0, size=2)
        p = rng.uniform(1.0, 2.0)
        N = int(rng.integers(0, Nmax + 1))
        lhs, rhs = neoclassical_log_sides(float(a), float(b), float(p), N)
        worst = max(worst, math.exp(lhs - rhs))
    return worst


@dataclass(frozen=True)
class FactorialRatio:
    n: np.ndarray
    values: np.ndarray
    C: float
    tail_slope: float

    @property
    def bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.values))) and abs(self.tail_slope) < 0.05


def factorial_ratio_check(alpha: float, p: float, nmax: int) -> FactorialRatio:
    """Γ(n/p+1)/Γ((n-α)/p+1) / n^{α/p} for 2α < n ≤ nmax.

    ``tail_slope`` is the least-squares slope of log value against log n over
    the last decade n ∈ [nmax/10, nmax]; a bounded ratio has slope near 0.
    """
    n = np.arange(int(math.floor(2 * alpha)) + 1, nmax + 1, dtype=np.float64)
    if n.size == 0:
        raise ValueError("need nmax > 2α")
    logv = gammaln(n / p + 1) - gammaln((n - alpha) / p + 1) - (alpha / p) * np.log(n)
    tail = n >= max(n[0], nmax / 10.0)
    slope = float(np.polyfit(np.log(n[tail]), logv[tail], 1)[0]) if tail.sum() >= 2 else 0.0
    vals = np.exp(logv)
    return FactorialRatio(n.astype(int), vals, float(vals.max()), slope)


# parametrization recovery -------------------------------------------------------


def recover_parametrization(sig_at: Callable[[Sequence[float]], Sequence[SignatureRecord]] | PiecewiseLinearPath,
                            kappa: float, grid: Sequence[float], N: int = 14, p: float = 2.0, window=None,
                            isotonic: bool = True) -> np.ndarray:
    """σ̂(τ) = max_window a_n(S_{0,τ}) / κ on ``grid``, made non-decreasing.

    ``sig_at`` maps a list of times to the signatures over [0, τ]; passing a
    path uses its prefix signatures.  A leading 0 on the grid maps to 0.
    """
    if not kappa > 0:
        raise ValueError("κ must be positive")
    grid = np.asarray(grid, dtype=np.float64)
    pos = grid[grid > 0]
    if isinstance(sig_at, PiecewiseLinearPath):
        path = sig_at
        recs = prefix_signatures(path, pos, N)
    else:
        recs = list(sig_at(pos))
    tops = np.array([estimate_limsup(r, p, NormKind.L1_PROJ, window).window_max for r in recs])
    if np.all(tops == 0):
        raise ValueError("every prefix signature is degenerate; nothing to recover")
    est = np.zeros(grid.size)
    est[grid > 0] = tops / kappa
    if isotonic:
        est = isotonic_regression(est).x
    return est


# Itô signature bounds -----------------------------------------------------------


def ito_kappa_samples(d: int, t: float = 1.0, trials: int = 16, k: int = 12, N: int = 14, seed: int = 0,
                      window=None, p: float = 2.0) -> np.ndarray:
    window = _check_window(default_window(N) if window is None else window, N)
    out = []
    for j in range(trials):
        inc = brownian_increments(d, t, k, seed, 1, first_trial=j)[0]
        out.append(kappa_from_levels(ito_levels(inc, N), t, p, window)[0])
    return np.array(out)


def ito_bound_check(d: int, t: float = 1.0, samples: int = 16, N: int = 14, window=None, k: int = 12, seed: int = 0) -> tuple[BoundLedger, bool]:
    """Median windowed κ̂ of the Itô hierarchy against [d/2, d²/2] with the global slack.

    The second value flags a low-confidence run (window shorter than 4 levels
    or top level below 8).
    """
    kap = ito_kappa_samples(d, t, samples, k, N, seed, window)
    lo, hi = _check_window(default_window(N) if window is None else window, N)
    low_conf = (hi - lo) < 3 or hi < 8
    return BoundLedger.from_kappas(d, kap, d / 2.0, d * d / 2.0), low_conf


# height cross-check -------------------------------------------------------------


@dataclass(frozen=True)
class HeightCrossCheck:
    trial: int
    lam: float
    log_h_over_lam2: float
    kappa_hat: float
    t: float
    depth: int

    @property
    def limit(self) -> float:
        return self.kappa_hat * self.t * 1.2

    @property
    def passed(self) -> bool:
        return self.log_h_over_lam2 <= self.limit


def height_cross_check(d: int = 2, t: float = 1.0, lams: Sequence[float] = (4, 8, 16), trials: int = 8, k: int = 12,
                       N: int = 14, seed: int = 0, window=None) -> list[HeightCrossCheck]:
    """(1/λ²) log h_t^λ against κ̂·t·1.2 for the same sample path.

    κ̂ comes from the depth-k signature; the development refines the same path
    until λ·max chord ≤ 0.25.
    """
    rows = []
    for j in range(trials):
        inc = brownian_increments(d, t, k, seed, 1, first_trial=j)[0]
        kap = float(kappa_from_levels(signature_levels(inc, N), t, 2.0, window)[0])
        for lam in lams:
            hs = develop_brownian_height(d, t, lam, k, seed, j)
            rows.append(HeightCrossCheck(j, float(lam), hs.log_h / lam**2, kap, t, hs.k))
    return rows


@dataclass(frozen=True)
class SeriesCheck:
    trial: int
    lam: float
    h_ode: float
    h_series: float
    tail: float

    @property
    def passed(self) -> bool:
        return abs(self.h_ode - self.h_series) <= self.tail


def height_series_check(d: int = 2, t: float = 1.0, lams: Sequence[float] = (0.25, 0.5), trials: int = 8, k: int = 12,
                        N: int = 14, seed: int = 0) -> list[SeriesCheck]:
    """Chord-development height against the level-truncated series Σ λ^{2n}<S^{2n}, I^{⊗n}>.

    The tolerance is the tail Σ_{2n>N} λ^{2n} L^n/n! with L = d² t.
    """
    rows = []
    for j in range(trials):
        inc = brownian_increments(d, t, k, seed, 1, first_trial=j)[0]
        levels = signature_levels(inc, N)
        for lam in lams:
            h_ser, _ = height_series(levels, d, lam)
            h_ode = math.exp(float(develop_height(inc, lam)))
            rows.append(SeriesCheck(j, float(lam), h_ode, h_ser, series_tail_bound(lam, N, d * d * t)))
    return rows
