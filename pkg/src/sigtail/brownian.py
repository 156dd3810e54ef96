"""Brownian sampling, expected signatures and Monte Carlo moment estimators.

Random numbers come from numpy's PCG64.  Trial ``j`` of a run seeded with
``seed`` always draws from ``SeedSequence(seed, spawn_key=(j,))``, so a trial
produces the same path no matter how many other trials run alongside it.

Paths are built by Lévy's midpoint construction: the endpoint first, then one
dyadic level of midpoints at a time.  Asking for depth k+1 with the same seed
only appends a level, so the depth-k skeleton is preserved exactly.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import gammaln

from . import _kernels
from .path_signature import PiecewiseLinearPath, signature_levels
from .tensor_algebra import TruncatedTensorSeries, outer, product_levels, shuffle_product, word_index

MAX_DEPTH = 24
# e / (sqrt(2) * pi), the Stirling constant in the second-moment estimate
STIRLING_CONST = math.e / (math.sqrt(2.0) * math.pi)


def trial_rng(seed: int, trial: int = 0) -> np.random.Generator:
    """Independent PCG64 stream for one trial of a seeded run."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(trial),))))


def levy_points(rng: np.random.Generator, d: int, T: float, k: int) -> np.ndarray:
    """Brownian values at the 2**k + 1 dyadic times of [0, T], shape (2**k+1, d)."""
    if not 0 <= k <= MAX_DEPTH:
        raise ValueError(f"dyadic depth must lie in 0..{MAX_DEPTH}")
    pts = np.zeros((2, d))
    pts[1] = math.sqrt(T) * rng.standard_normal(d)
    span = T
    for _ in range(k):
        # conditional law of the midpoint given both ends: mean of ends, variance span/4
        noise = rng.standard_normal((pts.shape[0] - 1, d)) * (0.5 * math.sqrt(span))
        mids = 0.5 * (pts[:-1] + pts[1:]) + noise
        nxt = np.empty((2 * pts.shape[0] - 1, d))
        nxt[0::2] = pts
        nxt[1::2] = mids
        pts = nxt
        span *= 0.5
    return pts


@dataclass(frozen=True)
class BrownianSample:
    """One Brownian path on [0, T] sampled at the dyadic times of depth k."""

    d: int
    T: float
    k: int
    seed: int
    trial: int
    points: np.ndarray

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.points, axis=0)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.points.shape[0])

    @property
    def path(self) -> PiecewiseLinearPath:
        return PiecewiseLinearPath(self.times, self.points)


def sample_brownian(d: int, T: float = 1.0, k: int = 12, seed: int = 0, trial: int = 0) -> BrownianSample:
    pts = levy_points(trial_rng(seed, trial), d, T, k)
    pts.setflags(write=False)
    return BrownianSample(d, float(T), int(k), int(seed), int(trial), pts)


def brownian_increments(d: int, T: float, k: int, seed: int, M: int, first_trial: int = 0) -> np.ndarray:
    """Increments of trials first_trial .. first_trial+M-1, shape (M, 2**k, d)."""
    out = np.empty((M, 2**k, d))
    for j in range(M):
        out[j] = np.diff(levy_points(trial_rng(seed, first_trial + j), d, T, k), axis=0)
    return out


# expected signatures ------------------------------------------------------------


def expected_signature(d: int, t: float, N: int) -> TruncatedTensorSeries:
    """E[S(B)_{0,t}]: zero at odd levels, t^n/(n! 2^n) (Σ e_i⊗e_i)^{⊗n} at level 2n."""
    eye = np.eye(d).reshape(-1)
    levels = [np.ones(1)]
    power = np.ones(1)
    for n in range(1, N + 1):
        if n % 2:
            levels.append(np.zeros(d**n))
        else:
            power = outer(power, eye)
            m = n // 2
            levels.append(power * (t**m / (math.factorial(m) * 2.0**m)))
    return TruncatedTensorSeries(levels, d)


def _gaussian_moment_level(d: int, n: int, var: float) -> np.ndarray:
    """E[X_{w1}⋯X_{wn}] over all words w for X ~ N(0, var·I_d)."""
    if n % 2:
        return np.zeros(d**n)
    if n == 0:
        return np.ones(1)
    words = np.indices((d,) * n).reshape(n, -1).T
    counts = np.stack([(words == i).sum(axis=1) for i in range(d)], axis=1)
    # product over letters of (c-1)!!, zero if any count is odd
    dfact = np.array([math.prod(range(c - 1, 0, -2)) for c in range(n + 1)], dtype=np.float64)
    out = np.prod(dfact[counts], axis=1)
    out[np.any(counts % 2 == 1, axis=1)] = 0.0
    return out * var ** (n // 2)


def expected_chord_signature(d: int, t: float, k: int, N: int) -> TruncatedTensorSeries:
    """Exact E[S] of the dyadic piecewise-linear interpolation at depth k.

    The chords are independent, so E[S] is the 2**k-th tensor power of
    E[exp(X)] with X ~ N(0, t 2^{-k} I); that power is taken by repeated
    squaring.  Converges to :func:`expected_signature` as k grows.
    """
    var = t / 2**k
    one = [_gaussian_moment_level(d, n, var) / math.factorial(n) for n in range(N + 1)]
    for _ in range(k):
        one = product_levels(one, one, N)
    return TruncatedTensorSeries(one, d)


def exact_second_moment(word: Sequence[int], expected: TruncatedTensorSeries) -> float:
    """E|c_w|² from an expected signature, using c_w² = <S, w ⧢ w> (1-based word)."""
    d = expected.d
    n = len(word)
    e = np.zeros(d**n)
    e[word_index(word, d, one_based=True)] = 1.0
    return float(shuffle_product(e, e, d) @ expected.level(2 * n))


class MCSignature(NamedTuple):
    mean: TruncatedTensorSeries
    stderr: TruncatedTensorSeries | None
    M: int


def _packed_batches(d, t, k, N, M, seed, batch=256):
    offsets = _kernels.level_offsets(d, N)
    for b0 in range(0, M, batch):
        inc = brownian_increments(d, t, k, seed, min(batch, M - b0), first_trial=b0)
        yield _kernels.signature_batch(inc, N, offsets)


def _unpack_series(packed: np.ndarray, d: int, N: int) -> TruncatedTensorSeries:
    off = _kernels.level_offsets(d, N)
    return TruncatedTensorSeries([packed[off[n] : off[n + 1]] for n in range(N + 1)], d)


def mc_expected_signature(d: int, t: float, N: int, M: int = 10_000, k: int = 10, seed: int = 0) -> MCSignature:
    """Sample mean of M chord-path signatures with per-coefficient standard errors.

    Sums run over the full (M, ·) sample array with numpy's pairwise reduction.
    With M = 1 the standard error is reported as None.
    """
    samples = np.concatenate(list(_packed_batches(d, t, k, N, M, seed)), axis=0)
    mean = samples.mean(axis=0)
    stderr = None
    if M > 1:
        stderr = _unpack_series(samples.std(axis=0, ddof=1) / math.sqrt(M), d, N)
    return MCSignature(_unpack_series(mean, d, N), stderr, M)


# moment reports -----------------------------------------------------------------


def second_moment_bound(n: int, t: float) -> float:
    """((2n)!/(n!)²) · t^n/(n! 2^n)."""
    return math.exp(gammaln(2 * n + 1) - 3 * gammaln(n + 1) - n * math.log(2.0)) * t**n


def second_moment_bound_stirling(n: int, t: float) -> float:
    """The Stirling form e/(√2 π) · 2^n/(√n n!) · t^n (always above the exact bound)."""
    return STIRLING_CONST * math.exp(n * math.log(2.0) - 0.5 * math.log(n) - gammaln(n + 1)) * t**n


def sup_moment_bound(n: int, dt: float) -> float:
    """(1/2 + √2)(e/(√2 π))^{1/2} 2^{n/2} / ((n-2)^{1/4} √(n!)) · dt^{n/2}, n ≥ 3."""
    if n < 3:
        raise ValueError("the sup-moment bound needs words of length at least 3")
    c = (0.5 + math.sqrt(2.0)) * math.sqrt(STIRLING_CONST)
    return c * math.exp(0.5 * n * math.log(2.0) - 0.25 * math.log(n - 2) - 0.5 * gammaln(n + 1)) * dt ** (0.5 * n)


@dataclass(frozen=True)
class MomentReport:
    """Monte Carlo estimate of a moment compared against a one-sided bound."""

    word: tuple[int, ...]
    M: int
    mean: float
    second_moment: float
    stderr: float
    bound: float
    kind: str = "second"
    alt_bound: float | None = None

    @property
    def n(self) -> int:
        return len(self.word)

    @property
    def passed(self) -> bool:
        return self.mean <= self.bound + 3.0 * self.stderr

    @classmethod
    def from_values(cls, word, values: np.ndarray, bound: float, kind: str, alt_bound=None) -> "MomentReport":
        values = np.asarray(values, dtype=np.float64)
        M = values.size
        stderr = float(values.std(ddof=1) / math.sqrt(M)) if M > 1 else float("nan")
        return cls(tuple(int(w) for w in word), M, float(values.mean()), float(np.mean(values**2)), stderr, float(bound), kind, alt_bound)

    def csv_row(self) -> list[str]:
        return [
            " ".join(str(w) for w in self.word),
            str(self.n),
            str(self.M),
            repr(self.mean),
            repr(self.stderr),
            repr(self.bound),
            "1" if self.passed else "0",
        ]


MOMENT_CSV_HEADER = ["word", "n", "M", "mean", "stderr", "bound", "pass"]


def moments_to_csv(reports: Sequence[MomentReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MOMENT_CSV_HEADER)
    for r in reports:
        writer.writerow(r.csv_row())
    return buf.getvalue()


def _letters(words: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    nmax = max(len(w) for w in words)
    letters = np.zeros((len(words), nmax), dtype=np.int64)
    lengths = np.zeros(len(words), dtype=np.int64)
    for i, w in enumerate(words):
        if len(w) == 0 or min(w) < 1:
            raise ValueError("words are non-empty with 1-based letters")
        letters[i, : len(w)] = np.asarray(w) - 1
        lengths[i] = len(w)
    return letters, lengths


def word_coefficients(
    words: Sequence[Sequence[int]], d: int, T: float, M: int, k: int, seed: int, batch: int = 512
) -> tuple[np.ndarray, np.ndarray]:
    """Final values and running sups of word coefficients, each (M, len(words))."""
    if max(max(w) for w in words) > d:
        raise ValueError("word letter exceeds the dimension")
    letters, lengths = _letters(words)
    finals, sups = [], []
    for b0 in range(0, M, batch):
        inc = brownian_increments(d, T, k, seed, min(batch, M - b0), first_trial=b0)
        f, s = _kernels.word_hierarchy_batch(inc, letters, lengths)
        finals.append(f)
        sups.append(s)
    return np.concatenate(finals), np.concatenate(sups)


def _dim(words, d):
    return max(max(w) for w in words) if d is None else d


def mc_second_moments(words, t: float = 1.0, M: int = 10_000, k: int = 12, seed: int = 0, d: int | None = None) -> list[MomentReport]:
    """E|c_w(B_{0,t})|² for several words from one shared set of samples."""
    d = _dim(words, d)
    final, _ = word_coefficients(words, d, t, M, k, seed)
    return [
        MomentReport.from_values(
            w, final[:, i] ** 2, second_moment_bound(len(w), t), "second", second_moment_bound_stirling(len(w), t)
        )
        for i, w in enumerate(words)
    ]


def mc_second_moment(word, t: float = 1.0, M: int = 10_000, k: int = 12, seed: int = 0, d: int | None = None) -> MomentReport:
    return mc_second_moments([word], t, M, k, seed, d)[0]


def mc_sup_moments(words, s: float = 0.0, t: float = 1.0, M: int = 10_000, k: int = 12, seed: int = 0, d: int | None = None) -> list[MomentReport]:
    """E sup_{s≤u≤t} |c_w(B_{s,u})| over the dyadic grid, for words of length ≥ 3.

    Increments of B after time s form a Brownian motion on [0, t-s], so the
    samples are drawn directly on an interval of that length.
    """
    if not t > s:
        raise ValueError("need s < t")
    bounds = [sup_moment_bound(len(w), t - s) for w in words]
    d = _dim(words, d)
    _, sup = word_coefficients(words, d, t - s, M, k, seed)
    return [MomentReport.from_values(w, sup[:, i], bounds[i], "sup") for i, w in enumerate(words)]


def mc_sup_moment(word, s: float = 0.0, t: float = 1.0, M: int = 10_000, k: int = 12, seed: int = 0, d: int | None = None) -> MomentReport:
    return mc_sup_moments([word], s, t, M, k, seed, d)[0]


def random_words(rng: np.random.Generator, count: int, d: int, min_len: int, max_len: int) -> list[tuple[int, ...]]:
    lens = rng.integers(min_len, max_len + 1, size=count)
    return [tuple(int(x) for x in rng.integers(1, d + 1, size=n)) for n in lens]


# Itô signature ------------------------------------------------------------------


def ito_levels(increments: np.ndarray, N: int) -> list[np.ndarray]:
    """Left-point iterated sums for a batch (B, m, d) of increment arrays."""
    inc = np.ascontiguousarray(increments, dtype=np.float64)
    single = inc.ndim == 2
    if single:
        inc = inc[None]
    d = inc.shape[2]
    off = _kernels.level_offsets(d, N)
    packed = _kernels.ito_batch(inc, N, off)
    levels = [packed[:, off[n] : off[n + 1]] for n in range(N + 1)]
    return [lev[0] for lev in levels] if single else levels


def ito_signature(sample: BrownianSample, N: int) -> TruncatedTensorSeries:
    """Itô iterated integrals by the Euler recursion dI^n = I^{n-1} ⊗ dB on the grid."""
    return TruncatedTensorSeries(ito_levels(sample.increments, N), sample.d)


def stratonovich_signature(sample: BrownianSample, N: int) -> TruncatedTensorSeries:
    return TruncatedTensorSeries(signature_levels(sample.increments, N), sample.d)
