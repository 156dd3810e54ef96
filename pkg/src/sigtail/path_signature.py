"""Exact truncated signatures of piecewise-linear paths.

The signature of a piecewise-linear path is the ordered product of the
segment exponentials of its chords.  Two evaluators are provided:

* :func:`signature_levels` runs a compiled Horner update chord by chord
  (the default, and the one every estimator uses);
* :func:`signature_levels_chunked` groups chords into chunks, accumulates each
  chunk with vectorised numpy Horner steps and merges chunks pairwise by
  Chen's identity.  It shares no code with the compiled loop and serves as
  its cross-check.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .tensor_algebra import (
    NormKind,
    Permutation,
    TruncatedTensorSeries,
    apply_permutation,
    half_factorial_log,
    level_norm,
    mul_segment_exp,
    product_levels,
)

# elements per level-N array held at once by the chunked kernel
_WORK_BUDGET = 1 << 22


@dataclass(frozen=True)
class PiecewiseLinearPath:
    """Samples ``points[j]`` at strictly increasing ``times[j]``, joined linearly."""

    times: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64).reshape(-1)
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim == 1:
            points = points[:, None]
        if points.shape[0] != times.size:
            raise ValueError("times and points differ in length")
        if times.size < 2:
            raise ValueError("a path needs at least one chord")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if not (np.all(np.isfinite(points)) and np.all(np.isfinite(times))):
            raise ValueError("path samples must be finite")
        times.setflags(write=False)
        points.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "points", points)

    @classmethod
    def from_increments(cls, increments: np.ndarray, T: float = 1.0, start=None) -> "PiecewiseLinearPath":
        inc = np.asarray(increments, dtype=np.float64)
        d = inc.shape[1]
        origin = np.zeros(d) if start is None else np.asarray(start, dtype=np.float64)
        points = np.vstack([origin, origin + np.cumsum(inc, axis=0)])
        return cls(np.linspace(0.0, T, inc.shape[0] + 1), points)

    @classmethod
    def line(cls, v: Sequence[float], T: float = 1.0) -> "PiecewiseLinearPath":
        v = np.asarray(v, dtype=np.float64)
        return cls(np.array([0.0, T]), np.vstack([np.zeros_like(v), v]))

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def m(self) -> int:
        return self.times.size - 1

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.points, axis=0)

    def __call__(self, t: float) -> np.ndarray:
        return np.array([np.interp(t, self.times, self.points[:, i]) for i in range(self.d)])

    def length(self, ord: float = 2) -> float:
        return float(np.sum(np.linalg.norm(self.increments, ord=ord, axis=1)))

    def restrict(self, s: float, t: float) -> "PiecewiseLinearPath":
        """Sub-path on [s, t]; chords are cut at s and t by linear interpolation."""
        t0, t1 = self.times[0], self.times[-1]
        if not (t0 <= s < t <= t1):
            raise ValueError(f"interval [{s}, {t}] not inside path domain [{t0}, {t1}]")
        inner = (self.times > s) & (self.times < t)
        times = np.concatenate([[s], self.times[inner], [t]])
        points = np.vstack([self(s), self.points[inner], self(t)])
        return PiecewiseLinearPath(times, points)

    def reparametrize(self, time_map) -> "PiecewiseLinearPath":
        """Same trace run on new times ``time_map(times)`` (must stay increasing)."""
        return PiecewiseLinearPath(np.asarray(time_map(self.times), dtype=np.float64), self.points)

    def dilate(self, c: float) -> "PiecewiseLinearPath":
        return PiecewiseLinearPath(self.times, c * self.points)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t"] + [f"x{i + 1}" for i in range(self.d)])
        for t, x in zip(self.times, self.points):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in x])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "PiecewiseLinearPath":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if not header or header[0].strip() != "t":
            raise ValueError("path CSV must start with a 't' column")
        rows = [[float(x) for x in row] for row in reader if row]
        arr = np.array(rows)
        if arr.ndim != 2 or arr.shape[1] != len(header):
            raise ValueError("ragged path CSV")
        return cls(arr[:, 0], arr[:, 1:])


# batched kernel -----------------------------------------------------------------


def _pick_chunks(batch: int, m: int, d: int, N: int) -> int:
    per = batch * d**N
    chunks = max(1, _WORK_BUDGET // max(per, 1))
    chunks = min(chunks, max(1, m // 8))
    return 1 << int(math.floor(math.log2(chunks))) if chunks > 1 else 1


def _unpack(packed: np.ndarray, d: int, N: int) -> list[np.ndarray]:
    off = _kernels.level_offsets(d, N)
    return [np.ascontiguousarray(packed[..., off[n] : off[n + 1]]) for n in range(N + 1)]


def _as_batch(increments) -> tuple[np.ndarray, bool]:
    inc = np.ascontiguousarray(increments, dtype=np.float64)
    if inc.ndim == 2:
        return inc[None], True
    if inc.ndim != 3:
        raise ValueError("increments must have shape (m, d) or (B, m, d)")
    return inc, False


def signature_levels(increments: np.ndarray, N: int) -> list[np.ndarray]:
    """Signature levels for one path (m, d) or a batch of paths (B, m, d).

    Returns N+1 arrays of shape (d**n,) or (B, d**n).  Each path is processed
    independently in a fixed order, so the bits do not depend on the batch.
    """
    inc, single = _as_batch(increments)
    d = inc.shape[2]
    packed = _kernels.signature_batch(inc, int(N), _kernels.level_offsets(d, N))
    levels = _unpack(packed, d, N)
    return [lev[0] for lev in levels] if single else levels


def signature_levels_chunked(increments: np.ndarray, N: int, chunks: int | None = None) -> list[np.ndarray]:
    """Numpy evaluator: chunked Horner accumulation plus a Chen merge tree."""
    inc = np.asarray(increments, dtype=np.float64)
    single = inc.ndim == 2
    if single:
        inc = inc[None]
    B, m, d = inc.shape
    if chunks is None:
        chunks = _pick_chunks(1, m, d, N)
    L = -(-m // chunks)
    pad = chunks * L - m
    if pad:
        inc = np.concatenate([inc, np.zeros((B, pad, d))], axis=1)
    inc = inc.reshape(B, chunks, L, d)

    out: list[np.ndarray] | None = None
    # sub-batch so that B_sub * chunks * d**N stays within budget
    step = max(1, _WORK_BUDGET // max(chunks * d**N, 1))
    for b0 in range(0, B, step):
        part = inc[b0 : b0 + step]
        nb = part.shape[0]
        levels = [np.ones((nb, chunks, 1))] + [np.zeros((nb, chunks, d**n)) for n in range(1, N + 1)]
        for j in range(L):
            mul_segment_exp(levels, part[:, :, j, :])
        while levels[0].shape[1] > 1:
            c = levels[0].shape[1]
            if c % 2:
                levels = [
                    np.concatenate([lev, np.zeros((nb, 1, lev.shape[-1])) + (n == 0)], axis=1)
                    for n, lev in enumerate(levels)
                ]
            left = [lev[:, 0::2] for lev in levels]
            right = [lev[:, 1::2] for lev in levels]
            levels = product_levels(left, right, N)
        levels = [lev[:, 0] for lev in levels]
        if out is None:
            out = levels
        else:
            out = [np.concatenate([o, lev], axis=0) for o, lev in zip(out, levels)]
    assert out is not None
    return [lev[0] for lev in out] if single else out


def signature_levels_at(increments: np.ndarray, N: int, checkpoints: Sequence[int]) -> list[list[np.ndarray]]:
    """Prefix signatures after each chord count in ``checkpoints``.

    Returns one level list per checkpoint (in increasing order), each shaped
    like the output of :func:`signature_levels`.
    """
    inc, single = _as_batch(increments)
    B, m, d = inc.shape
    cps = np.array(sorted(set(int(c) for c in checkpoints)), dtype=np.int64)
    if cps.size and (cps[0] < 1 or cps[-1] > m):
        raise ValueError("checkpoints must lie in 1..m")
    packed = _kernels.signature_prefix_batch(inc, int(N), _kernels.level_offsets(d, N), cps)
    out = []
    for c in range(cps.size):
        levels = _unpack(packed[:, c], d, N)
        out.append([lev[0] for lev in levels] if single else levels)
    return out


# records ------------------------------------------------------------------------


@dataclass
class SignatureRecord:
    """Signature of a path over [s, t] with a cache of log level norms."""

    s: float
    t: float
    series: TruncatedTensorSeries
    _log_norms: dict = field(default_factory=dict, repr=False)

    @property
    def d(self) -> int:
        return self.series.d

    @property
    def N(self) -> int:
        return self.series.N

    def log_norms(self, kind: NormKind | str = NormKind.L1_PROJ, **kw) -> np.ndarray:
        """log ‖g_n‖ for n = 0..N (-inf for vanishing levels)."""
        kind = NormKind.parse(kind)
        key = (kind, tuple(sorted(kw.items())))
        if key not in self._log_norms:
            with np.errstate(divide="ignore"):
                vals = [
                    np.log(level_norm(self.series.level(n), kind, d=self.d, **kw)) if n else 0.0
                    for n in range(self.N + 1)
                ]
            self._log_norms[key] = np.array(vals)
        return self._log_norms[key]


def signature(path: PiecewiseLinearPath, s: float | None = None, t: float | None = None, N: int = 8) -> SignatureRecord:
    """Truncated signature of ``path`` over [s, t] (defaults to the whole path)."""
    s = path.times[0] if s is None else float(s)
    t = path.times[-1] if t is None else float(t)
    sub = path if (s == path.times[0] and t == path.times[-1]) else path.restrict(s, t)
    levels = signature_levels(sub.increments, N)
    return SignatureRecord(s, t, TruncatedTensorSeries(levels, path.d))


def prefix_signatures(path: PiecewiseLinearPath, times: Sequence[float], N: int) -> list[SignatureRecord]:
    """Signatures over [t₀, τ] for every τ in ``times``, from one pass over the chords.

    The times are inserted as extra vertices (which leaves the path unchanged)
    so that each prefix ends exactly on a vertex.  Records come back in
    increasing order of τ, duplicates removed.
    """
    taus = np.asarray(sorted(set(float(x) for x in times)))
    t0, t1 = path.times[0], path.times[-1]
    if taus.size == 0 or taus[0] <= t0 or taus[-1] > t1:
        raise ValueError("prefix times must lie in (t0, t_m]")
    extra = taus[~np.isin(taus, path.times)]
    all_t = np.union1d(path.times, extra)
    pts = np.stack([np.interp(all_t, path.times, path.points[:, i]) for i in range(path.d)], axis=1)
    # keep original vertices bit-exact
    idx = np.searchsorted(all_t, path.times)
    pts[idx] = path.points
    cps = np.searchsorted(all_t, taus)
    by_cp = signature_levels_at(np.diff(pts, axis=0), N, cps)
    return [SignatureRecord(float(t0), float(tau), TruncatedTensorSeries(lv, path.d)) for tau, lv in zip(taus, by_cp)]


def record_from_levels(levels: Sequence[np.ndarray], d: int, s: float = 0.0, t: float = 1.0) -> SignatureRecord:
    return SignatureRecord(s, t, TruncatedTensorSeries(levels, d))


def reverse_series(g: TruncatedTensorSeries) -> TruncatedTensorSeries:
    """Signature of the time-reversed path: level n ↦ (-1)^n P^τ(level n)."""
    levels = [g.level(0)]
    for n in range(1, g.N + 1):
        levels.append((-1) ** n * apply_permutation(Permutation.reversal(n), g.level(n), g.d))
    return TruncatedTensorSeries(levels, g.d)


def reverse_signature(rec: SignatureRecord) -> SignatureRecord:
    return SignatureRecord(rec.s, rec.t, reverse_series(rec.series))


def normalized_levels_from_log(log_norms: np.ndarray, p: float = 2.0) -> np.ndarray:
    """a_n = ((n/p)! ‖g_n‖)^{p/n} for n = 1..len-1 from log norms (index n)."""
    n = np.arange(1, len(log_norms))
    with np.errstate(invalid="ignore"):
        expo = (p / n) * (half_factorial_log(n, p) + log_norms[1:])
    return np.where(np.isneginf(log_norms[1:]), 0.0, np.exp(expo))


def normalized_level_sequence(rec: SignatureRecord, p: float = 2.0, kind: NormKind | str = NormKind.L1_PROJ, **kw) -> np.ndarray:
    """Array whose entry n-1 is a_n = ((n/p)! ‖g_n‖)^{p/n}, n = 1..N."""
    if p < 1:
        raise ValueError("p must be at least 1")
    return normalized_levels_from_log(rec.log_norms(kind, **kw), p)
