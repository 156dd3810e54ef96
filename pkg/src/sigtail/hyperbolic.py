"""Cartan development into SO(d,1) and the hyperboloid model of H^d.

Points live on {x : x*x = -1, x_{d+1} > 0} with the Minkowski form
x*y = Σ x_i y_i - x_{d+1} y_{d+1}; the base point is o = e_{d+1}.  A chord v
develops into the Lorentz boost exp F(v), F(v) = [[0, v], [vᵀ, 0]], and a
piecewise-linear path into the ordered product of its chord boosts.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import _kernels
from .brownian import levy_points, trial_rng, MAX_DEPTH
from .path_signature import PiecewiseLinearPath

POINT_TOL = 1e-9
FRAME_TOL = 1e-9
# relative drift beyond which a development is declared numerically broken
DRIFT_GUARD = 1e-6
MAX_CHORD = 0.25
REPROJECT_LIMIT = 1e6


def minkowski_metric(d: int) -> np.ndarray:
    J = np.eye(d + 1)
    J[d, d] = -1.0
    return J


def minkowski(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """x*y along the last axis."""
    return np.sum(x[..., :-1] * y[..., :-1], axis=-1) - x[..., -1] * y[..., -1]


def origin(d: int) -> np.ndarray:
    o = np.zeros(d + 1)
    o[d] = 1.0
    return o


def F_map(x: Sequence[float]) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    d = x.size
    out = np.zeros((d + 1, d + 1))
    out[:d, d] = x
    out[d, :d] = x
    return out


@dataclass(frozen=True)
class HyperbolicPoint:
    x: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=np.float64)
        if x.ndim != 1 or x.size < 2:
            raise ValueError("a hyperboloid point is a vector in R^{d+1}, d >= 1")
        q = float(minkowski(x, x))
        if abs(q + 1.0) > POINT_TOL * max(1.0, x[-1] ** 2) or x[-1] < 1.0 - POINT_TOL:
            raise ValueError(f"point is off the hyperboloid (x*x = {q})")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @property
    def d(self) -> int:
        return self.x.size - 1

    @property
    def height(self) -> float:
        return float(self.x[-1])

    @classmethod
    def origin(cls, d: int) -> "HyperbolicPoint":
        return cls(origin(d))


def hyperbolic_distance(x: HyperbolicPoint | np.ndarray, y: HyperbolicPoint | np.ndarray) -> float:
    """ρ(x, y) = arccosh(-x*y)."""
    xa = x.x if isinstance(x, HyperbolicPoint) else np.asarray(x, dtype=np.float64)
    ya = y.x if isinstance(y, HyperbolicPoint) else np.asarray(y, dtype=np.float64)
    c = -float(minkowski(xa, ya))
    if c < 1.0 - POINT_TOL:
        raise ValueError(f"-x*y = {c} < 1: not a pair of hyperboloid points")
    return float(np.arccosh(max(c, 1.0)))


def frame_defect(G: np.ndarray) -> float:
    """max |Γ J Γᵀ J - I|."""
    J = minkowski_metric(G.shape[0] - 1)
    return float(np.max(np.abs(G @ J @ G.T @ J - np.eye(G.shape[0]))))


@dataclass(frozen=True)
class LorentzFrame:
    """An element of SO(d,1), validated up to rounding that scales with ‖Γ‖²."""

    entries: np.ndarray

    def __post_init__(self):
        G = np.array(self.entries, dtype=np.float64)
        if G.ndim != 2 or G.shape[0] != G.shape[1] or G.shape[0] < 2:
            raise ValueError("a Lorentz frame is a square (d+1)x(d+1) matrix")
        scale = max(1.0, float(np.max(np.abs(G))) ** 2)
        if frame_defect(G) > DRIFT_GUARD * scale or G[-1, -1] <= 0:
            raise ValueError("matrix is not in SO(d,1)")
        G.setflags(write=False)
        object.__setattr__(self, "entries", G)

    @property
    def d(self) -> int:
        return self.entries.shape[0] - 1

    @property
    def defect(self) -> float:
        return frame_defect(self.entries)

    def __matmul__(self, other: "LorentzFrame") -> "LorentzFrame":
        return LorentzFrame(self.entries @ other.entries)

    def point(self) -> HyperbolicPoint:
        """Γ o, the last column."""
        return HyperbolicPoint(self.entries[:, -1])

    @classmethod
    def identity(cls, d: int) -> "LorentzFrame":
        return cls(np.eye(d + 1))


def chord_exp_matrix(x: Sequence[float]) -> np.ndarray:
    """exp F(x) = I + (sinh r/r) F + ((cosh r - 1)/r²) F², r = |x|₂."""
    x = np.asarray(x, dtype=np.float64)
    r = float(np.linalg.norm(x))
    Fx = F_map(x)
    if r == 0.0:
        return np.eye(x.size + 1)
    if r > 700.0:
        raise FloatingPointError(f"chord of length {r:.4g} overflows double range")
    a = math.sinh(r) / r
    b = 2.0 * (math.sinh(0.5 * r) / r) ** 2
    return np.eye(x.size + 1) + a * Fx + b * (Fx @ Fx)


def chord_exp(x: Sequence[float]) -> LorentzFrame:
    return LorentzFrame(chord_exp_matrix(x))


def boost(y: np.ndarray) -> np.ndarray:
    """Symmetric boost L(y) in SO(d,1) with last row (y, sqrt(1+|y|²)); batched over leading axes."""
    y = np.asarray(y, dtype=np.float64)
    d = y.shape[-1]
    h = np.sqrt(1.0 + np.sum(y * y, axis=-1))
    L = np.zeros(y.shape[:-1] + (d + 1, d + 1))
    L[..., :d, :d] = np.eye(d) + y[..., :, None] * y[..., None, :] / (h + 1.0)[..., None, None]
    L[..., :d, d] = y
    L[..., d, :d] = y
    L[..., d, d] = h
    return L


def lorentz_reproject(G: np.ndarray) -> np.ndarray:
    """Project a near-Lorentz frame (or stack of frames) back onto SO(d,1).

    Every Γ in SO(d,1) factors as diag(Q, 1)·L(y), with L(y) the boost carrying
    the last row (y, h) and Q a rotation.  The projection keeps y, resets
    h = sqrt(1 + |y|²), and replaces the rotation part by its polar factor.
    Unlike row-wise normalisation of the timelike row, this changes h only by
    a relative O(error) amount however large h is.
    """
    G = np.asarray(G, dtype=np.float64)
    d = G.shape[-1] - 1
    y = G[..., d, :d]
    h = np.sqrt(1.0 + np.sum(y * y, axis=-1))
    # rotation part: top-left block of Γ L(y)^{-1}, with L(y)^{-1} = J L(y) J
    A = G[..., :d, :d] @ (np.eye(d) + y[..., :, None] * y[..., None, :] / (h + 1.0)[..., None, None])
    A = A - G[..., :d, d, None] * y[..., None, :]
    U, _, Vt = np.linalg.svd(A)
    Q = U @ Vt
    out = boost(y)
    out[..., :d, :] = Q @ out[..., :d, :]
    return out


# development -------------------------------------------------------------------


@dataclass
class DevelopmentTrace:
    """Heights and distances of the developed point at every path vertex."""

    times: np.ndarray
    points: np.ndarray
    log_heights: np.ndarray
    lam: float
    frame_defects: np.ndarray
    frames: np.ndarray | None = None

    @property
    def heights(self) -> np.ndarray:
        return np.exp(self.log_heights)

    @property
    def distances(self) -> np.ndarray:
        # ρ = arccosh h = log h + log(1 + sqrt(1 - h^{-2}))
        lh = self.log_heights
        return lh + np.log1p(np.sqrt(-np.expm1(-2.0 * lh)))

    def length(self) -> float:
        """Hyperbolic length of the geodesic-chord trace."""
        pts = self.points
        c = -minkowski(pts[:-1], pts[1:])
        return float(np.sum(np.arccosh(np.maximum(c, 1.0))))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "h", "rho", "loght"])
        for t, h, rho, lh in zip(self.times, self.heights, self.distances, self.log_heights):
            writer.writerow([repr(float(t)), repr(float(h)), repr(float(rho)), repr(float(lh))])
        return buf.getvalue()


def develop(path: PiecewiseLinearPath, lam: float = 1.0, keep_frames: bool = False, reproject: bool = True) -> DevelopmentTrace:
    """Γ_j = Γ_{j-1} exp F(λ Δγ_j), optionally re-projected to SO(d,1) after each chord.

    Re-projection is skipped once entries exceed 1e6: beyond that the
    invariant can only be resolved to ~‖Γ‖² ε and the plain chord product is
    already accurate to that level.  Raises if the invariant drifts beyond a
    relative 1e-6 or the frame leaves double range; use :func:`develop_height`
    for very large λ.
    """
    if not lam > 0:
        raise ValueError("λ must be positive")
    d = path.d
    J = minkowski_metric(d)
    I = np.eye(d + 1)
    G = I.copy()
    inc = path.increments * lam
    pts = np.empty((inc.shape[0] + 1, d + 1))
    pts[0] = origin(d)
    defects = np.zeros(inc.shape[0] + 1)
    frames = np.empty((inc.shape[0] + 1, d + 1, d + 1)) if keep_frames else None
    if keep_frames:
        frames[0] = G
    for j, v in enumerate(inc, start=1):
        G = G @ chord_exp_matrix(v)
        if reproject and np.max(np.abs(G)) <= REPROJECT_LIMIT:
            G = lorentz_reproject(G)
        if not np.all(np.isfinite(G)) or np.max(np.abs(G)) > 1e150:
            raise FloatingPointError("frame left double range; use develop_height")
        err = float(np.max(np.abs(G @ J @ G.T @ J - I)))
        if err > DRIFT_GUARD * max(1.0, float(np.max(np.abs(G))) ** 2):
            raise FloatingPointError(f"Lorentz invariant drifted to {err:.3e} at chord {j}")
        defects[j] = err
        pts[j] = G[:, -1]
        if keep_frames:
            frames[j] = G
    log_h = np.log(np.maximum(pts[:, -1], 1.0))
    return DevelopmentTrace(path.times.copy(), pts, log_h, float(lam), defects, frames)


def develop_height(increments: np.ndarray, lam: float) -> np.ndarray:
    """log h for a batch (B, m, d) of chord paths, overflow-safe for any λ.

    Propagates only the last frame row, which stays on the hyperboloid and
    carries h in its last entry.
    """
    inc = np.ascontiguousarray(increments, dtype=np.float64)
    single = inc.ndim == 2
    if single:
        inc = inc[None]
    rows, logs = _kernels.height_rows_batch(inc, float(lam))
    log_h = np.log(rows[:, -1]) + logs
    return log_h[0] if single else log_h


def height_series(levels: Sequence[np.ndarray], d: int, lam: float) -> tuple[float, int]:
    """Σ_n λ^{2n} <S^{2n}, (Σ e_i⊗e_i)^{⊗n}> from signature levels; returns (h, top n)."""
    eye = np.eye(d).reshape(-1)
    pattern = np.ones(1)
    h = 1.0
    n = 0
    while 2 * (n + 1) < len(levels):
        n += 1
        pattern = np.multiply.outer(pattern, eye).reshape(-1)
        h += lam ** (2 * n) * float(levels[2 * n] @ pattern)
    return h, n


def series_tail_bound(lam: float, N: int, L: float) -> float:
    """Σ_{n > N/2} λ^{2n} L^n / n!, the neglected tail of the height series."""
    x = lam * lam * L
    n0 = N // 2 + 1
    term = math.exp(n0 * math.log(x) - math.lgamma(n0 + 1)) if x > 0 else 0.0
    total = 0.0
    n = n0
    while term > 1e-300 and (term > 1e-18 * total or n < n0 + 5):
        total += term
        n += 1
        term *= x / n
    return total


# triangle defects ---------------------------------------------------------------


class TriangleDefect(NamedTuple):
    a: float
    defect: float
    bound: float
    ok: bool


def cosine_law_side(b: float, c: float, theta: float) -> float:
    """Side opposite the angle θ between sides b and c (first cosine law).

    Uses sinh²(a/2) = sinh²((b-c)/2) + sinh b sinh c sin²(θ/2), in logs when large.
    """
    s2 = math.sin(0.5 * theta) ** 2

    def log_sinh(x):
        return x + math.log(-math.expm1(-2.0 * x)) - math.log(2.0) if x > 0 else -math.inf

    t1 = 2.0 * log_sinh(abs(b - c) / 2.0) if b != c else -math.inf
    t2 = log_sinh(b) + log_sinh(c) + math.log(s2)
    log_S = np.logaddexp(t1, t2)
    if log_S < 600:
        return 2.0 * math.asinh(math.sqrt(math.exp(log_S)))
    # asinh(√S) = ½ log S + log(1 + sqrt(1 + 1/S))
    return log_S + 2.0 * math.log1p(math.sqrt(1.0 + math.exp(-log_S)))


def defect_bound(theta: float) -> float:
    """log(2/(1 - cos θ)) = -2 log sin(θ/2)."""
    return -2.0 * math.log(math.sin(0.5 * theta))


def triangle_defect_check(b: float, c: float, theta: float, lams: Sequence[float] | None = None, tol: float = 1e-9) -> TriangleDefect:
    """Defect b + c - a against log(2/(1 - cos θ)).

    ``ok`` also requires λ ↦ λb + λc - a(λb, λc) to be non-decreasing on ``lams``
    (default: 40 log-spaced points in [1e-2, 1e2]).
    """
    if not (b > 0 and c > 0 and 0 < theta < math.pi):
        raise ValueError("need b, c > 0 and θ in (0, π)")
    a = cosine_law_side(b, c, theta)
    defect = b + c - a
    bound = defect_bound(theta)
    ok = -tol <= defect <= bound + tol
    grid = np.geomspace(1e-2, 1e2, 40) if lams is None else np.asarray(lams)
    f = np.array([lam * (b + c) - cosine_law_side(lam * b, lam * c, theta) for lam in grid])
    ok = ok and bool(np.all(np.diff(f) >= -tol)) and bool(np.all(f <= bound + tol))
    return TriangleDefect(a, defect, bound, ok)


def two_chord_defect(v1: Sequence[float], v2: Sequence[float], lam: float) -> tuple[float, float]:
    """(λ(|v1|+|v2|) - ρ(X_end, o), bound) for the two-chord development."""
    v1 = np.asarray(v1, dtype=np.float64)
    v2 = np.asarray(v2, dtype=np.float64)
    path = PiecewiseLinearPath(np.arange(3.0), np.vstack([np.zeros_like(v1), v1, v1 + v2]))
    tr = develop(path, lam)
    # interior angle of the triangle at the middle vertex is π minus the turning angle
    cos_turn = float(v1 @ v2 / (np.linalg.norm(v1) * np.linalg.norm(v2)))
    theta = math.pi - math.acos(max(-1.0, min(1.0, cos_turn)))
    defect = lam * (np.linalg.norm(v1) + np.linalg.norm(v2)) - tr.distances[-1]
    return float(defect), defect_bound(theta)


def triangle_sweep(count: int, seed: int = 0, tol: float = 1e-9) -> list[tuple[float, float, float, TriangleDefect]]:
    rng = trial_rng(seed, 0)
    out = []
    for _ in range(count):
        b, c = rng.uniform(0.05, 10.0, size=2)
        theta = rng.uniform(0.05, math.pi - 0.05)
        out.append((float(b), float(c), float(theta), triangle_defect_check(b, c, theta, tol=tol)))
    return out


# Brownian heights ---------------------------------------------------------------


class HeightSample(NamedTuple):
    log_h: float
    k: int

    @property
    def h(self) -> float:
        return math.exp(self.log_h)


def refined_increments(d: int, t: float, lam: float, k: int, seed: int, trial: int = 0) -> tuple[np.ndarray, int]:
    """Brownian increments at the first depth ≥ k with λ·max chord ≤ 0.25.

    Deeper levels extend the same midpoint construction, so the coarse
    skeleton of the sample never changes.
    """
    while True:
        inc = np.diff(levy_points(trial_rng(seed, trial), d, t, k), axis=0)
        if lam * float(np.max(np.linalg.norm(inc, axis=1))) <= MAX_CHORD or k >= MAX_DEPTH:
            return inc, k
        k += 1


def develop_brownian_height(d: int, t: float, lam: float, k: int = 12, seed: int = 0, trial: int = 0) -> HeightSample:
    inc, k_used = refined_increments(d, t, lam, k, seed, trial)
    return HeightSample(float(develop_height(inc, lam)), k_used)


def brownian_log_heights(d: int, t: float, lam: float, M: int, k: int = 8, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """log h for trials 0..M-1 and the depth each one used."""
    logs = np.empty(M)
    depths = np.empty(M, dtype=np.int64)
    for j in range(M):
        s = develop_brownian_height(d, t, lam, k, seed, j)
        logs[j] = s.log_h
        depths[j] = s.k
    return logs, depths


def ito_height_paths(d: int, t: float, lam: float, M: int, steps: int | None = None, seed: int = 0, record: bool = False):
    """Euler–Maruyama for dΓ = λΓF(dB) + (λ²/2)Γ diag(I_d, d) dt on M trials.

    The number of steps is rounded up to a power of two and the increments
    come from the same midpoint construction as the chord samples, so trial
    j sees the same Brownian path here and in :func:`develop_brownian_height`.
    Frames are re-projected onto SO(d,1) after every step.  Returns final heights
    (M,), and with ``record`` also the height paths (M, steps+1).
    """
    min_steps = max(1024, int(math.ceil(lam * lam * t * 100)))
    steps = min_steps if steps is None else max(int(steps), 1)
    k = int(math.ceil(math.log2(steps)))
    if k > MAX_DEPTH:
        raise ValueError("too many steps")
    steps = 2**k
    dt = t / steps
    inc = np.stack([np.diff(levy_points(trial_rng(seed, j), d, t, k), axis=0) for j in range(M)])
    G = np.broadcast_to(np.eye(d + 1), (M, d + 1, d + 1)).copy()
    drift = np.ones(d + 1)
    drift[d] = d
    drift *= 0.5 * lam * lam * dt
    hist = np.empty((M, steps + 1)) if record else None
    if record:
        hist[:, 0] = 1.0
    for j in range(steps):
        dB = lam * inc[:, j, :]
        # Γ F(dB): column d gets Γ[:, :d] dB, columns :d get Γ[:, d] dBᵀ
        step = np.empty_like(G)
        step[:, :, d] = np.einsum("mij,mj->mi", G[:, :, :d], dB)
        step[:, :, :d] = G[:, :, d, None] * dB[:, None, :]
        G = G + step + G * drift
        G = lorentz_reproject(G)
        if record:
            hist[:, j + 1] = G[:, d, d]
    h = G[:, d, d].copy()
    return (h, hist) if record else h


def ito_height_sde(d: int, t: float, lam: float, steps: int | None = None, seed: int = 0, trial: int = 0) -> float:
    if lam == 0:
        return 1.0
    if steps is not None and steps < lam * lam * t * 100:
        raise ValueError("need at least λ²·t·100 steps")
    if trial == 0:
        return float(ito_height_paths(d, t, lam, 1, steps, seed)[0])
    return float(ito_height_paths(d, t, lam, trial + 1, steps, seed)[trial])


# height decay experiment --------------------------------------------------------


def height_decay_bound(d: int, mu: float, lam: float, t: float) -> float:
    """exp(-λ² μ (d-1-μ) t / 2)."""
    return math.exp(-lam * lam * mu * (d - 1 - mu) * t / 2.0)


@dataclass(frozen=True)
class HeightDecayRow:
    d: int
    mu: float
    lam: float
    t: float
    M: int
    mean: float
    stderr: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.mean <= self.bound + 3.0 * self.stderr

    @property
    def in_range(self) -> bool:
        """Whether 0 < μ < d-1, the range where the bound is below 1."""
        return 0 < self.mu < self.d - 1

    def csv_row(self) -> list[str]:
        return [str(self.d), repr(self.mu), repr(self.lam), repr(self.t), str(self.M),
                repr(self.mean), repr(self.stderr), repr(self.bound), "1" if self.passed else "0"]


HEIGHT_CSV_HEADER = ["d", "mu", "lambda", "t", "M", "mean_hinvmu", "stderr", "bound", "pass"]


def height_decay_experiment(
    ds: Sequence[int], mus: Sequence[float], lams: Sequence[float], t: float = 1.0, M: int = 2000, k: int = 8, seed: int = 0
) -> list[HeightDecayRow]:
    """E[h^{-μ}] against exp(-λ²μ(d-1-μ)t/2) on a grid; one set of heights per (d, λ)."""
    rows = []
    for d in ds:
        for lam in lams:
            log_h, _ = brownian_log_heights(d, t, lam, M, k, seed)
            for mu in mus:
                vals = np.exp(-mu * log_h)
                rows.append(HeightDecayRow(int(d), float(mu), float(lam), float(t), M, float(vals.mean()),
                                           float(vals.std(ddof=1) / math.sqrt(M)), height_decay_bound(d, mu, lam, t)))
    return rows


def height_rows_to_csv(rows: Sequence[HeightDecayRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEIGHT_CSV_HEADER)
    for r in rows:
        writer.writerow(r.csv_row())
    return buf.getvalue()
