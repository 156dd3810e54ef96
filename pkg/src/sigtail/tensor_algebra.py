"""Truncated tensor series over R^d.

Level ``n`` of a series is stored as a flat float64 array of length ``d**n``
indexed by words ``(i_1, ..., i_n)`` in lexicographic order, so the flat index
of a word is its base-``d`` expansion with ``i_1`` most significant.  Words are
0-based internally; the text/JSON formats only carry the flat arrays.

Most kernels here accept arrays with arbitrary leading batch axes so that the
path and Monte Carlo modules can push many series through one numpy call.
"""
from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import gammaln

DEFAULT_TOL = 1e-9

# top level kept under ~2**20 coefficients
DEFAULT_TRUNCATION = {1: 20, 2: 14, 3: 10}


def default_truncation(d: int) -> int:
    return DEFAULT_TRUNCATION.get(d, 8)


class TruncatedTensorSeries:
    """Element of the truncated tensor algebra T^(N)(R^d).

    ``levels[n]`` is a read-only flat array of ``d**n`` coefficients.
    """

    __slots__ = ("_d", "_levels")

    def __init__(self, levels: Sequence[np.ndarray], d: int):
        if d < 1:
            raise ValueError(f"dimension must be positive, got {d}")
        if len(levels) < 1:
            raise ValueError("a series needs at least level 0")
        frozen = []
        for n, lev in enumerate(levels):
            arr = np.array(lev, dtype=np.float64).reshape(-1)
            if arr.size != d**n:
                raise ValueError(f"level {n} has {arr.size} coefficients, expected {d**n}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"level {n} has non-finite coefficients")
            arr.setflags(write=False)
            frozen.append(arr)
        self._d = int(d)
        self._levels = tuple(frozen)

    @property
    def d(self) -> int:
        return self._d

    @property
    def N(self) -> int:
        return len(self._levels) - 1

    @property
    def levels(self) -> tuple[np.ndarray, ...]:
        return self._levels

    def level(self, n: int) -> np.ndarray:
        return self._levels[n]

    def tensor(self, n: int) -> np.ndarray:
        """Level ``n`` reshaped to ``(d,)*n``."""
        return self._levels[n].reshape((self._d,) * n)

    def coefficient(self, word: Sequence[int]) -> float:
        """Coefficient of a word given with 1-based letters."""
        return float(self._levels[len(word)][word_index(word, self._d, one_based=True)])

    @classmethod
    def unit(cls, d: int, N: int) -> "TruncatedTensorSeries":
        return cls([np.ones(1)] + [np.zeros(d**n) for n in range(1, N + 1)], d)

    @classmethod
    def zero(cls, d: int, N: int) -> "TruncatedTensorSeries":
        return cls([np.zeros(d**n) for n in range(N + 1)], d)

    def __mul__(self, other: "TruncatedTensorSeries") -> "TruncatedTensorSeries":
        return truncated_product(self, other)

    def __add__(self, other: "TruncatedTensorSeries") -> "TruncatedTensorSeries":
        _check_compatible(self, other)
        return TruncatedTensorSeries([a + b for a, b in zip(self._levels, other._levels)], self._d)

    def __sub__(self, other: "TruncatedTensorSeries") -> "TruncatedTensorSeries":
        _check_compatible(self, other)
        return TruncatedTensorSeries([a - b for a, b in zip(self._levels, other._levels)], self._d)

    def scale(self, c: float) -> "TruncatedTensorSeries":
        return TruncatedTensorSeries([c * a for a in self._levels], self._d)

    def dilate(self, c: float) -> "TruncatedTensorSeries":
        """Image under the path dilation x -> c x (level n scaled by c**n)."""
        return TruncatedTensorSeries([c**n * a for n, a in enumerate(self._levels)], self._d)

    def max_abs_diff(self, other: "TruncatedTensorSeries") -> float:
        _check_compatible(self, other)
        return max(float(np.max(np.abs(a - b))) for a, b in zip(self._levels, other._levels))

    def allclose(self, other: "TruncatedTensorSeries", atol: float = DEFAULT_TOL) -> bool:
        return self.max_abs_diff(other) <= atol

    def __repr__(self) -> str:
        return f"TruncatedTensorSeries(d={self._d}, N={self.N})"

    # serialization -------------------------------------------------------

    def to_text(self) -> str:
        lines = [f"{self._d} {self.N}"]
        for lev in self._levels:
            lines.append(" ".join(repr(float(x)) for x in lev))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "TruncatedTensorSeries":
        rows = text.strip("\n").split("\n")
        d, N = (int(x) for x in rows[0].split())
        if len(rows) != N + 2:
            raise ValueError(f"expected {N + 1} level lines, found {len(rows) - 1}")
        levels = [np.array([float(x) for x in row.split()]) for row in rows[1:]]
        return cls(levels, d)

    def to_json(self) -> str:
        return json.dumps({"d": self._d, "N": self.N, "levels": [lev.tolist() for lev in self._levels]})

    @classmethod
    def from_json(cls, text: str) -> "TruncatedTensorSeries":
        obj = json.loads(text)
        series = cls([np.asarray(lev, dtype=np.float64) for lev in obj["levels"]], int(obj["d"]))
        if series.N != int(obj["N"]):
            raise ValueError("truncation in header does not match number of levels")
        return series


def _check_compatible(a: TruncatedTensorSeries, b: TruncatedTensorSeries) -> None:
    if a.d != b.d:
        raise ValueError(f"dimension mismatch: {a.d} vs {b.d}")
    if a.N != b.N:
        raise ValueError(f"truncation mismatch: {a.N} vs {b.N}")


def word_index(word: Sequence[int], d: int, one_based: bool = False) -> int:
    idx = 0
    shift = 1 if one_based else 0
    for letter in word:
        letter = int(letter) - shift
        if not 0 <= letter < d:
            raise ValueError(f"letter out of range for d={d}: {word}")
        idx = idx * d + letter
    return idx


def index_word(idx: int, n: int, d: int) -> tuple[int, ...]:
    """Inverse of :func:`word_index`, returning 1-based letters."""
    letters = []
    for _ in range(n):
        idx, r = divmod(idx, d)
        letters.append(r + 1)
    return tuple(reversed(letters))


# batched kernels -----------------------------------------------------------


def outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Flat tensor product over trailing axes, broadcasting leading ones."""
    out = a[..., :, None] * b[..., None, :]
    return out.reshape(out.shape[:-2] + (-1,))


def product_levels(a: Sequence[np.ndarray], b: Sequence[np.ndarray], N: int) -> list[np.ndarray]:
    """Truncated product of two level lists (batched over leading axes)."""
    out = []
    for n in range(N + 1):
        acc = a[0][..., :1] * b[n] if n else a[0] * b[0]
        for k in range(1, n + 1):
            acc = acc + outer(a[k], b[n - k])
        out.append(acc)
    return out


def segment_exp_levels(v: np.ndarray, N: int) -> list[np.ndarray]:
    """Levels of exp(v) for v of shape (..., d)."""
    v = np.asarray(v, dtype=np.float64)
    levels = [np.ones(v.shape[:-1] + (1,))]
    cur = levels[0]
    for n in range(1, N + 1):
        cur = outer(cur, v / n)
        levels.append(cur)
    return levels


def mul_segment_exp(levels: list[np.ndarray], v: np.ndarray) -> list[np.ndarray]:
    """Right-multiply batched series by exp(v) in place (Horner per level).

    Level n of S ⊗ exp(v) is Σ_k S_k ⊗ v^{⊗(n-k)}/(n-k)!; evaluating it by
    Horner keeps every intermediate a single outer product with ``v``.
    """
    N = len(levels) - 1
    for n in range(N, 0, -1):
        acc = outer(levels[0], v / n)
        for k in range(1, n):
            acc = outer(acc + levels[k], v / (n - k))
        levels[n] = levels[n] + acc
    return levels


# public operations ----------------------------------------------------------


def truncated_product(a: TruncatedTensorSeries, b: TruncatedTensorSeries) -> TruncatedTensorSeries:
    """Product in T^(N)(R^d); levels above N are discarded."""
    _check_compatible(a, b)
    return TruncatedTensorSeries(product_levels(a.levels, b.levels, a.N), a.d)


def segment_exp(v: Sequence[float], N: int) -> TruncatedTensorSeries:
    """Signature of the straight segment with increment ``v``: level n is v^{⊗n}/n!."""
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise ValueError("segment increment must be finite")
    return TruncatedTensorSeries(segment_exp_levels(v, N), v.size)


def tensor_inverse(g: TruncatedTensorSeries) -> TruncatedTensorSeries:
    """Inverse of a series with unit scalar part, via the geometric series."""
    if abs(g.level(0)[0] - 1.0) > 1e-12:
        raise ValueError("inverse implemented for series with scalar part 1")
    d, N = g.d, g.N
    x = [np.zeros(1)] + [-lev for lev in g.levels[1:]]
    result = [np.ones(1)] + [np.zeros(d**n) for n in range(1, N + 1)]
    power = [np.ones(1)] + [np.zeros(d**n) for n in range(1, N + 1)]
    for _ in range(N):
        power = product_levels(power, x, N)
        result = [r + p for r, p in zip(result, power)]
    return TruncatedTensorSeries(result, d)


# permutations and shuffles ---------------------------------------------------


@dataclass(frozen=True)
class Permutation:
    """Permutation σ of {1,…,n} stored 0-based: ``image[k] = σ(k+1) - 1``.

    Acting on tensors it realises a_1⊗…⊗a_n ↦ a_σ(1)⊗…⊗a_σ(n).
    """

    image: tuple[int, ...]

    def __post_init__(self):
        img = tuple(int(i) for i in self.image)
        if sorted(img) != list(range(len(img))):
            raise ValueError(f"not a bijection: {img}")
        object.__setattr__(self, "image", img)

    @property
    def n(self) -> int:
        return len(self.image)

    @classmethod
    def from_one_based(cls, image: Sequence[int]) -> "Permutation":
        return cls(tuple(i - 1 for i in image))

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def reversal(cls, n: int) -> "Permutation":
        return cls(tuple(range(n - 1, -1, -1)))

    def inverse(self) -> "Permutation":
        return Permutation(tuple(int(i) for i in np.argsort(self.image)))


def apply_permutation(sigma: Permutation, a: np.ndarray, d: int) -> np.ndarray:
    """Apply the tensor permutation operator to a flat level-n array."""
    n = sigma.n
    a = np.asarray(a, dtype=np.float64)
    if a.shape[-1] != d**n:
        raise ValueError(f"arity mismatch: permutation of {n} letters, array of length {a.shape[-1]}")
    lead = a.shape[:-1]
    t = a.reshape(lead + (d,) * n)
    off = len(lead)
    axes = tuple(range(off)) + tuple(off + i for i in sigma.image)
    return np.ascontiguousarray(np.transpose(t, axes)).reshape(lead + (d**n,))


def shuffles(n: int, k: int):
    """Yield the (n,k)-shuffles as :class:`Permutation` objects.

    σ(1)<…<σ(n) and σ(n+1)<…<σ(n+k); the image of the first block is the set
    of positions taken by the first word in the interleaving.
    """
    total = n + k
    for first in itertools.combinations(range(total), n):
        chosen = set(first)
        second = tuple(i for i in range(total) if i not in chosen)
        yield Permutation(first + second)


def shuffle_product(a: np.ndarray, b: np.ndarray, d: int) -> np.ndarray:
    """Shuffle product of a level-n and a level-k array (flat, lexicographic)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = _level_of(a.size, d)
    k = _level_of(b.size, d)
    prod = outer(a, b)
    out = np.zeros(d ** (n + k))
    for sigma in shuffles(n, k):
        out += apply_permutation(sigma.inverse(), prod, d)
    return out


def _level_of(size: int, d: int) -> int:
    if d == 1:
        raise ValueError("level of a d=1 array is ambiguous; pass tensors with d >= 2")
    n = round(math.log(size, d))
    if d**n != size:
        raise ValueError(f"array of length {size} is not a level for d={d}")
    return n


class GroupLikeResult(NamedTuple):
    ok: bool
    violation: float
    n: int
    k: int
    word: tuple[int, ...]


def is_group_like(g: TruncatedTensorSeries, tol: float = DEFAULT_TOL, max_level: int | None = None) -> GroupLikeResult:
    """Check g^n ⊗ g^k = Σ_{σ∈S(n,k)} P^σ(g^{n+k}) for all 1 ≤ n ≤ k, n+k ≤ N.

    Returns the verdict together with the worst violation and where it occurs
    (``word`` is 1-based, of length n+k).
    """
    if abs(g.level(0)[0] - 1.0) > tol:
        raise ValueError("group-like check needs scalar part 1")
    d = g.d
    top = g.N if max_level is None else min(max_level, g.N)
    worst = (0.0, 0, 0, ())
    for total in range(2, top + 1):
        for n in range(1, total // 2 + 1):
            k = total - n
            lhs = outer(g.level(n), g.level(k))
            rhs = np.zeros_like(lhs)
            for sigma in shuffles(n, k):
                rhs += apply_permutation(sigma, g.level(total), d)
            dev = np.abs(lhs - rhs)
            i = int(np.argmax(dev))
            if dev[i] > worst[0]:
                worst = (float(dev[i]), n, k, index_word(i, total, d))
    return GroupLikeResult(worst[0] <= tol, *worst)


# norms -------------------------------------------------------------------------


class NormKind(enum.Enum):
    L1_PROJ = "l1_proj"
    L2_COORD = "l2_coord"
    L1_OF_COORDS_UPPER = "l1_upper"
    SAMPLED_DUAL_LOWER = "sampled_dual_lower"

    @classmethod
    def parse(cls, value: "NormKind | str") -> "NormKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip()
        for member in cls:
            if key.lower() in (member.value, member.name.lower()):
                return member
        raise ValueError(f"unknown norm kind {value!r}")


def level_norm(
    a: np.ndarray,
    kind: NormKind | str = NormKind.L1_PROJ,
    d: int | None = None,
    samples: int = 10_000,
    seed: int = 0,
) -> float:
    """Norm of a single tensor level.

    ``L1_PROJ`` is the projective norm for the l¹ base norm, which is exactly
    the coordinate l¹ norm; ``L1_OF_COORDS_UPPER`` is the same number read as
    an upper bound for the l²-projective norm.  ``SAMPLED_DUAL_LOWER`` evaluates
    ``samples`` random products of l²-unit linear forms on ``a`` and returns the
    largest absolute value, a lower bound for the l²-projective norm.
    """
    kind = NormKind.parse(kind)
    a = np.asarray(a, dtype=np.float64)
    if kind in (NormKind.L1_PROJ, NormKind.L1_OF_COORDS_UPPER):
        return float(np.sum(np.abs(a)))
    if kind is NormKind.L2_COORD:
        return float(np.sqrt(np.sum(a * a)))
    if d is None:
        d = a.shape[0] if a.ndim > 1 else None
    if d is None:
        raise ValueError("sampled dual norm needs the dimension d for flat input")
    return sampled_dual_lower(a.reshape(-1), d, samples=samples, seed=seed)


def sampled_dual_lower(a: np.ndarray, d: int, samples: int = 10_000, seed: int = 0, chunk: int = 4096) -> float:
    """max_m |⟨a, u_1^m ⊗ … ⊗ u_n^m⟩| over random l²-unit vectors u_j^m."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    if a.size == 1:
        return float(abs(a[0]))
    n = _level_of(a.size, d)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    best = 0.0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        u = rng.standard_normal((m, n, d))
        u /= np.linalg.norm(u, axis=-1, keepdims=True)
        vals = np.broadcast_to(a, (m, a.size))
        for j in range(n - 1, -1, -1):
            vals = np.einsum("mki,mi->mk", vals.reshape(m, -1, d), u[:, j, :])
        best = max(best, float(np.max(np.abs(vals))))
        done += m
    return best


def half_factorial_log(n: int | np.ndarray, p: float = 2.0):
    """log Γ(n/p + 1), i.e. the log of the fractional factorial (n/p)!."""
    if p < 1:
        raise ValueError("p must be at least 1")
    return gammaln(np.asarray(n, dtype=np.float64) / p + 1.0) if np.ndim(n) else float(gammaln(n / p + 1.0))
