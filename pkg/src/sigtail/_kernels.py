"""Compiled inner loops.

Levels are packed into one flat buffer: level n starts at ``offsets[n]`` and
holds ``d**n`` coefficients.  No fastmath: summation order is fixed so that
results are bitwise reproducible.
"""
import numpy as np
from numba import njit


def level_offsets(d: int, N: int) -> np.ndarray:
    sizes = np.array([d**n for n in range(N + 1)], dtype=np.int64)
    return np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)


@njit(cache=True)
def _horner_chord(buf, offsets, N, d, v, acc, tmp, w):
    # buf <- buf ⊗ exp(v), top level first so lower levels are still old
    for n in range(N, 0, -1):
        inv = 1.0 / n
        for i in range(d):
            acc[i] = v[i] * inv
        size = d
        src = acc
        dst = tmp
        for k in range(1, n):
            off = offsets[k]
            inv = 1.0 / (n - k)
            for i in range(d):
                w[i] = v[i] * inv
            for a in range(size):
                base = src[a] + buf[off + a]
                for i in range(d):
                    dst[a * d + i] = base * w[i]
            size *= d
            src, dst = dst, src
        off = offsets[n]
        for a in range(size):
            buf[off + a] += src[a]


@njit(cache=True)
def signature_batch(inc, N, offsets):
    """inc: (B, m, d) -> packed signatures (B, total)."""
    B, m, d = inc.shape
    total = offsets[N + 1]
    out = np.zeros((B, total))
    acc = np.empty(d**N)
    tmp = np.empty(d**N)
    w = np.empty(d)
    for b in range(B):
        buf = out[b]
        buf[0] = 1.0
        for j in range(m):
            _horner_chord(buf, offsets, N, d, inc[b, j], acc, tmp, w)
    return out


@njit(cache=True)
def signature_prefix_batch(inc, N, offsets, checkpoints):
    """Packed prefix signatures after each chord count in ``checkpoints``.

    Returns (B, len(checkpoints), total); checkpoints must be increasing.
    """
    B, m, d = inc.shape
    total = offsets[N + 1]
    C = checkpoints.size
    out = np.zeros((B, C, total))
    acc = np.empty(d**N)
    tmp = np.empty(d**N)
    w = np.empty(d)
    buf = np.empty(total)
    for b in range(B):
        buf[:] = 0.0
        buf[0] = 1.0
        c = 0
        for j in range(m):
            _horner_chord(buf, offsets, N, d, inc[b, j], acc, tmp, w)
            while c < C and checkpoints[c] == j + 1:
                out[b, c] = buf
                c += 1
    return out


@njit(cache=True)
def word_hierarchy_batch(inc, letters, lengths):
    """Running coefficients of words along chord paths.

    letters: (W, nmax) 0-based letters (padding ignored past ``lengths``).
    Returns (final, running_sup), each (B, W); the sup is over chord endpoints.
    """
    B, m, d = inc.shape
    W, nmax = letters.shape
    final = np.zeros((B, W))
    sup = np.zeros((B, W))
    c = np.empty(nmax + 1)
    x = np.empty(nmax + 1)
    recip = np.empty(nmax + 1)
    recip[0] = 0.0
    for j in range(1, nmax + 1):
        recip[j] = 1.0 / j
    for b in range(B):
        for w in range(W):
            n = lengths[w]
            c[0] = 1.0
            for j in range(1, n + 1):
                c[j] = 0.0
            best = 0.0
            for s in range(m):
                for j in range(1, n + 1):
                    x[j] = inc[b, s, letters[w, j - 1]]
                for j in range(n, 0, -1):
                    acc = x[1] * recip[j]
                    for q in range(1, j):
                        acc = (acc + c[q]) * x[q + 1] * recip[j - q]
                    c[j] += acc
                a = abs(c[n])
                if a > best:
                    best = a
            final[b, w] = c[n]
            sup[b, w] = best
    return final, sup


@njit(cache=True)
def ito_batch(inc, N, offsets):
    """Left-point (Itô) iterated sums I_n += I_{n-1} ⊗ ΔB, packed (B, total)."""
    B, m, d = inc.shape
    total = offsets[N + 1]
    out = np.zeros((B, total))
    for b in range(B):
        buf = out[b]
        buf[0] = 1.0
        for j in range(m):
            v = inc[b, j]
            for n in range(N, 0, -1):
                lo = offsets[n - 1]
                hi = offsets[n]
                size = d ** (n - 1)
                for a in range(size):
                    base = buf[lo + a]
                    for i in range(d):
                        buf[hi + a * d + i] += base * v[i]
    return out


@njit(cache=True)
def height_rows_batch(inc, lam):
    """Last row of the chord development for each path, with log scaling.

    Each chord multiplies the row r on the right by exp(λ F(v)); the row is
    kept on the unit hyperboloid (r_{d+1} = sqrt(s² + |r_spatial|²) with s the
    current inverse scale) and rescaled when it grows.  Returns (rows, log_scale)
    with the true row equal to exp(log_scale) * rows.
    """
    B, m, d = inc.shape
    rows = np.zeros((B, d + 1))
    logs = np.zeros(B)
    y = np.empty(d)
    for b in range(B):
        for i in range(d):
            y[i] = 0.0
        h = 1.0
        ls = 0.0
        for j in range(m):
            r2 = 0.0
            dot = 0.0
            for i in range(d):
                w = lam * inc[b, j, i]
                r2 += w * w
                dot += y[i] * w
            r = np.sqrt(r2)
            if r > 0.0:
                sh = np.sinh(r) / r
                hs = np.sinh(0.5 * r) / r
                ch = 2.0 * hs * hs
            else:
                sh = 1.0
                ch = 0.5
            # r F(w) = (h w, <y,w>),  r F(w)^2 = (<y,w> w, h |w|^2)
            for i in range(d):
                w = lam * inc[b, j, i]
                y[i] = y[i] + sh * h * w + ch * dot * w
            # re-project onto the hyperboloid of radius exp(-ls)
            q = 0.0
            for i in range(d):
                q += y[i] * y[i]
            h = np.sqrt(np.exp(-2.0 * ls) + q)
            if h > 1e100:
                for i in range(d):
                    y[i] /= h
                ls += np.log(h)
                q = 0.0
                for i in range(d):
                    q += y[i] * y[i]
                h = np.sqrt(np.exp(-2.0 * ls) + q)
        for i in range(d):
            rows[b, i] = y[i]
        rows[b, d] = h
        logs[b] = ls
    return rows, logs
