"""Normalized signature levels of a Brownian sample against a straight line.

For a line the sequence a_n = ((n/2)! ‖S_n‖)^{2/n} decays to zero; for a
Brownian sample it settles near a positive constant times the duration.
Run with ``python demos/brownian_limsup.py``.
"""
import numpy as np

from sigtail.asymptotics import estimate_limsup, kappa_samples
from sigtail.brownian import sample_brownian
from sigtail.path_signature import PiecewiseLinearPath, normalized_level_sequence, signature

N = 14

line = signature(PiecewiseLinearPath.line([1.0, 0.0]), N=N)
bm = signature(sample_brownian(2, 1.0, 12, seed=0).path, N=N)
print(" n   line a_n   brownian a_n")
for n, (x, y) in enumerate(zip(normalized_level_sequence(line), normalized_level_sequence(bm)), start=1):
    print(f"{n:2d}  {x:9.4f}  {y:12.4f}")

rep = estimate_limsup(bm)
print(f"\nwindow {rep.window}: kappa_hat = {rep.kappa_hat:.4f}")

# the estimate over [0, 2] should be roughly twice the estimate over [0, 1]
long = estimate_limsup(signature(sample_brownian(2, 2.0, 13, seed=0).path, N=N))
print(f"same seed on [0, 2]: kappa_hat * t = {long.kappa_hat * 2:.4f}")

ks = kappa_samples(2, 1.0, trials=16, k=12, N=N, seed=1, halves=False)
q1, med, q3 = np.percentile(ks.kappas, [25, 50, 75])
print(f"16 samples: median {med:.4f}, quartiles [{q1:.4f}, {q3:.4f}], bounds [0.5, 4]")
