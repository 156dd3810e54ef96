"""Develop one Brownian sample into hyperbolic space at growing scale λ.

The log-height divided by λ² approaches a constant that the windowed
signature estimate bounds from above.  Run with
``python demos/hyperbolic_height.py``.
"""
import math

from sigtail import hyperbolic as hy
from sigtail.asymptotics import estimate_limsup
from sigtail.brownian import sample_brownian
from sigtail.path_signature import signature

s = sample_brownian(2, 1.0, 14, seed=3)
kappa = estimate_limsup(signature(s.path, N=14)).kappa_hat
print(f"kappa_hat = {kappa:.4f}")
print("lambda   log h / lambda^2")
for lam in (1, 2, 4, 8, 16, 32):
    log_h = hy.develop_height(s.increments, float(lam))
    print(f"{lam:6d}   {log_h / lam**2:.4f}")

# a right-angled geodesic triangle loses at most log 2 against the two legs
r = hy.triangle_defect_check(5.0, 5.0, math.pi / 2)
print(f"\ntriangle (5, 5, right angle): defect {r.defect:.6f} <= {r.bound:.6f}")
