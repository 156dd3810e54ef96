"""Recover a time change of a Brownian sample from its prefix signatures.

Once the constant is estimated on the whole path, the normalized level of
the prefix up to τ, divided by the constant, estimates the elapsed
Brownian time.  Run with ``python demos/time_change.py``.
"""
import numpy as np

from sigtail.asymptotics import estimate_limsup, recover_parametrization
from sigtail.brownian import sample_brownian
from sigtail.path_signature import signature

grid = np.linspace(0.1, 1.0, 10)
path = sample_brownian(2, 1.0, 12, seed=5).path
kappa = estimate_limsup(signature(path, N=14)).kappa_hat
slow = path.reparametrize(np.sqrt)  # runs at Brownian time τ²

plain = recover_parametrization(path, kappa, grid, N=14)
squared = recover_parametrization(slow, kappa, grid, N=14)
print("  tau   sigma_hat   tau^2   sigma_hat(slow)")
for t, a, b in zip(grid, plain, squared):
    print(f"{t:5.2f}  {a:9.3f}  {t * t:6.3f}  {b:12.3f}")
print(f"sup errors: {np.max(np.abs(plain - grid)):.3f}, {np.max(np.abs(squared - grid**2)):.3f}")
