"""
How fast does the mean local time blow up?
==========================================

For H = 1/d the mean grows like ln(1/eps) with slope T / (2H (2 pi)^{d/2}).
For 1/d < H < 3/(2d) it grows like a power eps^{-d/2 + 1/(2H)}. Both are
checked here with the exact mean integral, which needs no sampling.
"""

import math

import numpy as np

from fbmlab import ModelParams, mean_asymptotic, mean_local_time
from fbmlab.quadrature import mean_divergence_curve

# Logarithmic case in the plane, H = 1/2 (Brownian motion).
pairs, slope = mean_divergence_curve(ModelParams(2, 0.5))
print("eps        E(L_eps)")
for eps, m in pairs[::2]:
    print(f"{eps:8.1e}   {m:.6f}")
print(f"fitted slope {slope:.6f}   predicted {1 / (2 * math.pi):.6f}")

# Power case, H = 0.6. The leading term is approached slowly: the relative
# correction is of order eps^{1/6}, so the ratio is still visibly below one
# at eps = 1e-8.
p = ModelParams(2, 0.6)
print("\neps        mean / leading term")
for eps in np.logspace(-4, -16, 5):
    print(f"{eps:8.1e}   {mean_local_time(p, eps) / mean_asymptotic(p, eps):.4f}")
