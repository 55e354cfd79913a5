"""
Rate of convergence of the renormalized local time
==================================================

Delta(eps) = E[(L_{eps,c} - L_c)^2] is computed by adaptive cubature over the
three relative positions of two time intervals. The log-log slope of Delta
against eps measures the L^2 convergence rate; at least 1/2 is expected when
(d+1)H <= 3/2.
"""

from fbmlab import ModelParams
from fbmlab.quadrature import QuadConfig, divergence_probe, rate_curve

curve = rate_curve(ModelParams(2, 0.5), [2.0**-k for k in range(2, 9)], QuadConfig(rel_tol=1e-5))
print("eps         Delta        Delta / eps^(1/2)")
for eps, delta, k in zip(curve.eps, curve.delta, curve.K_ratios):
    print(f"{eps:9.3e}   {delta:.4e}   {k:.4f}")
print(f"log-log slope {curve.slope:.3f}")

# E_00 is finite only for dH < 3/2. The probe tracks the truncated integral as
# the cutoff near the diagonal shrinks.
for d, H in [(2, 0.5), (3, 0.6)]:
    rep = divergence_probe(ModelParams(d, H))
    print(f"\nd={d} H={H}: {rep.verdict}; increment ratios",
          " ".join(f"{r:.2f}" for r in rep.increment_ratios))
