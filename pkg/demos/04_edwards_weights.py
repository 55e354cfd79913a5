"""
Edwards weights exp(-g L)
=========================

The Edwards polymer measure reweights paths by exp(-g L_eps). For dH < 1 the
uncentered weights are bounded by one and decrease in g. At dH = 1 the mean
diverges and the weights use the centered local time L_eps - E(L_eps); their
expectation should then stay put as eps shrinks.
"""

from fbmlab import ModelParams
from fbmlab.montecarlo import ExperimentSpec, edwards_curve, epsilon_ladder

spec = ExperimentSpec(ModelParams(2, 0.4), eps=0.1, grid_n=256, n_paths=2000,
                      g_list=(0.0, 1.0, 5.0, 25.0), seed=5)
for g, est in edwards_curve(spec, workers=4)["uncentered"]:
    print(f"g={g:<5} E[exp(-g L)] = {est.mean:.4f} +- {est.std_error:.4f}")

crit = ExperimentSpec(ModelParams(2, 0.5), eps=0.1, grid_n=256, n_paths=2000, g_list=(0.1,),
                      center_mode="quadrature_mean", seed=5)
print()
for rep in epsilon_ladder(crit, [0.1, 0.05, 0.025], workers=4):
    est = rep.stat("edwards_centered", 0.1)
    print(f"eps={rep.spec['eps']:<6} E[exp(-0.1 L_c)] = {est.mean:.4f} +- {est.std_error:.4f}"
          f"   floor of L_c = {rep.floors['floor']:.3f}")
