"""Variance-reduced solvers averaged over sampling seeds.

Each epoch costs 1 + 2m/n passes: one full gradient at the snapshot and two
component gradients per inner step. Descent holds in expectation, so the
curves are averaged over 20 seeds.
"""

import numpy as np

from apgnc import algorithms as alg
from apgnc import svrg
from apgnc.problems import generate_nnpca, random_feasible_point

_, obj = generate_nnpca(50, 20, seed=0)
x0 = random_feasible_point(20, 0)
seeds = range(20)

solvers = {
    "prox-svrg": (svrg.run_prox_svrg, "none", None),
    "svrg-apgnc": (svrg.run_svrg_apgnc, "ratio_k", None),
    "svrg-apgnc+": (svrg.run_svrg_apgnc_plus, "adaptive", None),
    "inexact": (svrg.run_inexact_svrg_apgnc, "ratio_k", svrg.capped_cubic_prox_error),
}
curves = {}
for name, (fn, mom, sched) in solvers.items():
    runs = [fn(obj, x0, svrg.SvrgConfig(m=50, max_epochs=30, rng_seed=s,
                                        momentum=alg.MomentumSchedule(mom),
                                        prox_error_schedule=sched)) for s in seeds]
    curves[name] = np.mean([r.column("F_x") for r in runs], axis=0)
    passes = runs[0].column("passes")

print("passes " + "".join(f"{n:>14s}" for n in curves))
for j in (0, 4, 9, 19, 29):
    print(f"{passes[j]:6.0f} " + "".join(f"{c[j]:14.8f}" for c in curves.values()))

print("\nstep-size condition 4 rho^2 m^2 + rho <= 1 at rho = 1/(8m):",
      svrg.check_rho_condition(1 / (8 * 50), 50))
