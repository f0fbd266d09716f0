"""Monotone momentum on non-negative PCA.

Proximal gradient, mAPG, APGnc and APGnc+ run on the same instance and start
point. The table reports F after a given number of effective passes (one
pass = one full gradient). mAPG pays two passes per iteration.
"""

import numpy as np

from apgnc import algorithms as alg
from apgnc.diagnostics import criticality
from apgnc.problems import generate_nnpca, random_feasible_point

# %% Problem: 200 unit-norm samples in 50 dimensions, feasible set {x >= 0, ||x|| <= 1}
_, obj = generate_nnpca(200, 50, gamma=1e-3, seed=0)
x0 = random_feasible_point(50, seed=0)
eta = 0.05 / obj.lipschitz
print(f"L = {obj.lipschitz:.4f}, eta = {eta:.3e}, F(x0) = {obj.F(x0):.6f}")

# %% Runs at an equal pass budget
budget = 600
runs = {
    "pg": alg.run_proximal_gradient(obj, x0, alg.SolverConfig(eta, alg.MomentumSchedule("none"),
                                                              max_iters=budget)),
    "mapg": alg.run_mapg(obj, x0, alg.SolverConfig(eta, alg.MomentumSchedule("nesterov_t"),
                                                   max_iters=budget // 2)),
    "apgnc": alg.run_apgnc(obj, x0, alg.SolverConfig(eta, max_iters=budget)),
    "apgnc+": alg.run_apgnc_plus(obj, x0, alg.SolverConfig(eta, alg.MomentumSchedule("adaptive"),
                                                           max_iters=budget)),
}


def F_at(trace, passes):
    """F of the last iterate reached within ``passes`` effective passes."""
    p = trace.column("passes")
    j = np.searchsorted(p, passes, side="right") - 1
    return trace.F0 if j < 0 else trace.records[j].F_x


checkpoints = [10, 50, 100, 200, 400, 600]
print("\npasses " + "".join(f"{name:>14s}" for name in runs))
for cp in checkpoints:
    print(f"{cp:6d} " + "".join(f"{F_at(tr, cp):14.8f}" for tr in runs.values()))

# %% Every monotone method keeps F(y_{k+1}) <= F(x_k) <= F(y_k)
for name in ("mapg", "apgnc", "apgnc+"):
    tr = runs[name]
    Fx, Fy = tr.column("F_x"), tr.column("F_y")
    worst = max(np.max(Fx - Fy), np.max(Fy[1:] - Fx[:-1]))
    accepted = np.mean(tr.column("chose_extrapolation"))
    print(f"{name:7s} largest increase {worst:+.2e}, momentum accepted {accepted:.0%}")

# %% Criticality of the final points
for name, tr in runs.items():
    print(f"{name:7s} KKT residual {criticality(obj, tr.final_x):.2e}, "
          f"residual bound {tr.records[-1].residual:.2e}")
