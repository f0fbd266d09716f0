"""Linear and sublinear rates under the KL property.

A strongly convex quadratic (KL exponent 1/2) gives a geometric decay of
F(x_k) - F*; the quartic sum x_i^4 (exponent 1/4) decays like k^-2.
"""

import numpy as np

from apgnc import algorithms as alg
from apgnc.core import make_rng
from apgnc.diagnostics import (fit_linear_rate, fit_power_rate, gap_sequence,
                               linear_rate_bound, quadratic_kl_calibration)
from apgnc.problems import quadratic_problem, quartic_problem, random_feasible_point

# %% Quadratic with eigenvalues in [1, 10] and g = indicator of x >= 0
eigs = make_rng(0, 5).uniform(1, 10, 20)
quad = quadratic_problem(eigs, seed=0)
eta = 0.05 / quad.lipschitz
tr = alg.run_apgnc(quad, random_feasible_point(20, 0, 1.0), alg.SolverConfig(eta, max_iters=1000))
r = gap_sequence(tr.column("F_x"), quad.F_star)
fit = fit_linear_rate(r)
kl = quadratic_kl_calibration(eigs.min())
bound = linear_rate_bound(quad.lipschitz, eta, kl.c)
print(f"quadratic: fitted contraction {fit.parameter:.4f} (R^2 {fit.r_squared:.4f}), "
      f"KL bound {bound:.6f}")

# per-step ratios scatter around the fitted value
tail = r[fit.tail_start:]
ratios = tail[1:] / tail[:-1]
print("  per-step ratio quantiles 5/50/95%:", np.round(np.percentile(ratios, [5, 50, 95]), 4))

# %% Quartic, proximal gradient from the all-ones corner
quart = quartic_problem(5)
tr = alg.run_proximal_gradient(quart, np.ones(5), alg.SolverConfig(
    0.5 / quart.lipschitz, alg.MomentumSchedule("none"), max_iters=5000))
for n in (200, 1000, 5000):
    p = fit_power_rate(tr.column("F_x")[:n]).parameter
    print(f"quartic: fitted exponent over {n:5d} iterations {p:.3f} (target 2)")
