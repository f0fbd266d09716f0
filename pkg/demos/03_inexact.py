"""Inexact APGnc: approximate prox steps and gradient errors.

Prox errors eps_k = 1/(100 k^3) are realized as certified members of the
eps-prox set; gradient errors have a prescribed norm and a random direction.
The ratios the inexact analysis needs bounded are monitored along the way.
"""

from apgnc import algorithms as alg
from apgnc.problems import generate_nnpca, random_feasible_point

_, obj = generate_nnpca(200, 50, seed=0)
x0 = random_feasible_point(50, 0)
eta = 0.05 / obj.lipschitz

exact = alg.run_apgnc(obj, x0, alg.SolverConfig(eta, max_iters=2000))
for label, kw in [("prox eps 1/(100k^3)", {"prox_error_schedule": alg.cubic_prox_error}),
                  ("grad error 1e-9", {"grad_error_schedule": lambda k: 1e-9}),
                  ("grad error 1e-4", {"grad_error_schedule": lambda k: 1e-4})]:
    tr = alg.run_inexact_apgnc(obj, x0, alg.SolverConfig(eta, max_iters=2000, **kw))
    print(f"{label:22s} final F {tr.final_F:.10f}  |dF| {abs(tr.final_F - exact.final_F):.1e}  "
          f"residual {tr.records[-1].residual:.1e}")
    print("    monitors:", {k: f"{v:.2e}" for k, v in tr.info.items()})
