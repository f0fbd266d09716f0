"""Named invariant checks run by ``apgnc check``.

Each check returns ``(ok, detail)``. The fast level covers oracle, prox,
solver and estimator invariants on small instances; the full level adds the
rate fits.
"""

import numpy as np

from . import svrg as _svrg
from .algorithms import (MomentumSchedule, SolverConfig, run_apgnc, run_apgnc_plus,
                         run_apg, run_inexact_apgnc, run_mapg, run_proximal_gradient,
                         t_update)
from .core import finite_diff_gradient, make_rng, mean_gradient_check
from .diagnostics import (criticality, descent_lemma_check, fit_linear_rate,
                          fit_power_rate, gap_sequence)
from .problems import generate_nnpca, quadratic_problem, quartic_problem, random_feasible_point
from .prox import (InexactProxRequest, L1Norm, NonnegIndicator, inexact_prox, prox_l1,
                   prox_nonneg)

__all__ = ["FAST_CHECKS", "FULL_CHECKS", "run_checks"]


def _instances():
    _, nn = generate_nnpca(30, 8, 1e-3, seed=3)
    quad = quadratic_problem(np.linspace(1, 10, 6), seed=3)
    return [("nnpca", nn), ("quadratic", quad), ("quartic", quartic_problem(4))]


def check_gradient_consistency():
    rng = make_rng(11)
    worst = 0.0
    for _, obj in _instances():
        for _ in range(20):
            x = rng.uniform(-0.5, 0.5, obj.dim)
            g = obj.grad(x)
            err = np.max(np.abs(g - finite_diff_gradient(obj, x, 1e-6)))
            worst = max(worst, err / (1 + np.max(np.abs(g))))
    return worst <= 1e-5, f"max scaled error {worst:.3g}"


def check_lipschitz_soundness():
    rng = make_rng(12)
    viol = 0
    for _, obj in _instances():
        for _ in range(100):
            x, y = rng.uniform(-1, 1, (2, obj.dim))
            lhs = np.linalg.norm(obj.grad(x) - obj.grad(y))
            viol += lhs > obj.lipschitz * np.linalg.norm(x - y) * (1 + 1e-12)
    return viol == 0, f"{viol} violations"


def check_finite_sum():
    rng = make_rng(13)
    worst = 0.0
    for _, obj in _instances():
        x = rng.uniform(-1, 1, obj.dim)
        scale = 1 + np.max(np.abs(obj.grad(x)))
        worst = max(worst, mean_gradient_check(obj, x)["max_abs_deviation"] / scale)
    return worst <= 1e-12, f"max relative deviation {worst:.3g}"


def check_prox_grid_optimality():
    rng = make_rng(14)
    grid = np.arange(-3, 3.0005, 1e-2)
    G1, G2 = np.meshgrid(grid, grid, indexing="ij")
    worst = -np.inf
    for op in (NonnegIndicator(), L1Norm(0.7)):
        for _ in range(10):
            y, eta = rng.uniform(-2, 2, 2), rng.uniform(0.1, 1.5)
            u = op.prox(y, eta)
            if isinstance(op, NonnegIndicator):
                vals = np.where((G1 >= 0) & (G2 >= 0), 0.0, np.inf)
            else:
                vals = op.lam * (np.abs(G1) + np.abs(G2))
            obj_grid = vals + ((G1 - y[0]) ** 2 + (G2 - y[1]) ** 2) / (2 * eta)
            phi_u = op.value(u) + np.sum((u - y) ** 2) / (2 * eta)
            worst = max(worst, phi_u - obj_grid.min())
    return worst <= 1e-12, f"max excess over grid minimum {worst:.3g}"


def check_prox_nonexpansive():
    rng = make_rng(15)
    viol = 0
    for _ in range(100):
        a, b = rng.normal(size=(2, 5))
        for p, q in ((prox_nonneg(a), prox_nonneg(b)), (prox_l1(a, 0.3, 1.0), prox_l1(b, 0.3, 1.0))):
            viol += np.linalg.norm(p - q) > np.linalg.norm(a - b) * (1 + 1e-14)
    return viol == 0, f"{viol} violations"


def check_inexact_prox_contract():
    rng = make_rng(16)
    bad = 0
    for i in range(40):
        op = NonnegIndicator() if i % 2 else L1Norm(1.0)
        eps = 1e-2 if i % 4 < 2 else 1e-4
        res = inexact_prox(op, rng.normal(size=4), 0.5, InexactProxRequest(eps, 0.25, i))
        bad += not (res.achieved_gap <= eps and (res.degenerate or res.achieved_gap >= 0.25 * eps))
    return bad == 0, f"{bad} contract violations"


def check_inexact_prox_determinism():
    req = InexactProxRequest(1e-3, 0.25, 99)
    y = np.array([-0.3, 0.8, 0.1])
    a = inexact_prox(NonnegIndicator(), y, 0.5, req)
    b = inexact_prox(NonnegIndicator(), y, 0.5, req)
    return bool(np.array_equal(a.u, b.u) and a.achieved_gap == b.achieved_gap), "repeat call"


def _nn():
    _, obj = generate_nnpca(60, 12, 1e-3, seed=5)
    return obj, random_feasible_point(12, 5)


def check_descent_lemma():
    obj, _ = _nn()
    rng = make_rng(17)
    eta = 0.5 / obj.lipschitz
    fails = 0
    for _ in range(300):
        y = np.abs(rng.normal(size=obj.dim))
        y *= rng.uniform() / np.linalg.norm(y)
        fails += not descent_lemma_check(obj, y, eta)["holds"]
    return fails == 0, f"{fails} failures"


def check_descent_chain():
    obj, x0 = _nn()
    eta = 0.05 / obj.lipschitz
    worst = -np.inf
    for fn, kind in ((run_mapg, "nesterov_t"), (run_apgnc, "ratio_k"), (run_apgnc_plus, "adaptive")):
        tr = fn(obj, x0, SolverConfig(eta, MomentumSchedule(kind), max_iters=300))
        Fy, Fx = tr.column("F_y"), tr.column("F_x")
        worst = max(worst, np.max(Fx - Fy), np.max(Fy[1:] - Fx[:-1]))
    return worst <= 1e-10, f"largest increase {worst:.3g}"


def check_residual_soundness():
    _, obj = generate_nnpca(60, 12, 1e-3, seed=5, radius=None)
    x0 = random_feasible_point(12, 5, 0.1)
    eta = 0.05 / obj.lipschitz
    y = x0
    worst = -np.inf
    for _ in range(50):
        x = obj.prox(y - eta * obj.grad(y), eta)
        bound = (obj.lipschitz + 1 / eta) * np.linalg.norm(x - y)
        worst = max(worst, criticality(obj, x) - bound)
        y = x
    return worst <= 1e-8, f"max excess {worst:.3g}"


def check_apg_t_sequence():
    t, ok = 1.0, True
    for k in range(1, 500):
        ok &= t >= (k + 1) / 2
        t = t_update(t)
    return bool(ok), "t_k >= (k+1)/2 for k < 500"


def check_reduction_pg():
    obj, x0 = _nn()
    eta = 0.05 / obj.lipschitz
    a = run_proximal_gradient(obj, x0, SolverConfig(eta, MomentumSchedule("none"), max_iters=100))
    b = run_apgnc(obj, x0, SolverConfig(eta, MomentumSchedule("none"), max_iters=100))
    return a.records == b.records and np.array_equal(a.final_x, b.final_x), "apgnc(beta=0) vs pg"


def check_reduction_inexact():
    obj, x0 = _nn()
    eta = 0.05 / obj.lipschitz
    zero = lambda k: 0.0  # noqa: E731
    a = run_apgnc(obj, x0, SolverConfig(eta, max_iters=100))
    b = run_inexact_apgnc(obj, x0, SolverConfig(eta, max_iters=100, grad_error_schedule=zero,
                                                prox_error_schedule=zero))
    return a.records == b.records and np.array_equal(a.final_x, b.final_x), "zero schedules"


def check_reduction_inexact_svrg():
    _, obj = generate_nnpca(20, 6, 1e-3, seed=2)
    x0 = random_feasible_point(6, 2)
    a = _svrg.run_svrg_apgnc(obj, x0, _svrg.SvrgConfig(m=20, max_epochs=5, rng_seed=4))
    b = _svrg.run_inexact_svrg_apgnc(obj, x0, _svrg.SvrgConfig(
        m=20, max_epochs=5, rng_seed=4, prox_error_schedule=lambda k, t: 0.0))
    same = all(p.F_y == q.F_y and p.F_xm == q.F_xm and np.array_equal(p.inner_step_norms, q.inner_step_norms)
               for p, q in zip(a.records, b.records))
    return same and np.array_equal(a.final_x, b.final_x), "eps = 0"


def check_svrg_unbiased():
    _, obj = generate_nnpca(10, 5, 1e-3, seed=6)
    rng = make_rng(18)
    worst = 0.0
    for _ in range(20):
        x, y = np.abs(rng.normal(size=(2, 5)))
        g = obj.grad(y)
        avg = np.mean([_svrg.svrg_gradient_estimate(obj, x, y, g, i) for i in range(10)], axis=0)
        gx = obj.grad(x)
        worst = max(worst, np.max(np.abs(avg - gx)) / (1 + np.max(np.abs(gx))))
    return worst <= 1e-12, f"max deviation {worst:.3g}"


def check_svrg_snapshot_identity():
    _, obj = generate_nnpca(10, 5, 1e-3, seed=6)
    y = random_feasible_point(5, 1)
    g = obj.grad(y)
    ok = all(np.array_equal(_svrg.svrg_gradient_estimate(obj, y, y, g, i), g) for i in range(10))
    return ok, "estimate equals full gradient at the snapshot"


def check_pass_accounting():
    obj, x0 = _nn()
    eta = 0.05 / obj.lipschitz
    m = run_mapg(obj, x0, SolverConfig(eta, MomentumSchedule("nesterov_t"), max_iters=7))
    a = run_apgnc(obj, x0, SolverConfig(eta, max_iters=7))
    s = _svrg.run_svrg_apgnc(obj, x0, _svrg.SvrgConfig(m=30, max_epochs=4))
    per = 1 + 2 * 30 / obj.n_components
    ok = (np.array_equal(m.column("passes"), 2.0 * np.arange(1, 8))
          and np.array_equal(a.column("passes"), np.arange(1.0, 8.0))
          and np.allclose([r.passes for r in s.records], per * np.arange(1, 5), rtol=0, atol=1e-12))
    return bool(ok), "mapg 2/iter, apgnc 1/iter, svrg 1+2m/n per epoch"


def check_rate_fit_exact():
    k = np.arange(40, dtype=float)
    lin = fit_linear_rate(2 * 0.9**k, 1.0)
    pw = fit_power_rate((k + 1) ** -2.0, 1.0)
    ok = abs(lin.parameter - 0.9) < 1e-10 and abs(pw.parameter - 2) < 1e-10
    return ok and lin.r_squared > 1 - 1e-12 and pw.r_squared > 1 - 1e-12, "synthetic sequences"


def check_apg_convex_limit():
    obj = quadratic_problem([1.0, 1.0], constraint=None)
    tr = run_apg(obj, np.ones(2), SolverConfig(0.9, MomentumSchedule("nesterov_t"), max_iters=300))
    return tr.final_F < 1e-12, f"final F {tr.final_F:.3g}"


def check_rate_linear_quadratic():
    eigs = make_rng(0, 5).uniform(1, 10, 20)
    obj = quadratic_problem(eigs, seed=0)
    x0 = random_feasible_point(20, 0, 1.0)
    tr = run_apgnc(obj, x0, SolverConfig(0.05 / obj.lipschitz, max_iters=1000))
    fit = fit_linear_rate(gap_sequence(tr.column("F_x"), 0.0))
    return 0 < fit.parameter < 1 and fit.r_squared >= 0.99, f"rho={fit.parameter:.4f} R2={fit.r_squared:.4f}"


def check_rate_power_quartic():
    obj = quartic_problem(5)
    tr = run_proximal_gradient(obj, np.ones(5), SolverConfig(0.5 / obj.lipschitz,
                                                             MomentumSchedule("none"), max_iters=1000))
    fit = fit_power_rate(tr.column("F_x"))
    return 1.5 <= fit.parameter <= 2.5, f"p={fit.parameter:.4f}"


FAST_CHECKS = {
    "core.gradient_consistency": check_gradient_consistency,
    "core.lipschitz_soundness": check_lipschitz_soundness,
    "core.finite_sum_consistency": check_finite_sum,
    "prox.grid_optimality": check_prox_grid_optimality,
    "prox.nonexpansive": check_prox_nonexpansive,
    "prox.inexact_contract": check_inexact_prox_contract,
    "prox.inexact_determinism": check_inexact_prox_determinism,
    "algorithms.descent_lemma": check_descent_lemma,
    "algorithms.descent_chain": check_descent_chain,
    "algorithms.residual_soundness": check_residual_soundness,
    "algorithms.apg_t_sequence": check_apg_t_sequence,
    "algorithms.apg_convex_limit": check_apg_convex_limit,
    "reduction.apgnc_zero_momentum_is_pg": check_reduction_pg,
    "reduction.inexact_zero_is_apgnc": check_reduction_inexact,
    "reduction.inexact_svrg_zero_is_svrg_apgnc": check_reduction_inexact_svrg,
    "svrg.unbiasedness": check_svrg_unbiased,
    "svrg.snapshot_identity": check_svrg_snapshot_identity,
    "accounting.passes": check_pass_accounting,
    "diagnostics.rate_fit_exact": check_rate_fit_exact,
}

FULL_CHECKS = {
    **FAST_CHECKS,
    "rate.linear_quadratic": check_rate_linear_quadratic,
    "rate.power_quartic": check_rate_power_quartic,
}


def run_checks(level="fast"):
    """Run the suite; returns a list of ``(name, ok, detail)``."""
    checks = FULL_CHECKS if level == "full" else FAST_CHECKS
    results = []
    for name, fn in checks.items():
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))
    return results
