"""Acceptance criteria, each with its tolerance and wall-clock limit.

The terminal summary prints one PASS/FAIL line per criterion.
"""

import time

import numpy as np
import pytest

from apgnc import algorithms as alg
from apgnc import svrg
from apgnc.cli import main as cli_main
from apgnc.core import DomainError, make_rng
from apgnc.diagnostics import (KLParameters, criticality, descent_lemma_check,
                               fit_linear_rate, fit_power_rate, gap_sequence,
                               svrg_theoretical_d, kl_rate_constants, inexact_rate_constant)
from apgnc.problems import (generate_nnpca, quadratic_problem, quartic_problem,
                            random_feasible_point)
from apgnc.prox import InexactProxRequest, L1Norm, NonnegIndicator, inexact_prox


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


@pytest.fixture(scope="module")
def nnpca_50():
    _, obj = generate_nnpca(200, 50, 1e-3, seed=0)
    return obj


@pytest.mark.criterion(1, "monotone descent of mAPG, APGnc, APGnc+ on NN-PCA")
def test_monotone_descent():
    runs = ((alg.run_mapg, "nesterov_t"), (alg.run_apgnc, "ratio_k"),
            (alg.run_apgnc_plus, "adaptive"))
    worst = -np.inf
    with Timer() as t:
        for seed in range(3):
            _, obj = generate_nnpca(200, 50, 1e-3, seed=seed)
            x0 = random_feasible_point(50, seed)
            for fn, kind in runs:
                cfg = alg.SolverConfig(0.05 / obj.lipschitz, alg.MomentumSchedule(kind),
                                       max_iters=1000)
                tr = fn(obj, x0, cfg)
                Fy, Fx = tr.column("F_y"), tr.column("F_x")
                worst = max(worst, np.max(np.diff(Fy)), np.max(Fx - Fy))
    assert worst <= 1e-10
    assert t.elapsed < 10


@pytest.mark.criterion(2, "descent lemma at 1000 random feasible points")
def test_descent_lemma(nnpca_50):
    obj = nnpca_50
    rng = make_rng(2024)
    eta = 0.5 / obj.lipschitz
    with Timer() as t:
        holds = 0
        for _ in range(1000):
            y = np.abs(rng.normal(size=obj.dim))
            y *= rng.uniform() / np.linalg.norm(y)
            holds += descent_lemma_check(obj, y, eta, slack=1e-10)["holds"]
    assert holds == 1000
    assert t.elapsed < 2


@pytest.mark.criterion(3, "APGnc reaches a 1e-6 critical point on NN-PCA")
def test_criticality(nnpca_50):
    obj = nnpca_50
    x0 = random_feasible_point(50, 0)
    with Timer() as t:
        tr = alg.run_apgnc(obj, x0, alg.SolverConfig(0.05 / obj.lipschitz, max_iters=5000,
                                                     residual_tol=1e-6))
        kkt = criticality(obj, tr.final_x)
    assert tr.terminated_by == "tolerance"
    assert tr.records[-1].residual <= 1e-6
    assert kkt <= 1e-6
    assert t.elapsed < 5


@pytest.mark.criterion(4, "linear rate of APGnc on a strongly convex quadratic")
def test_linear_rate_quadratic():
    eigs = make_rng(0, 5).uniform(1, 10, 20)
    with Timer() as t:
        obj = quadratic_problem(eigs, seed=0)
        x0 = random_feasible_point(20, 0, 1.0)
        tr = alg.run_apgnc(obj, x0, alg.SolverConfig(0.05 / obj.lipschitz, max_iters=1000))
        r = gap_sequence(tr.column("F_x"), obj.F_star)
        fit = fit_linear_rate(r)
        tail = r[fit.tail_start:]
        recursion = np.mean(tail[1:] <= fit.parameter * tail[:-1])
    assert 0 < fit.parameter < 1
    assert fit.r_squared >= 0.99
    assert recursion >= 0.95, (
        f"r_(k+1) <= rho_hat r_k on {recursion:.1%} of tail steps (rho_hat={fit.parameter:.4f})")
    assert t.elapsed < 2


@pytest.mark.criterion(5, "sublinear rate of proximal gradient on the quartic")
def test_power_rate_quartic():
    with Timer() as t:
        obj = quartic_problem(5)
        cfg = alg.SolverConfig(0.5 / obj.lipschitz, alg.MomentumSchedule("none"), max_iters=1000)
        tr = alg.run_proximal_gradient(obj, np.ones(5), cfg)
        fit = fit_power_rate(gap_sequence(tr.column("F_x"), obj.F_star))
    assert 1.5 <= fit.parameter <= 2.5
    assert t.elapsed < 2


@pytest.mark.criterion(6, "SVRG estimator unbiasedness and snapshot identity")
def test_svrg_unbiased():
    with Timer() as t:
        _, obj = generate_nnpca(10, 8, 1e-3, seed=6)
        rng = make_rng(6, 1)
        for _ in range(20):
            x, y = rng.uniform(0, 1, (2, obj.dim))
            g = obj.grad(y)
            est = np.array([svrg.svrg_gradient_estimate(obj, x, y, g, i) for i in range(10)])
            np.testing.assert_allclose(est.mean(axis=0), obj.grad(x), rtol=0, atol=1e-12)
            for i in range(10):
                assert np.array_equal(svrg.svrg_gradient_estimate(obj, y, y, g, i), g)
    assert t.elapsed < 1


def _same_records(a, b):
    return a.records == b.records and np.array_equal(a.final_x, b.final_x)


def _same_epochs(a, b):
    return (len(a.records) == len(b.records)
            and all(p.F_y == q.F_y and p.F_xm == q.F_xm and p.beta_used == q.beta_used
                    and p.chose_extrapolation == q.chose_extrapolation
                    and np.array_equal(p.inner_step_norms, q.inner_step_norms)
                    for p, q in zip(a.records, b.records))
            and np.array_equal(a.final_x, b.final_x))


@pytest.mark.criterion(7, "reduction identities hold bit-for-bit")
def test_reductions():
    zero = lambda k: 0.0  # noqa: E731
    with Timer() as t:
        _, obj = generate_nnpca(100, 20, 1e-3, seed=7)
        x0 = random_feasible_point(20, 7)
        eta = 0.05 / obj.lipschitz
        pg = alg.run_proximal_gradient(obj, x0, alg.SolverConfig(eta, alg.MomentumSchedule("none"),
                                                                 max_iters=300))
        nc0 = alg.run_apgnc(obj, x0, alg.SolverConfig(eta, alg.MomentumSchedule("none"),
                                                      max_iters=300))
        assert _same_records(pg, nc0)

        nc = alg.run_apgnc(obj, x0, alg.SolverConfig(eta, max_iters=300, rng_seed=3))
        inx = alg.run_inexact_apgnc(obj, x0, alg.SolverConfig(
            eta, max_iters=300, rng_seed=3, grad_error_schedule=zero, prox_error_schedule=zero))
        assert _same_records(nc, inx)

        s = svrg.run_svrg_apgnc(obj, x0, svrg.SvrgConfig(m=100, max_epochs=10, rng_seed=5))
        si = svrg.run_inexact_svrg_apgnc(obj, x0, svrg.SvrgConfig(
            m=100, max_epochs=10, rng_seed=5, prox_error_schedule=lambda k, t: 0.0))
        assert _same_epochs(s, si)
    assert t.elapsed < 2


@pytest.mark.criterion(8, "inexact prox lands its gap in [0.25 eps, eps]")
def test_inexact_prox_contract():
    rng = make_rng(8)
    in_band = 0
    with Timer() as t:
        for i in range(100):
            op = NonnegIndicator() if i < 50 else L1Norm(1.0)
            eps = (1e-2, 1e-4)[i % 2]
            y = rng.normal(size=5)
            eta = rng.uniform(0.1, 2.0)
            res = inexact_prox(op, y, eta, InexactProxRequest(eps, 0.25, i))
            u_star = op.prox(y, eta)
            # gap recomputed from scratch, independent of the library's formula
            phi = lambda u: op.value(u) + np.sum((u - y) ** 2) / (2 * eta)  # noqa: E731
            gap = phi(res.u) - phi(u_star)
            assert np.isfinite(op.value(res.u))
            assert gap <= eps * (1 + 1e-9)
            assert res.achieved_gap <= eps
            in_band += (not res.degenerate) and res.achieved_gap >= 0.25 * eps
    assert in_band == 100
    assert t.elapsed < 1


@pytest.mark.criterion(9, "inexact APGnc matches the exact run within 1e-4")
def test_inexact_robustness(nnpca_50):
    obj = nnpca_50
    x0 = random_feasible_point(50, 0)
    eta = 0.05 / obj.lipschitz
    with Timer() as t:
        exact = alg.run_apgnc(obj, x0, alg.SolverConfig(eta, max_iters=2000))
        inexact = alg.run_inexact_apgnc(obj, x0, alg.SolverConfig(
            eta, max_iters=2000, prox_error_schedule=alg.cubic_prox_error))
    assert np.any(inexact.column("eps_realized") > 0)
    assert abs(inexact.final_F - exact.final_F) <= 1e-4
    assert t.elapsed < 5


@pytest.mark.criterion(10, "SVRG-APGnc descends on average over 20 seeds")
def test_svrg_statistical_descent():
    _, obj = generate_nnpca(50, 20, 1e-3, seed=0)
    x0 = random_feasible_point(20, 0)
    with Timer() as t:
        Fy = []
        for seed in range(20):
            tr = svrg.run_svrg_apgnc(obj, x0, svrg.SvrgConfig(m=50, max_epochs=40, rng_seed=seed))
            Fy.append(np.append(tr.column("F_y"), tr.info["F_y_final"]))
        mean = np.mean(Fy, axis=0)
    frac = np.mean(np.diff(mean) <= 0)
    assert frac >= 0.95
    assert mean[0] == pytest.approx(obj.F(x0), rel=1e-14)
    assert mean[-1] < mean[0]
    assert t.elapsed < 20


@pytest.mark.criterion(11, "constant formulas, domain boundaries and rho truth table")
def test_constants():
    with Timer() as t:
        d = kl_rate_constants(1.0, 0.5, KLParameters(0.5, 1.0))
        assert d["d1"] == pytest.approx(18.0, rel=1e-12)
        d = kl_rate_constants(1.0, 0.25, KLParameters(0.5, 1.0))
        assert d["d1"] == pytest.approx(25 / 1.5, rel=1e-12)
        # theta=1/4: second branch is 2 (2^(1/3) - 1) = 0.5198..., first is 1/36
        d = kl_rate_constants(1.0, 0.5, KLParameters(0.25, 1.0), r_k0=1.0)
        assert d["d2"] == pytest.approx(1 / 36, rel=1e-12)
        d = kl_rate_constants(1.0, 0.5, KLParameters(0.25, 1.0), r_k0=1e-4)
        assert d["d2"] == pytest.approx(1 / 36, rel=1e-12)
        d = kl_rate_constants(1.0, 0.5, KLParameters(0.25, 1.0), r_k0=1e4)
        assert d["d2"] == pytest.approx(2 * (2 ** (1 / 3) - 1) * 1e-2, rel=1e-12)
        with pytest.raises(DomainError):
            kl_rate_constants(1.0, 1.0, KLParameters(0.5, 1.0))
        kl_rate_constants(1.0, np.nextafter(1.0, 0), KLParameters(0.5, 1.0))

        assert inexact_rate_constant(1.0, 0.25, 0.5) == pytest.approx(30.25, rel=1e-12)
        assert inexact_rate_constant(1.0, 0.25, 0.0) == kl_rate_constants(
            1.0, 0.25, KLParameters(0.5, 1.0))["d1"]
        with pytest.raises(DomainError):
            inexact_rate_constant(1.0, 1.0 / (2 * 0.5 + 1.0), 0.5)

        exact = svrg_theoretical_d(1.0, 0.25, 1, 1.0)
        assert exact["d"] == pytest.approx(25.25, rel=1e-12)
        assert exact["contraction"] == pytest.approx(25.25 / 26.25, rel=1e-12)
        assert svrg_theoretical_d(1.0, 0.25, 1, 1.0, alpha=0.0)["d"] == pytest.approx(27.5, rel=1e-12)
        with pytest.raises(DomainError):
            svrg_theoretical_d(1.0, 0.25, 1, 1.0, alpha=1.0)
        with pytest.raises(DomainError):
            svrg_theoretical_d(1.0, 0.5, 1, 1.0)

        # coef * rho^2 m^2 + rho, hand-evaluated: exact coef 4, inexact coef 8
        table = {(0.25, 1, False): True,    # 0.5
                 (0.25, 2, False): False,   # 1.25
                 (0.1, 1, False): True,     # 0.14
                 (0.1, 2, False): True,     # 0.26
                 (0.25, 1, True): True,     # 0.75
                 (0.25, 2, True): False,    # 2.25
                 (0.1, 1, True): True,      # 0.18
                 (0.1, 2, True): True}      # 0.42
        for (rho, m, inexact), expected in table.items():
            assert svrg.check_rho_condition(rho, m, inexact) is expected
    assert t.elapsed < 1


@pytest.mark.criterion(12, "effective-pass accounting")
def test_pass_accounting():
    with Timer() as t:
        _, obj = generate_nnpca(40, 10, 1e-3, seed=1)
        x0 = random_feasible_point(10, 1)
        eta = 0.05 / obj.lipschitz
        m = alg.run_mapg(obj, x0, alg.SolverConfig(eta, alg.MomentumSchedule("nesterov_t"),
                                                   max_iters=25))
        assert np.array_equal(np.diff(np.r_[0.0, m.column("passes")]), np.full(25, 2.0))
        a = alg.run_apgnc(obj, x0, alg.SolverConfig(eta, max_iters=25))
        assert np.array_equal(np.diff(np.r_[0.0, a.column("passes")]), np.full(25, 1.0))
        for fn, mom, inner in ((svrg.run_prox_svrg, "none", 40), (svrg.run_svrg_apgnc, "ratio_k", 10),
                               (svrg.run_svrg_apgnc_plus, "adaptive", 25)):
            tr = fn(obj, x0, svrg.SvrgConfig(m=inner, max_epochs=6,
                                             momentum=alg.MomentumSchedule(mom)))
            steps = np.diff(np.r_[0.0, tr.column("passes")])
            np.testing.assert_allclose(steps, 1 + 2 * inner / 40, rtol=0, atol=1e-12)
    assert t.elapsed < 1


CONFIG = """\
[problem]
kind = nnpca
n = 200
d = 50
seed = 0

[run]
seeds = 0, 1
budget = 200

[solver.apgnc]
[solver.mapg]
[solver.apgnc_plus]
[solver.svrg_apgnc]
m = 200
"""


@pytest.mark.criterion(13, "cmd_run output is byte-identical across runs")
def test_determinism(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(CONFIG)
    with Timer() as t:
        outs = []
        for name in ("a", "b"):
            assert cli_main(["run", str(cfg), "--out", str(tmp_path / name)]) == 0
            outs.append({p.name: p.read_bytes() for p in sorted((tmp_path / name).iterdir())})
    assert len(outs[0]) == 9
    assert outs[0] == outs[1]
    assert t.elapsed < 5
