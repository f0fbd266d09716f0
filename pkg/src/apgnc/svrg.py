"""Stochastic variance-reduced solvers (proximal SVRG and its momentum variants).

Sampling draws component indices uniformly with replacement from a PCG64
stream seeded by ``cfg.rng_seed``; the index sequence of a run depends on the
seed alone, so exact and inexact runs with equal seeds see the same samples.
Component indices are 0-based.
"""

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .algorithms import (EXTRAPOLATED, MomentumSchedule, Trace, accept_step,
                         adaptive_beta_update, momentum_beta)
from .core import DivergenceError, UnsupportedModeError, as_vector, make_rng
from .prox import InexactProxRequest, inexact_prox, prox_gradient_step

__all__ = [
    "SvrgConfig",
    "EpochRecord",
    "svrg_gradient_estimate",
    "check_rho_condition",
    "capped_cubic_prox_error",
    "run_prox_svrg",
    "run_svrg_apgnc",
    "run_svrg_apgnc_plus",
    "run_inexact_svrg_apgnc",
]


@dataclass
class SvrgConfig:
    """Settings for the SVRG family.

    The step size is ``rho / L`` when ``rho`` is given, else ``eta``, else
    ``1 / (8 m L)``.
    """

    m: int
    eta: Optional[float] = None
    rho: Optional[float] = None
    max_epochs: int = 50
    momentum: MomentumSchedule = field(default_factory=MomentumSchedule)
    # (k, t) -> eps_k^t
    prox_error_schedule: Optional[Callable[[int, int], float]] = None
    rng_seed: int = 0
    band_floor: float = 0.25
    track_alpha: bool = False

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be positive")
        if self.rho is not None and not 0 < self.rho < 0.5:
            raise ValueError("rho must lie in (0, 1/2)")
        if self.eta is not None and not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be positive")

    def step_size(self, L):
        if self.rho is not None:
            return self.rho / L
        if self.eta is not None:
            return self.eta
        return 1.0 / (8.0 * self.m * L)


@dataclass
class EpochRecord:
    k: int
    F_y: float
    F_xm: float
    inner_step_norms: np.ndarray
    passes: float
    chose_extrapolation: bool
    beta_used: float
    eps_sum: float = 0.0
    # (L + 1/eta) * last inner step; only a heuristic with stochastic gradients
    residual: float = 0.0

    @property
    def F_x(self):
        return self.F_xm

    @property
    def step_norm(self):
        return float(self.inner_step_norms[-1])

    @property
    def eps_realized(self):
        return self.eps_sum

    @property
    def grad_err_realized(self):
        return 0.0


def svrg_gradient_estimate(obj, x, snapshot_y, g_full, xi):
    """``grad f_xi(x) - grad f_xi(snapshot) + grad f(snapshot)``."""
    n = obj.smooth.n_components
    if not 0 <= xi < n:
        raise IndexError(f"sample index {xi} out of range for {n} components")
    sm = obj.smooth
    return sm.component_gradient(xi, x) - sm.component_gradient(xi, snapshot_y) + g_full


def check_rho_condition(rho, m, inexact=False):
    """Step-size condition for the linear-rate guarantees with ``eta = rho/L``."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    coef = 8.0 if inexact else 4.0
    return bool(rho < 0.5 and coef * rho**2 * m**2 + rho <= 1.0)


def capped_cubic_prox_error(k, t=0):
    """``min(1/(100 k^3), 1e-7)``; epoch 0 gets the cap."""
    if k == 0:
        return 1e-7
    return min(1.0 / (100.0 * k**3), 1e-7)


def _inner_loop(obj, y, g_full, eta, idx, k, cfg, inexact, alpha_acc):
    x = y
    norms = np.empty(idx.size)
    eps_sum = 0.0
    for t, xi in enumerate(idx):
        v = svrg_gradient_estimate(obj, x, y, g_full, int(xi))
        point = x - eta * v
        eps = cfg.prox_error_schedule(k, t) if inexact else 0.0
        if eps > 0:
            seed = int(make_rng(cfg.rng_seed, 2, k, t).integers(2**63))
            x_new, gap, _ = inexact_prox(obj.nonsmooth, point, eta,
                                         InexactProxRequest(eps, cfg.band_floor, seed))
            eps_sum += gap
        else:
            x_new = obj.prox(point, eta)
        if alpha_acc is not None:
            xbar = prox_gradient_step(obj, x, eta)
            alpha_acc[1] += float(np.sum((xbar - x) ** 2))
        norms[t] = np.linalg.norm(x_new - x)
        x = x_new
    if alpha_acc is not None:
        alpha_acc[0] += 3.0 * eps_sum
    return x, norms, eps_sum


def _svrg_loop(obj, x0, cfg, solver, momentum):
    y = as_vector(x0, obj.dim).copy()
    n = obj.smooth.n_components
    L = obj.lipschitz
    eta = cfg.step_size(L)
    if eta >= 1.0 / (2.0 * cfg.m * L):
        warnings.warn(f"step size {eta:g} is not below 1/(2mL)", RuntimeWarning, stacklevel=3)
    if n == 1 and cfg.m > 1:
        warnings.warn("single-component objective: sampling is deterministic",
                      RuntimeWarning, stacklevel=3)
    inexact = cfg.prox_error_schedule is not None
    if inexact and not obj.nonsmooth.is_convex:
        raise UnsupportedModeError("prox errors require a convex g")
    F0 = obj.F(y)
    Fy = F0
    xm_prev = y
    beta = momentum.beta0 if momentum.kind == "adaptive" else None
    per_epoch = 1.0 + 2.0 * cfg.m / n
    scale = L + 1.0 / eta
    rng = make_rng(cfg.rng_seed, 0)
    records, samples, alphas = [], [], []
    for k in range(cfg.max_epochs):
        g_full = obj.grad(y)
        idx = rng.integers(0, n, size=cfg.m)
        samples.append(idx)
        acc = [0.0, 0.0] if cfg.track_alpha else None
        xm, norms, eps_sum = _inner_loop(obj, y, g_full, eta, idx, k, cfg, inexact, acc)
        if acc is not None:
            alphas.append(acc[0] / acc[1] if acc[1] > 0 else np.inf)
        Fxm = obj.F(xm)
        if not np.isfinite(Fxm):
            raise DivergenceError(f"non-finite objective at epoch {k}: {Fxm}")
        if momentum.kind == "none" and solver == "prox_svrg":
            b, extrap = 0.0, False
            y_next, F_next = xm, Fxm
        else:
            b = beta if momentum.kind == "adaptive" else momentum_beta(momentum, k)
            z = xm + b * (xm - xm_prev)
            Fz = obj.F(z)
            extrap = accept_step(Fxm, Fz) == EXTRAPOLATED
            y_next, F_next = (z, Fz) if extrap else (xm, Fxm)
            if momentum.kind == "adaptive":
                beta = adaptive_beta_update(beta, extrap, momentum.t_shrink)
        records.append(EpochRecord(k, Fy, Fxm, norms, (k + 1) * per_epoch, extrap, b,
                                   eps_sum, scale * float(norms[-1])))
        xm_prev = xm
        y, Fy = y_next, F_next
    info = {"samples": samples, "eta": eta, "y_final": y, "F_y_final": Fy}
    if cfg.track_alpha:
        info["alpha"] = alphas
    return Trace(solver, records, xm, Fxm, "max_iters", F0, info)


def run_prox_svrg(obj, x0, cfg):
    """Proximal SVRG: each epoch restarts from the last inner iterate."""
    if obj.smooth.n_components < 1:
        raise ValueError("objective has no components")
    return _svrg_loop(obj, x0, cfg, "prox_svrg", MomentumSchedule("none"))


def run_svrg_apgnc(obj, x0, cfg):
    """SVRG inner loop followed by an APGnc-style accept/reject extrapolation.

    With ``ratio_k`` momentum the weight at epoch 0 is 0, so the undefined
    previous epoch end never matters. Momentum ``none`` reduces to
    :func:`run_prox_svrg`.
    """
    if cfg.momentum.kind not in ("ratio_k", "none"):
        raise ValueError("SVRG-APGnc takes momentum kind 'ratio_k' (or 'none')")
    if cfg.prox_error_schedule is not None:
        raise ValueError("use run_inexact_svrg_apgnc for prox errors")
    return _svrg_loop(obj, x0, cfg, "svrg_apgnc", cfg.momentum)


def run_svrg_apgnc_plus(obj, x0, cfg):
    """SVRG-APGnc with the adaptive beta update applied once per epoch.

    At epoch 0 the previous epoch end is taken to be ``x0``.
    """
    if cfg.momentum.kind != "adaptive":
        raise ValueError("SVRG-APGnc+ takes momentum kind 'adaptive'")
    if cfg.prox_error_schedule is not None:
        raise ValueError("use run_inexact_svrg_apgnc for prox errors")
    return _svrg_loop(obj, x0, cfg, "svrg_apgnc_plus", cfg.momentum)


def run_inexact_svrg_apgnc(obj, x0, cfg):
    """SVRG-APGnc whose inner prox steps are ``eps_k^t``-approximate.

    Each epoch record carries the sum of realized gaps; with
    ``cfg.track_alpha`` the ratio ``3 sum eps / sum ||xbar - x^t||^2`` against
    the exact full-gradient step ``xbar`` is stored per epoch in
    ``trace.info["alpha"]`` (three times the cost).
    """
    if not obj.nonsmooth.is_convex:
        raise UnsupportedModeError("inexact SVRG-APGnc requires a convex g")
    if cfg.momentum.kind not in ("ratio_k", "adaptive", "none"):
        raise ValueError("unsupported momentum kind")
    name = "inexact_svrg_apgnc_plus" if cfg.momentum.kind == "adaptive" else "inexact_svrg_apgnc"
    return _svrg_loop(obj, x0, cfg, name, cfg.momentum)
