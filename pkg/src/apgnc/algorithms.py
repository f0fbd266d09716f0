"""Deterministic full-gradient solvers.

Every solver returns a :class:`Trace` with one :class:`IterationRecord` per
outer iteration. In a record, ``y`` is the point the gradient step is taken
from and ``x`` is the resulting prox point, so ``residual`` bounds
``dist(0, dF(x))``.
"""

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import (DivergenceError, UnsupportedModeError, as_vector, make_rng)
from .prox import (InexactProxRequest, NonnegIndicator, inexact_prox,
                   prox_gradient_step, subdifferential_perturbation_nonneg)

__all__ = [
    "MomentumSchedule",
    "SolverConfig",
    "IterationRecord",
    "Trace",
    "momentum_beta",
    "adaptive_beta_update",
    "t_update",
    "accept_step",
    "PROX",
    "EXTRAPOLATED",
    "cubic_prox_error",
    "run_proximal_gradient",
    "run_apg",
    "run_mapg",
    "run_apgnc",
    "run_apgnc_plus",
    "run_inexact_apgnc",
]

PROX = "prox"
EXTRAPOLATED = "extrapolated"

_KINDS = ("none", "nesterov_t", "ratio_k", "adaptive")


@dataclass(frozen=True)
class MomentumSchedule:
    """How the extrapolation weight is chosen.

    ``none``: always 0. ``nesterov_t``: the t-sequence of APG/mAPG.
    ``ratio_k``: ``k/(k+3)``. ``adaptive``: starts at ``beta0``, multiplied by
    ``t_shrink`` when the prox point wins and divided by it (capped at 1)
    when the extrapolated point wins.
    """

    kind: str = "ratio_k"
    beta0: float = 0.5
    t_shrink: float = 0.5

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown momentum kind {self.kind!r}")
        if not 0 <= self.beta0 <= 1:
            raise ValueError("beta0 must lie in [0, 1]")
        if not 0 < self.t_shrink < 1:
            raise ValueError("t_shrink must lie in (0, 1)")


@dataclass
class SolverConfig:
    eta: float
    momentum: MomentumSchedule = field(default_factory=MomentumSchedule)
    max_iters: int = 1000
    residual_tol: float = 0.0
    # k -> ||e_k||, k -> eps_k; None means exact
    grad_error_schedule: Optional[Callable[[int], float]] = None
    prox_error_schedule: Optional[Callable[[int], float]] = None
    rng_seed: int = 0
    band_floor: float = 0.25

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.residual_tol < 0:
            raise ValueError("residual_tol must be nonnegative")


@dataclass
class IterationRecord:
    k: int
    F_x: float
    F_y: float
    step_norm: float
    residual: float
    beta_used: float
    passes: float
    chose_extrapolation: bool
    eps_realized: float = 0.0
    grad_err_realized: float = 0.0


@dataclass
class Trace:
    solver: str
    records: list
    final_x: np.ndarray
    final_F: float
    terminated_by: str
    F0: float
    info: dict = field(default_factory=dict)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])


def momentum_beta(schedule, k, state=None):
    """Extrapolation weight for iteration ``k``.

    ``state`` is the current beta of an adaptive schedule (``beta0`` if None).
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if schedule.kind == "none":
        return 0.0
    if schedule.kind == "ratio_k":
        return k / (k + 3)
    if schedule.kind == "adaptive":
        return schedule.beta0 if state is None else state
    raise ValueError("nesterov_t momentum is driven by t_update, not momentum_beta")


def adaptive_beta_update(beta, chose_extrapolation, t_shrink):
    if chose_extrapolation:
        return min(beta / t_shrink, 1.0)
    return t_shrink * beta


def t_update(t):
    if t < 0:
        raise ValueError("t must be nonnegative")
    return (np.sqrt(4.0 * t * t + 1.0) + 1.0) / 2.0


def accept_step(F_prox, F_extrap):
    """Pick the prox point unless the extrapolated point is strictly lower."""
    if F_prox == np.inf and F_extrap == np.inf:
        raise DivergenceError("both candidate points have infinite objective")
    if np.isnan(F_prox) or np.isnan(F_extrap):
        raise DivergenceError("objective evaluated to NaN")
    return PROX if F_prox <= F_extrap else EXTRAPOLATED


def cubic_prox_error(k):
    """``1 / (100 k^3)``, the decaying prox error used in the benchmarks."""
    return 1.0 / (100.0 * k**3)


def _check_eta(obj, eta, bound=None):
    bound = 1.0 / obj.lipschitz if bound is None else bound
    if eta >= bound:
        warnings.warn(f"step size {eta:g} is not below {bound:g}; descent is not guaranteed",
                      RuntimeWarning, stacklevel=3)


def _finite(value, what):
    if not np.isfinite(value):
        raise DivergenceError(f"non-finite objective at {what}: {value}")
    return value


def _start(obj, x0, cfg):
    x0 = as_vector(x0, obj.dim).copy()
    F0 = obj.F(x0)
    _check_eta(obj, cfg.eta)
    return x0, F0, obj.lipschitz + 1.0 / cfg.eta


def run_proximal_gradient(obj, x0, cfg):
    """Plain proximal gradient: ``x_{k+1} = prox(x_k - eta grad f(x_k))``."""
    if cfg.momentum.kind != "none":
        raise ValueError("proximal gradient takes momentum kind 'none'")
    x, F0, scale = _start(obj, x0, cfg)
    Fx = F0
    records = []
    stop = "max_iters"
    for k in range(1, cfg.max_iters + 1):
        y, Fy = x, Fx
        x = prox_gradient_step(obj, y, cfg.eta)
        Fx = _finite(obj.F(x), f"iteration {k}")
        step = float(np.linalg.norm(x - y))
        records.append(IterationRecord(k, Fx, Fy, step, scale * step, 0.0, float(k), False))
        if scale * step <= cfg.residual_tol:
            stop = "tolerance"
            break
    return Trace("pg", records, x, Fx, stop, F0)


def run_apg(obj, x0, cfg):
    """Accelerated proximal gradient with the t-sequence (FISTA form).

    Not a descent method; intended for convex problems.
    """
    if cfg.momentum.kind != "nesterov_t":
        raise ValueError("APG takes momentum kind 'nesterov_t'")
    x, F0, scale = _start(obj, x0, cfg)
    x_prev = x
    t_prev, t = 0.0, 1.0
    records = []
    stop = "max_iters"
    Fx = F0
    for k in range(1, cfg.max_iters + 1):
        coef = (t_prev - 1.0) / t
        y = x + coef * (x - x_prev)
        Fy = obj.F(y)
        x_new = prox_gradient_step(obj, y, cfg.eta)
        Fx = _finite(obj.F(x_new), f"iteration {k}")
        step = float(np.linalg.norm(x_new - y))
        records.append(IterationRecord(k, Fx, Fy, step, scale * step, coef, float(k), True))
        x_prev, x = x, x_new
        t_prev, t = t, t_update(t)
        if scale * step <= cfg.residual_tol:
            stop = "tolerance"
            break
    return Trace("apg", records, x, Fx, stop, F0)


def run_mapg(obj, x0, cfg):
    """Monotone APG: prox steps from both the extrapolated point and x_k.

    Records use ``F_y = F(x_k)`` and ``F_x = F(x_{k+1})``; each iteration costs
    two full gradients.
    """
    if cfg.momentum.kind != "nesterov_t":
        raise ValueError("mAPG takes momentum kind 'nesterov_t'")
    x, F0, scale = _start(obj, x0, cfg)
    x_prev = z = x
    Fx = F0
    t_prev, t = 0.0, 1.0
    records = []
    stop = "max_iters"
    for k in range(1, cfg.max_iters + 1):
        # t_prev/t is 0 at k=1, so the initial z is immaterial
        w = t_prev / t
        y = x + w * (z - x) + ((t_prev - 1.0) / t) * (x - x_prev)
        z = prox_gradient_step(obj, y, cfg.eta)
        v = prox_gradient_step(obj, x, cfg.eta)
        t_prev, t = t, t_update(t)
        Fz, Fv = obj.F(z), obj.F(v)
        take_z = accept_step(Fz, Fv) == PROX
        Fy = Fx
        if take_z:
            x_new, Fx, step = z, Fz, float(np.linalg.norm(z - y))
        else:
            x_new, Fx, step = v, Fv, float(np.linalg.norm(v - x))
        _finite(Fx, f"iteration {k}")
        records.append(IterationRecord(k, Fx, Fy, step, scale * step, w, 2.0 * k, take_z))
        x_prev, x = x, x_new
        if scale * step <= cfg.residual_tol:
            stop = "tolerance"
            break
    return Trace("mapg", records, x, Fx, stop, F0)


def _apgnc_loop(obj, x0, cfg, solver):
    x_prev, F0, scale = _start(obj, x0, cfg)
    y, Fy = x_prev, F0
    mom = cfg.momentum
    beta = mom.beta0 if mom.kind == "adaptive" else None
    gsched, psched = cfg.grad_error_schedule, cfg.prox_error_schedule
    inexact = gsched is not None or psched is not None
    track_xi = inexact and isinstance(obj.nonsmooth, NonnegIndicator)
    ratios = {"max_grad_err_ratio": 0.0, "max_eps_ratio": 0.0}
    if track_xi:
        ratios["max_xi_ratio"] = 0.0
    records = []
    stop = "max_iters"
    for k in range(1, cfg.max_iters + 1):
        grad = obj.grad(y)
        e_norm = eps_k = 0.0
        if gsched is not None and gsched(k) > 0:
            r = make_rng(cfg.rng_seed, 1, k).standard_normal(obj.dim)
            e = (gsched(k) / np.linalg.norm(r)) * r
            e_norm = float(np.linalg.norm(e))
            grad = grad + e
        point = y - cfg.eta * grad
        if psched is not None and psched(k) > 0:
            seed = int(make_rng(cfg.rng_seed, 2, k).integers(2**63))
            req = InexactProxRequest(psched(k), cfg.band_floor, seed)
            x, eps_k, _ = inexact_prox(obj.nonsmooth, point, cfg.eta, req)
        else:
            x = obj.prox(point, cfg.eta)
        Fx = _finite(obj.F(x), f"iteration {k}")
        b = beta if mom.kind == "adaptive" else momentum_beta(mom, k)
        v = x + b * (x - x_prev)
        Fv = obj.F(v)
        extrap = accept_step(Fx, Fv) == EXTRAPOLATED
        step = float(np.linalg.norm(x - y))
        records.append(IterationRecord(k, Fx, Fy, step, scale * step, b, float(k), extrap,
                                       eps_k, e_norm))
        if inexact and step > 0:
            ratios["max_grad_err_ratio"] = max(ratios["max_grad_err_ratio"], e_norm / step)
            ratios["max_eps_ratio"] = max(ratios["max_eps_ratio"], eps_k / step**2)
            if track_xi and eps_k > 0:
                xi = subdifferential_perturbation_nonneg(obj.grad(x), x, eps_k)
                ratios["max_xi_ratio"] = max(ratios["max_xi_ratio"], xi / step)
        if mom.kind == "adaptive":
            beta = adaptive_beta_update(beta, extrap, mom.t_shrink)
        y, Fy = (v, Fv) if extrap else (x, Fx)
        x_prev = x
        if scale * step <= cfg.residual_tol:
            stop = "tolerance"
            break
    info = ratios if inexact else {}
    return Trace(solver, records, x, Fx, stop, F0, info)


def run_apgnc(obj, x0, cfg):
    """APGnc: accept the extrapolated point only if it lowers F.

    Guarantees ``F(y_{k+1}) <= F(x_k) <= F(y_k)`` for ``eta < 1/L``. Momentum
    kind ``ratio_k`` is the standard choice; ``none`` reduces the method to
    proximal gradient.
    """
    if cfg.momentum.kind not in ("ratio_k", "none"):
        raise ValueError("APGnc takes momentum kind 'ratio_k' (or 'none')")
    if cfg.grad_error_schedule is not None or cfg.prox_error_schedule is not None:
        raise ValueError("use run_inexact_apgnc for error schedules")
    return _apgnc_loop(obj, x0, cfg, "apgnc")


def run_apgnc_plus(obj, x0, cfg):
    """APGnc with adaptive momentum."""
    mom = cfg.momentum
    if mom.kind != "adaptive":
        raise ValueError("APGnc+ takes momentum kind 'adaptive'")
    if not 0 < mom.beta0 <= 1:
        raise ValueError("APGnc+ needs beta0 in (0, 1]")
    if cfg.grad_error_schedule is not None or cfg.prox_error_schedule is not None:
        raise ValueError("use run_inexact_apgnc for error schedules")
    return _apgnc_loop(obj, x0, cfg, "apgnc_plus")


def run_inexact_apgnc(obj, x0, cfg):
    """APGnc with gradient errors ``e_k`` and ``eps_k``-approximate prox steps.

    ``e_k`` has norm ``grad_error_schedule(k)`` and a seeded uniform random
    direction. Works with ``ratio_k`` or ``adaptive`` momentum. The maxima of
    ``||e_k|| / ||x_k - y_k||`` and ``eps_k / ||x_k - y_k||^2`` are reported in
    ``trace.info``; they are monitored, not enforced.
    """
    psched = cfg.prox_error_schedule
    if psched is not None and not obj.nonsmooth.is_convex:
        raise UnsupportedModeError("prox errors require a convex g")
    if cfg.momentum.kind not in ("ratio_k", "adaptive", "none"):
        raise ValueError("inexact APGnc takes 'ratio_k' or 'adaptive' momentum")
    name = "inexact_apgnc_plus" if cfg.momentum.kind == "adaptive" else "inexact_apgnc"
    return _apgnc_loop(obj, x0, cfg, name)
