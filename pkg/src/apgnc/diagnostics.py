"""Trace analysis: criticality measures, descent checks, rate fits and the
theoretical rate constants.
"""

from dataclasses import dataclass

import numpy as np

from .core import DomainError, ZeroFunction, as_vector
from .prox import NonnegBallIndicator, NonnegIndicator, prox_gradient_step

__all__ = [
    "KLParameters",
    "RateFit",
    "residual_bound",
    "kkt_residual_nonneg",
    "kkt_residual_nonneg_ball",
    "criticality",
    "descent_lemma_check",
    "fit_linear_rate",
    "fit_power_rate",
    "gap_sequence",
    "kl_rate_constants",
    "inexact_rate_constant",
    "svrg_theoretical_d",
    "linear_rate_bound",
    "quadratic_kl_calibration",
    "reference_inner_probe",
    "format_report",
    "parse_report",
]


@dataclass(frozen=True)
class KLParameters:
    """Exponent ``theta`` and coefficient ``c`` of ``phi(t) = (c/theta) t^theta``."""

    theta: float
    c: float

    def __post_init__(self):
        if not 0 < self.theta <= 1:
            raise ValueError("theta must lie in (0, 1]")
        if not self.c > 0:
            raise ValueError("c must be positive")


@dataclass(frozen=True)
class RateFit:
    model: str
    parameter: float
    r_squared: float
    tail_start: int


def residual_bound(L, eta, y, x):
    """``(L + 1/eta) ||y - x||``, an upper bound on ``dist(0, dF(x))`` when
    ``x`` is the prox-gradient step from ``y``."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    d = np.asarray(y, dtype=np.float64) - np.asarray(x, dtype=np.float64)
    return (L + 1.0 / eta) * float(np.linalg.norm(d))


def kkt_residual_nonneg(grad, x):
    """Criticality measure for ``min f`` over ``x >= 0`` (max-norm).

    Zero exactly when ``grad_i = 0`` on the support and ``grad_i >= 0`` on
    the zero set.
    """
    x = as_vector(x)
    grad = as_vector(grad, x.size)
    if np.any(x < 0):
        raise ValueError("x is infeasible (negative entries)")
    viol = np.where(x > 0, np.abs(grad), np.maximum(0.0, -grad))
    return float(viol.max()) if viol.size else 0.0


def kkt_residual_nonneg_ball(grad, x, radius=1.0, tol=1e-10):
    """``dist(0, grad + N_C(x))`` for ``C = {x >= 0, ||x|| <= radius}`` (2-norm).

    When the ball constraint is inactive this is the 2-norm version of
    :func:`kkt_residual_nonneg`. On the sphere the normal cone gains the
    direction ``x``; its optimal weight is ``max(0, -<grad, x>) / ||x||^2``
    since ``x`` vanishes on the zero set.
    """
    x = as_vector(x)
    grad = as_vector(grad, x.size)
    nx = np.linalg.norm(x)
    if np.any(x < 0) or nx > radius * (1 + tol):
        raise ValueError("x is infeasible")
    support = x > 0
    r = np.where(support, grad, np.minimum(grad, 0.0))
    if nx >= radius * (1 - tol) and nx > 0:
        mu = max(0.0, -float(grad @ x)) / nx**2
        r = np.where(support, grad + mu * x, r)
    return float(np.linalg.norm(r))


def criticality(obj, x):
    """KKT residual of ``obj`` at ``x`` when ``g`` is a supported indicator."""
    g = obj.nonsmooth
    grad = obj.grad(x)
    if isinstance(g, NonnegBallIndicator):
        return kkt_residual_nonneg_ball(grad, x, g.radius)
    if isinstance(g, NonnegIndicator):
        return kkt_residual_nonneg(grad, x)
    if isinstance(g, ZeroFunction):
        return float(np.linalg.norm(grad))
    raise NotImplementedError(f"no criticality measure for {type(g).__name__}")


def descent_lemma_check(obj, y, eta, slack=1e-10):
    """Check ``F(x) <= F(y) - (1/(2 eta) - L/2) ||x - y||^2`` for the
    prox-gradient step ``x`` from ``y``."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    y = as_vector(y, obj.dim)
    x = prox_gradient_step(obj, y, eta)
    lhs = obj.F(x)
    rhs = obj.F(y) - (0.5 / eta - 0.5 * obj.lipschitz) * float(np.sum((x - y) ** 2))
    return {"lhs": lhs, "rhs": rhs, "holds": bool(lhs <= rhs + slack), "x": x}


def _tail(r, tail_fraction):
    r = np.asarray(r, dtype=np.float64)
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    start = int(np.floor(r.size * (1 - tail_fraction)))
    tail = r[start:]
    if tail.size < 5:
        raise ValueError("need at least 5 points in the fitted tail")
    if np.any(~(tail > 0)):
        raise ValueError("rate fit needs strictly positive values")
    return start, tail


def _linfit(t, logr):
    slope, icpt = np.polyfit(t, logr, 1)
    resid = logr - (slope * t + icpt)
    ss_tot = float(np.sum((logr - logr.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return slope, min(max(r2, 0.0), 1.0)


def fit_linear_rate(r, tail_fraction=0.5):
    """Fit ``r_k ~ C rho^k`` on the tail by least squares in ``log r``.

    ``r[j]`` is taken as ``r_k`` with ``k = j`` (any index shift only moves
    the intercept).
    """
    start, tail = _tail(r, tail_fraction)
    k = np.arange(start, start + tail.size, dtype=np.float64)
    slope, r2 = _linfit(k, np.log(tail))
    return RateFit("linear", float(np.exp(slope)), r2, start)


def fit_power_rate(r, tail_fraction=0.5):
    """Fit ``r_k ~ C k^(-p)`` on the tail; ``r[j]`` is ``r_k`` at ``k = j + 1``."""
    start, tail = _tail(r, tail_fraction)
    k = np.arange(start + 1, start + 1 + tail.size, dtype=np.float64)
    slope, r2 = _linfit(np.log(k), np.log(tail))
    return RateFit("power", float(-slope), r2, start)


def gap_sequence(F_values, F_star, rel_floor=100 * np.finfo(float).eps):
    """``F_k - F*`` truncated before the first value lost in rounding noise."""
    r = np.asarray(F_values, dtype=np.float64) - F_star
    floor = rel_floor * abs(F_star)
    bad = np.flatnonzero(~(r > floor))
    return r if bad.size == 0 else r[: bad[0]]


def kl_rate_constants(L, eta, kl, r_k0=None):
    """Rate constants ``d1`` and ``d2`` of APGnc under the KL property.

    ``d1 = (1/eta + L)^2 / (1/(2 eta) - L/2)``. ``d2`` is the minimum of
    ``1/(2 c d1)`` and ``c/(1-2 theta) (2^((2 theta-1)/(2 theta-2)) - 1) r_k0^(2 theta-1)``
    for ``theta < 1/2``; otherwise only the first branch is reported.
    """
    denom = 0.5 / eta - 0.5 * L
    if not denom > 0:
        raise DomainError("need eta < 1/L")
    d1 = (1.0 / eta + L) ** 2 / denom
    first = 1.0 / (2.0 * kl.c * d1)
    if kl.theta < 0.5:
        if r_k0 is None or not r_k0 > 0:
            raise ValueError("r_k0 > 0 is required when theta < 1/2")
        th = kl.theta
        second = (kl.c / (1 - 2 * th)) * (2.0 ** ((2 * th - 1) / (2 * th - 2)) - 1.0) \
            * r_k0 ** (2 * th - 1)
        d2 = min(first, second)
    else:
        d2 = first
    return {"d1": d1, "d2": d2}


def inexact_rate_constant(L, eta, C):
    """``d1`` with the perturbation constant ``C`` of the inexact analysis."""
    if C < 0:
        raise ValueError("C must be nonnegative")
    denom = 0.5 / eta - 0.5 * L - C
    if not denom > 0:
        raise DomainError("need eta < 1/(2C + L)")
    return (1.0 / eta + L + C) ** 2 / denom


def svrg_theoretical_d(L, eta, m, c, alpha=None):
    """Linear-rate constant ``d`` of SVRG-APGnc and the contraction ``d/(d+1)``.

    ``alpha=None`` gives the exact-prox constant; a number gives the
    inexact one.
    """
    if alpha is None:
        denom = 0.5 / eta - L
        num = c**2 * (L + 1.0 / eta) ** 2 + eta * L**2 * m
    else:
        if alpha < 0:
            raise ValueError("alpha must be nonnegative")
        denom = 0.5 / eta - L - alpha
        num = c**2 * (L + 1.0 / eta) ** 2 + 2.0 * eta * L**2 * m + 0.5 / eta
    if not denom > 0:
        raise DomainError("denominator is not positive")
    d = num / denom
    return {"d": d, "contraction": d / (d + 1.0)}


def linear_rate_bound(L, eta, c):
    """Contraction ``c^2 d1 / (1 + c^2 d1)`` predicted for ``theta`` in [1/2, 1)."""
    d1 = kl_rate_constants(L, eta, KLParameters(0.5, c))["d1"]
    return c**2 * d1 / (1.0 + c**2 * d1)


def quadratic_kl_calibration(lambda_min):
    """KL pair used for strongly convex quadratics: ``theta=1/2, c=1/sqrt(2 lambda_min)``."""
    return KLParameters(0.5, 1.0 / np.sqrt(2.0 * lambda_min))


def reference_inner_probe(obj, x, eta):
    """Full-gradient prox step from ``x`` (the analysis-only reference point)."""
    return prox_gradient_step(obj, as_vector(x, obj.dim), eta)


def format_report(metrics):
    """One ``name=value`` line per metric; floats with 17 significant digits."""
    lines = []
    for key, val in metrics.items():
        if isinstance(val, (bool, np.bool_)):
            s = "true" if val else "false"
        elif isinstance(val, (float, np.floating)):
            s = f"{float(val):.17g}"
        else:
            s = str(val)
        if "=" in key or "\n" in key or "\n" in s:
            raise ValueError(f"cannot serialize metric {key!r}")
        lines.append(f"{key}={s}")
    return "\n".join(lines) + "\n"


def parse_report(text):
    out = {}
    for line in text.splitlines():
        if line.strip():
            key, _, val = line.partition("=")
            out[key] = val
    return out
