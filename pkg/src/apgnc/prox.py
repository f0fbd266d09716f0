"""Proximal operators, exact and controllably inexact."""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import NonsmoothOracle, UnsupportedModeError, as_vector, make_rng

__all__ = [
    "prox_nonneg",
    "prox_nonneg_ball",
    "prox_l1",
    "NonnegIndicator",
    "NonnegBallIndicator",
    "L1Norm",
    "prox_gradient_step",
    "InexactProxRequest",
    "InexactProx",
    "inexact_prox",
    "prox_gap",
    "subdifferential_perturbation_nonneg",
]

# relative slack when testing feasibility of projected points
_FEAS_TOL = 1e-12


def prox_nonneg(y, eta=1.0):
    """Projection onto the nonnegative orthant (``eta`` is ignored)."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    return np.maximum(np.asarray(y, dtype=np.float64), 0.0)


def prox_nonneg_ball(y, eta=1.0, radius=1.0):
    """Projection onto ``{x >= 0, ||x|| <= radius}``.

    Clipping to the orthant and then rescaling into the ball is exact for
    this intersection: negative coordinates are zero at the optimum, and
    radial scaling keeps the rest nonnegative.
    """
    p = prox_nonneg(y, eta)
    nrm = np.linalg.norm(p)
    if nrm > radius:
        p *= radius / nrm
    return p


def prox_l1(y, eta, lam):
    """Soft thresholding at level ``eta * lam``."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    y = np.asarray(y, dtype=np.float64)
    return np.sign(y) * np.maximum(np.abs(y) - eta * lam, 0.0)


class NonnegIndicator(NonsmoothOracle):
    """Indicator of the nonnegative orthant."""

    is_indicator = True

    def value(self, x):
        return 0.0 if np.all(np.asarray(x) >= 0) else np.inf

    def prox(self, y, eta):
        return prox_nonneg(y, eta)


class NonnegBallIndicator(NonsmoothOracle):
    """Indicator of ``{x >= 0, ||x|| <= radius}``."""

    is_indicator = True

    def __init__(self, radius=1.0):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)

    def value(self, x):
        x = np.asarray(x)
        if np.all(x >= 0) and np.linalg.norm(x) <= self.radius * (1 + _FEAS_TOL):
            return 0.0
        return np.inf

    def prox(self, y, eta):
        return prox_nonneg_ball(y, eta, self.radius)


class L1Norm(NonsmoothOracle):
    """``g(x) = lam * ||x||_1``."""

    def __init__(self, lam=1.0):
        if lam < 0:
            raise ValueError("lam must be nonnegative")
        self.lam = float(lam)

    def value(self, x):
        return self.lam * float(np.sum(np.abs(x)))

    def prox(self, y, eta):
        return prox_l1(y, eta, self.lam)


def prox_gradient_step(obj, y, eta):
    """``prox_{eta g}(y - eta * grad f(y))``."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    return obj.prox(y - eta * obj.grad(y), eta)


@dataclass(frozen=True)
class InexactProxRequest:
    """Target suboptimality ``eps`` for an inexact prox evaluation.

    When ``eps > 0`` the achieved gap is placed in ``[band_floor*eps, eps]``
    so that the inexactness is actually exercised.
    """

    eps: float = 0.0
    band_floor: float = 0.25
    rng_seed: int = 0

    def __post_init__(self):
        if not self.eps >= 0:
            raise ValueError("eps must be nonnegative")
        if not 0 < self.band_floor < 1:
            raise ValueError("band_floor must lie in (0, 1)")


class InexactProx(NamedTuple):
    u: np.ndarray
    achieved_gap: float
    # True when no perturbation reached the requested band and the exact
    # prox point was returned instead
    degenerate: bool = False


def prox_gap(op, y, eta, u, u_star):
    """Suboptimality of ``u`` in the prox subproblem, relative to ``u_star``.

    Written as ``||d||^2 + 2<d, u* - y>`` with ``d = u - u*`` to avoid
    cancellation when the gap is tiny.
    """
    d = u - u_star
    quad = (d @ d + 2.0 * (d @ (u_star - y))) / (2.0 * eta)
    if op.is_indicator:
        return float(quad) if np.isfinite(op.value(u)) else np.inf
    return float(op.value(u) - op.value(u_star) + quad)


def inexact_prox(op, y, eta, req, max_directions=8, max_bisect=64):
    """Return a point of the ``eps``-prox set with a certified gap.

    The exact prox point ``u*`` is moved along a seeded random direction
    (and projected back for indicators); the step length is bisected until
    the gap ``phi(u) - phi(u*)`` lands in ``[band_floor*eps, eps]``, where
    ``phi(z) = g(z) + ||z - y||^2 / (2 eta)``. Since ``u*`` minimizes
    ``phi``, the gap is the exact suboptimality of ``u``.

    Returns
    -------
    InexactProx
        ``(u, achieved_gap, degenerate)``.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    y = as_vector(y)
    u_star = op.prox(y, eta)
    eps = float(req.eps)
    if eps == 0.0:
        return InexactProx(u_star, 0.0, False)
    if not op.is_convex:
        raise UnsupportedModeError("inexact prox with eps > 0 needs convex g")

    floor = req.band_floor * eps
    rng = make_rng(req.rng_seed)
    best_u, best_gap = u_star, 0.0

    def candidate(delta, r):
        z = u_star + delta * r
        if op.is_indicator:
            z = op.prox(z, eta)
        return z, prox_gap(op, y, eta, z, u_star)

    for _ in range(max_directions):
        r = rng.standard_normal(y.size)
        r /= np.linalg.norm(r)
        # exact step length for g = 0; a reasonable first guess otherwise
        delta = np.sqrt(2.0 * eta * eps)
        lo, hi = 0.0, None
        for _ in range(max_bisect):
            u, gap = candidate(delta, r)
            if floor <= gap <= eps:
                return InexactProx(u, gap, False)
            if gap > eps:
                hi = delta
                break
            if gap > best_gap:
                best_u, best_gap = u, gap
            lo = delta
            delta *= 2.0
        if hi is None:
            continue
        for _ in range(max_bisect):
            mid = 0.5 * (lo + hi)
            u, gap = candidate(mid, r)
            if floor <= gap <= eps:
                return InexactProx(u, gap, False)
            if gap > eps:
                hi = mid
            else:
                if gap > best_gap:
                    best_u, best_gap = u, gap
                lo = mid
    return InexactProx(best_u, best_gap, best_gap == 0.0)


def subdifferential_perturbation_nonneg(grad, x, eps, tol=1e-14):
    """Perturbation between the subdifferential and the eps-subdifferential
    of the nonnegative-orthant indicator at a feasible ``x``.

    Picks ``u`` in the eps-subdifferential minimizing ``||grad + u||`` and
    returns its distance to the exact subdifferential. For this set the
    eps-subdifferential is ``{u <= 0 : sum_i x_i * (-u_i) <= eps}``.
    """
    grad = np.asarray(grad, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0):
        raise ValueError("x must be feasible")
    active = x > 0
    # w = -u on the support; w_i in [0, max(grad_i, 0)], budget sum x_i w_i <= eps
    cap = np.where(active, np.maximum(grad, 0.0), 0.0)

    def w_of(mu):
        return np.clip(cap - mu * x, 0.0, cap)

    if x @ cap <= eps:
        w = cap
    else:
        lo, hi = 0.0, float(np.max(cap / np.where(active, x, np.inf)))
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if x @ w_of(mid) > eps:
                lo = mid
            else:
                hi = mid
            if hi - lo <= tol * max(hi, 1.0):
                break
        w = w_of(hi)
    return float(np.linalg.norm(w[active]))
