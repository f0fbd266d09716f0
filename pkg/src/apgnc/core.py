"""Composite objectives ``F = f + g`` and the oracles that define them.

Vectors are plain one-dimensional ``float64`` numpy arrays. The smooth part
follows the finite-sum convention ``f = (1/n) * sum_i f_i``.
"""

import numpy as np

__all__ = [
    "DimensionError",
    "DivergenceError",
    "DomainError",
    "UnsupportedModeError",
    "as_vector",
    "make_rng",
    "SmoothOracle",
    "FiniteSumSmooth",
    "NonsmoothOracle",
    "ZeroFunction",
    "CompositeObjective",
    "eval_F",
    "mean_gradient_check",
    "finite_diff_gradient",
]


class DimensionError(ValueError):
    pass


class DivergenceError(ArithmeticError):
    """A solver produced a non-finite objective value."""


class DomainError(ValueError):
    """A formula was evaluated outside the region where it is defined."""


class UnsupportedModeError(ValueError):
    pass


def as_vector(x, dim=None):
    """Return ``x`` as a finite 1-D float64 array, checking its length."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {x.shape}")
    if dim is not None and x.shape[0] != dim:
        raise DimensionError(f"expected dimension {dim}, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("vector has non-finite entries")
    return x


def make_rng(seed, *keys):
    """PCG64 generator seeded from ``(seed, *keys)``.

    Every random stream in the package goes through here, so a run is fully
    determined by its integer seed. Keys let independent streams (per
    iteration, per inner step) be derived without sharing state.
    """
    seed = int(seed)
    if seed < 0 or any(int(k) < 0 for k in keys):
        raise ValueError("seeds must be non-negative integers")
    ss = np.random.SeedSequence([seed, *(int(k) for k in keys)])
    return np.random.Generator(np.random.PCG64(ss))


class SmoothOracle:
    """Interface for the smooth part ``f``.

    Subclasses provide ``value``, ``gradient``, ``component_gradient`` and the
    attributes ``n_components`` and ``lipschitz``.
    """

    n_components = 1
    lipschitz = 1.0

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def component_gradient(self, i, x):
        if self.n_components == 1 and i == 0:
            return self.gradient(x)
        raise NotImplementedError


class FiniteSumSmooth(SmoothOracle):
    """Smooth oracle assembled from plain callables.

    Parameters
    ----------
    value, gradient : callable
        ``x -> f(x)`` and ``x -> grad f(x)``.
    lipschitz : float
        Lipschitz constant of the gradient.
    component_gradient : callable, optional
        ``(i, x) -> grad f_i(x)`` for ``i`` in ``range(n_components)``. When
        omitted, ``f`` is treated as a single component.
    """

    def __init__(self, value, gradient, lipschitz, component_gradient=None,
                 n_components=1):
        if lipschitz <= 0:
            raise ValueError("lipschitz must be positive")
        self._value = value
        self._gradient = gradient
        self._component = component_gradient
        self.lipschitz = float(lipschitz)
        self.n_components = int(n_components) if component_gradient else 1

    def value(self, x):
        return float(self._value(x))

    def gradient(self, x):
        return np.asarray(self._gradient(x), dtype=np.float64)

    def component_gradient(self, i, x):
        if not 0 <= i < self.n_components:
            raise IndexError(f"component index {i} out of range")
        if self._component is None:
            return self.gradient(x)
        return np.asarray(self._component(i, x), dtype=np.float64)


class NonsmoothOracle:
    """Interface for the nonsmooth part ``g``.

    ``value`` may return ``inf``; ``prox(y, eta)`` returns a minimizer of
    ``g(z) + ||z - y||^2 / (2 eta)``. ``is_indicator`` marks indicator
    functions, whose prox is a projection that ignores ``eta``.
    """

    is_convex = True
    is_indicator = False

    def value(self, x):
        raise NotImplementedError

    def prox(self, y, eta):
        raise NotImplementedError

    def __call__(self, x):
        return self.value(x)


class ZeroFunction(NonsmoothOracle):
    def value(self, x):
        return 0.0

    def prox(self, y, eta):
        return np.array(y, dtype=np.float64)


class CompositeObjective:
    """``F = f + g`` over ``R^dim``."""

    def __init__(self, smooth, nonsmooth=None, dim=None, name="composite"):
        self.smooth = smooth
        self.nonsmooth = nonsmooth if nonsmooth is not None else ZeroFunction()
        if dim is None or dim < 1:
            raise ValueError("dim must be a positive integer")
        self.dim = int(dim)
        self.name = name

    @property
    def lipschitz(self):
        return self.smooth.lipschitz

    @property
    def n_components(self):
        return self.smooth.n_components

    def F(self, x):
        g = self.nonsmooth.value(x)
        if g == np.inf:
            return np.inf
        return self.smooth.value(x) + g

    def grad(self, x):
        return self.smooth.gradient(x)

    def prox(self, y, eta):
        return self.nonsmooth.prox(y, eta)


def eval_F(obj, x):
    """Objective value ``f(x) + g(x)``; ``inf`` when ``x`` is infeasible."""
    x = as_vector(x, obj.dim)
    return obj.F(x)


def mean_gradient_check(obj, x):
    """Max-abs deviation between the component-gradient mean and ``grad f``."""
    x = as_vector(x, obj.dim)
    sm = obj.smooth
    n = sm.n_components
    if n < 1:
        raise ValueError("objective has no components")
    total = np.zeros(obj.dim)
    for i in range(n):
        total += sm.component_gradient(i, x)
    dev = np.max(np.abs(total / n - sm.gradient(x)))
    return {"max_abs_deviation": float(dev)}


def finite_diff_gradient(obj, x, h=1e-6):
    """Central-difference gradient of the smooth part."""
    if h <= 0:
        raise ValueError("h must be positive")
    x = as_vector(x, obj.dim)
    out = np.empty_like(x)
    e = np.zeros_like(x)
    for i in range(x.size):
        e[i] = h
        out[i] = (obj.smooth.value(x + e) - obj.smooth.value(x - e)) / (2 * h)
        e[i] = 0.0
    return out
