"""Benchmark problem generators.

All generators are pure functions of their seed. Component functions are
scaled so that ``f = (1/n) * sum_i f_i`` holds exactly.
"""

from dataclasses import dataclass

import numpy as np

from .core import CompositeObjective, SmoothOracle, ZeroFunction, make_rng
from .prox import NonnegBallIndicator, NonnegIndicator

__all__ = [
    "PowerIterationError",
    "power_iteration",
    "NnpcaInstance",
    "NnpcaSmooth",
    "nnpca_lipschitz",
    "nnpca_objective",
    "generate_nnpca",
    "save_nnpca",
    "load_nnpca",
    "random_feasible_point",
    "quadratic_problem",
    "quartic_problem",
]


class PowerIterationError(ArithmeticError):
    pass


def power_iteration(apply, dim, tol=1e-12, seed=0, max_iter=10000):
    """Largest eigenvalue of a symmetric PSD operator.

    Parameters
    ----------
    apply : callable
        ``v -> A @ v``.
    dim : int
        Size of ``A``.
    tol : float
        Stop when successive Rayleigh quotients agree to relative ``tol``.

    Returns
    -------
    float
        Estimate of ``lambda_max(A)``; ``0.0`` for the zero operator.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    v = make_rng(seed).standard_normal(dim)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = apply(v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        lam_new = float(v @ w)
        v = w / nw
        if abs(lam_new - lam) <= tol * abs(lam_new):
            return lam_new
        lam = lam_new
    raise PowerIterationError(f"power iteration did not converge in {max_iter} steps")


@dataclass(frozen=True)
class NnpcaInstance:
    """Unit-norm samples ``Z`` (one per row), regularizer ``gamma`` and ``L``."""

    Z: np.ndarray
    gamma: float
    L: float

    @property
    def n(self):
        return self.Z.shape[0]

    @property
    def d(self):
        return self.Z.shape[1]


class NnpcaSmooth(SmoothOracle):
    """``f(x) = -1/2 x'(sum_i z_i z_i')x + gamma ||x||^2``.

    Component ``i`` is ``f_i(x) = -n/2 (z_i'x)^2 + gamma ||x||^2`` so that the
    components average to ``f``.
    """

    def __init__(self, inst):
        self.Z = inst.Z
        self.S = inst.Z.T @ inst.Z
        self.gamma = inst.gamma
        self.n_components = inst.n
        self.lipschitz = inst.L

    def value(self, x):
        return float(-0.5 * (x @ (self.S @ x)) + self.gamma * (x @ x))

    def gradient(self, x):
        return -(self.S @ x) + 2.0 * self.gamma * x

    def component_gradient(self, i, x):
        if not 0 <= i < self.n_components:
            raise IndexError(f"component index {i} out of range")
        z = self.Z[i]
        return -self.n_components * (z @ x) * z + 2.0 * self.gamma * x


def nnpca_lipschitz(Z, gamma, seed=0):
    """``lambda_max(sum_i z_i z_i') + 2 gamma`` by power iteration."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.size == 0:
        raise ValueError("Z must be nonempty")
    S = Z.T @ Z
    return power_iteration(lambda v: S @ v, S.shape[0], tol=1e-12, seed=seed) + 2.0 * gamma


def nnpca_objective(inst, radius=1.0):
    """Composite objective for an instance.

    With ``radius=None`` the constraint is the bare nonnegative orthant,
    on which ``F`` is unbounded below whenever ``lambda_max > 2 gamma``.
    """
    g = NonnegIndicator() if radius is None else NonnegBallIndicator(radius)
    obj = CompositeObjective(NnpcaSmooth(inst), g, inst.d, name="nnpca")
    obj.instance = inst
    return obj


def generate_nnpca(n, d, gamma=1e-3, seed=0, radius=1.0):
    """Random NN-PCA instance with standard normal samples scaled to unit norm.

    Returns
    -------
    (NnpcaInstance, CompositeObjective)
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    Z = make_rng(seed).standard_normal((n, d))
    Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    # L depends on the data only, so a saved and reloaded instance reproduces it
    inst = NnpcaInstance(Z, float(gamma), nnpca_lipschitz(Z, gamma))
    return inst, nnpca_objective(inst, radius)


def save_nnpca(path, inst):
    """Write ``n d gamma`` then one row of ``d`` floats per sample."""
    with open(path, "w", newline="\n") as fh:
        fh.write(f"{inst.n} {inst.d} {inst.gamma:.17g}\n")
        for row in inst.Z:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_nnpca(path):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ValueError(f"{path}: header must be 'n d gamma'")
        n, d, gamma = int(header[0]), int(header[1]), float(header[2])
        Z = np.array([[float(v) for v in line.split()] for line in fh if line.strip()])
    if Z.shape != (n, d):
        raise ValueError(f"{path}: expected {n}x{d} samples, got {Z.shape}")
    # samples are stored already normalized; L is recomputed
    return NnpcaInstance(Z, gamma, nnpca_lipschitz(Z, gamma))


def random_feasible_point(d, seed=0, scale=0.5):
    """Random point of the nonnegative orthant with norm ``scale``."""
    x = np.abs(make_rng(seed, 1).standard_normal(d))
    return scale * x / np.linalg.norm(x)


class _RotatedQuadratic(SmoothOracle):
    def __init__(self, eigs, Q):
        self.eigs = eigs
        self.Q = Q
        self.A = Q.T @ (eigs[:, None] * Q)
        self.n_components = eigs.size
        self.lipschitz = float(eigs.max())

    def value(self, x):
        return float(0.5 * (x @ (self.A @ x)))

    def gradient(self, x):
        return self.A @ x

    def component_gradient(self, i, x):
        if not 0 <= i < self.n_components:
            raise IndexError(f"component index {i} out of range")
        q = self.Q[i]
        return self.n_components * self.eigs[i] * (q @ x) * q


def quadratic_problem(eigs, seed=0, constraint="nonneg"):
    """``f = 1/2 x'Ax`` with ``A = Q' diag(eigs) Q`` for a random orthogonal Q.

    ``constraint`` is ``"nonneg"`` (orthant indicator) or ``None`` (g = 0).
    The minimizer is 0 with ``F* = 0`` either way.
    """
    eigs = np.asarray(eigs, dtype=np.float64).ravel()
    if eigs.size == 0 or np.any(eigs <= 0):
        raise ValueError("eigenvalues must be positive")
    d = eigs.size
    M = make_rng(seed).standard_normal((d, d))
    Q, R = np.linalg.qr(M)
    Q = Q * np.sign(np.diag(R))
    g = NonnegIndicator() if constraint == "nonneg" else ZeroFunction()
    obj = CompositeObjective(_RotatedQuadratic(eigs, Q.T), g, d, name="quadratic")
    obj.F_star = 0.0
    return obj


class _Quartic(SmoothOracle):
    def __init__(self, d, radius):
        self.n_components = d
        self.lipschitz = 12.0 * radius**2

    def value(self, x):
        return float(np.sum(x**4))

    def gradient(self, x):
        return 4.0 * x**3

    def component_gradient(self, i, x):
        if not 0 <= i < self.n_components:
            raise IndexError(f"component index {i} out of range")
        out = np.zeros_like(x)
        out[i] = self.n_components * 4.0 * x[i] ** 3
        return out


def quartic_problem(d, radius=1.0):
    """``f = sum_i x_i^4``, ``g = 0``.

    The gradient is only locally Lipschitz; ``L = 12 radius^2`` is valid on
    the box ``|x_i| <= radius``, which proximal gradient with ``eta < 1/L``
    never leaves when started inside it.
    """
    if d < 1:
        raise ValueError("d must be positive")
    obj = CompositeObjective(_Quartic(int(d), float(radius)), ZeroFunction(), int(d),
                             name="quartic")
    obj.F_star = 0.0
    return obj
