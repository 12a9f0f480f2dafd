"""Greedy subproblem: pick the direction ``w`` whose activation ``g(Q w)``
best aligns with the current residual ``r``.

Two criteria are available, both invariant to positive rescaling of ``w``
for positively homogeneous activations, and maximized over the unit sphere:

``correlation`` (default)
    J(w) = |(r, g(Qw))| / ||Qw||, the residual correlation per unit
    direction.  Since Q is orthonormal, ||Qw|| = ||w|| = 1 on the sphere.
``cosine``
    J(w) = |(r, g(Qw))| / ||g(Qw)||, the cosine of the angle between the
    new neuron and the residual.

The cosine form rewards neurons with small support, which makes each greedy
step much less effective: on x^2 it loses the fourfold error reduction per
neuron that the correlation form achieves.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NoAscent, NotReLU

ZERO_GUARD = 1e-14
CRITERIA = ("correlation", "cosine")


@dataclass(frozen=True)
class Activation:
    """Pointwise nonlinearity with its (sub)derivative."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    slope: Optional[float] = None

    def __call__(self, z):
        return self.fn(z)

    @property
    def is_relu(self):
        return self.name == "relu"

    def spec(self):
        """Serializable identifier, inverse of :func:`activation_from_spec`."""
        if self.name == "leaky_relu":
            return f"leaky_relu:{self.slope!r}"
        if self.name in ("relu", "identity"):
            return self.name
        raise ValueError(f"custom activation {self.name!r} cannot be serialized")


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_deriv(z):
    # subgradient 0 at the kink
    return (z > 0).astype(float)


RELU = Activation("relu", _relu, _relu_deriv)
IDENTITY = Activation("identity", lambda z: np.array(z, dtype=float), np.ones_like)


def leaky_relu(slope):
    slope = float(slope)
    return Activation(
        "leaky_relu",
        lambda z: np.where(z > 0, z, slope * z),
        lambda z: np.where(z > 0, 1.0, slope),
        slope=slope,
    )


def custom_activation(name, fn, deriv):
    return Activation(name, fn, deriv)


def activation_from_spec(spec):
    if spec == "relu":
        return RELU
    if spec == "identity":
        return IDENTITY
    if spec.startswith("leaky_relu:"):
        return leaky_relu(float(spec.split(":", 1)[1]))
    raise ValueError(f"unknown activation {spec!r}")


@dataclass(frozen=True)
class SolverConfig:
    restarts: int = 32
    max_iters: int = 500
    seed: int = 0
    tol: float = 1e-12
    degenerate_retries: int = 3
    criterion: str = "correlation"

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise ValueError(f"criterion must be one of {CRITERIA}")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")


@dataclass(frozen=True)
class InnerObjective:
    Q: np.ndarray
    r: np.ndarray
    g: Activation = RELU

    def __post_init__(self):
        rn = np.linalg.norm(self.r)
        if not rn > 0:
            raise ValueError("residual must be nonzero")
        if self.Q.shape[1] and np.max(np.abs(self.Q.T @ self.r)) > 1e-10 * rn:
            raise ValueError("residual is not orthogonal to Q")

    @property
    def r_norm(self):
        return float(np.linalg.norm(self.r))


@dataclass(frozen=True)
class InnerSolution:
    w: np.ndarray
    objective_value: float
    restarts_used: int


def objective(obj, w):
    """Cosine objective J(w); 0 when g(Qw) vanishes."""
    u = obj.g(obj.Q @ np.asarray(w, dtype=float))
    un = np.linalg.norm(u)
    if un < ZERO_GUARD:
        return 0.0
    return float(abs(obj.r @ u) / un)


def objective_correlation(obj, w):
    """|(r, g(Qw))| / ||Qw||."""
    w = np.asarray(w, dtype=float)
    z = obj.Q @ w
    zn = np.linalg.norm(z)
    if zn < ZERO_GUARD:
        return 0.0
    return float(abs(obj.r @ obj.g(z)) / zn)


def objective_relu_simplified(obj, w):
    """ReLU-only form using relu(z) = (z + |z|)/2 and Q^T r = 0."""
    if not obj.g.is_relu:
        raise NotReLU(f"activation is {obj.g.name!r}")
    z = obj.Q @ np.asarray(w, dtype=float)
    un = np.linalg.norm(np.maximum(z, 0.0))
    if un < ZERO_GUARD:
        return 0.0
    return float(abs(obj.r @ np.abs(z)) / (2.0 * un))


# Batched kernels keep one restart per row of W (B x K).  Products go through
# stacked matmuls and reductions run along rows, so every restart is computed
# by exactly the same operations whatever else shares its batch; this is what
# makes results independent of the number of restarts.


def _rownorm(A):
    return np.sqrt(np.sum(A * A, axis=1))


def _apply(M, A):
    """Row-wise ``M @ a`` for every row ``a`` of A."""
    return (M @ A[:, :, None])[:, :, 0]


def _value_and_grad(Q, r, g, W, criterion="cosine"):
    """J and its Euclidean gradient for every row of W."""
    Z = _apply(Q, W)
    U = g(Z)
    D = g.deriv(Z)
    s = np.sum(U * r, axis=1)
    dnum = np.sign(s)[:, None] * _apply(Q.T, D * r)
    if criterion == "correlation":
        den = _rownorm(W)
    else:
        den = _rownorm(U)
    live = den >= ZERO_GUARD
    safe = np.where(live, den, 1.0)
    J = np.where(live, np.abs(s) / safe, 0.0)
    if criterion == "correlation":
        grad = dnum / safe[:, None] - (J / safe**2)[:, None] * W
    else:
        grad = (dnum - (J / safe)[:, None] * _apply(Q.T, D * U)) / safe[:, None]
    grad[~live] = 0.0
    return J, grad


def _value(Q, r, g, W, criterion="cosine"):
    U = g(_apply(Q, W))
    den = _rownorm(W if criterion == "correlation" else U)
    live = den >= ZERO_GUARD
    return np.where(live, np.abs(np.sum(U * r, axis=1)) / np.where(live, den, 1.0), 0.0)


def objective_gradient(obj, w, criterion="cosine"):
    """Euclidean gradient of J at ``w`` (ReLU subgradient 0 at kinks)."""
    w = np.asarray(w, dtype=float)[None, :]
    _, grad = _value_and_grad(obj.Q, obj.r, obj.g, w, criterion)
    return grad[0]


def restart_starts(k, restarts, seed):
    """Uniform starting points on the unit sphere, one row per restart."""
    W = np.empty((restarts, k))
    for i in range(restarts):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        v = rng.standard_normal(k)
        W[i] = v / np.linalg.norm(v)
    return W


def _ascend(Q, r, g, W, max_iters, tol, r_norm, criterion):
    """Projected gradient ascent on the sphere for every row of W.

    Each row takes steps ``w <- normalize(w + eta * t / |r|)`` along the
    tangent part ``t`` of the gradient; ``eta`` is halved until J increases
    and doubled after a success.  A row stops once no step increases J or
    the gain drops below ``tol * |r|``.
    """
    W = W.copy()
    J, grad = _value_and_grad(Q, r, g, W, criterion)
    eta = np.ones(W.shape[0])
    active = np.ones(W.shape[0], dtype=bool)
    for _ in range(max_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Wa = W[idx]
        Ga = grad[idx]
        Ga = (Ga - Wa * np.sum(Wa * Ga, axis=1)[:, None]) / r_norm
        Ja = J[idx]
        ea = eta[idx]
        accepted = np.zeros(idx.size, dtype=bool)
        Wnew = Wa.copy()
        Jnew = Ja.copy()
        todo = np.any(Ga != 0.0, axis=1)
        for _ in range(60):
            t = np.flatnonzero(todo)
            if t.size == 0:
                break
            trial = Wa[t] + ea[t, None] * Ga[t]
            trial /= _rownorm(trial)[:, None]
            Jt = _value(Q, r, g, trial, criterion)
            ok = Jt > Ja[t]
            acc = t[ok]
            Wnew[acc] = trial[ok]
            Jnew[acc] = Jt[ok]
            accepted[acc] = True
            todo[acc] = False
            ea[t[~ok]] *= 0.5
        W[idx] = Wnew
        eta[idx] = np.where(accepted, np.minimum(ea * 2.0, 1e3), ea)
        done = ~accepted | (Jnew - Ja < tol * r_norm)
        active[idx[done]] = False
        upd = idx[accepted]
        if upd.size:
            J[upd], grad[upd] = _value_and_grad(Q, r, g, W[upd], criterion)
    return W, J


def maximize(obj, cfg=SolverConfig()):
    """Multi-start maximization of ``cfg.criterion`` over the unit sphere.

    Restart ``i`` starts from a point drawn with ``SeedSequence(cfg.seed,
    spawn_key=(i,))``; the best restart wins, ties go to the lower index.
    """
    Q = np.asarray(obj.Q, dtype=float)
    r = np.asarray(obj.r, dtype=float)
    r_norm = obj.r_norm
    W0 = restart_starts(Q.shape[1], cfg.restarts, cfg.seed)
    W, J = _ascend(Q, r, obj.g, W0, cfg.max_iters, cfg.tol, r_norm, cfg.criterion)
    best = int(np.argmax(J))
    if J[best] < ZERO_GUARD * r_norm:
        raise NoAscent(f"all {cfg.restarts} restarts ended with J < {ZERO_GUARD:g}*|r|")
    w = W[best] / np.linalg.norm(W[best])
    return InnerSolution(w=w, objective_value=float(J[best]), restarts_used=cfg.restarts)
