"""Random-initialization baseline: the same Axon computation graph trained
end to end by gradient descent, keeping the best of several restarts.

``R`` comes from the QR of the initial features and stays fixed; the trained
parameters are ``w_k``, ``alpha_k``, ``beta_k`` and ``c``.  Gradients are
computed by a hand-written reverse pass over the fixed graph.  All restarts
are stacked along a leading batch axis and advanced together; ``np.matmul``
handles each batch slice separately, so a restart's trajectory does not
depend on which other restarts share its batch.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.linalg import solve_triangular

from . import linalg
from .core import AxonModel, Step, build_initial_basis
from .errors import AllDiverged, NumericalBlowup
from .inner_opt import RELU

BETA_MIN = 1e-6
OPTIMIZERS = ("adam", "gd")


@dataclass(frozen=True)
class BaselineConfig:
    restarts: int = 20
    epochs: int = 20000
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    init_scale: float = 1.0
    seed: int = 0
    batch_size: Optional[int] = None
    backtracking: bool = False

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.backtracking and (self.optimizer != "gd" or self.batch_size is not None):
            raise ValueError("backtracking needs full-batch plain gradient descent")


class Layout:
    """Offsets of each parameter block inside a flat parameter vector."""

    def __init__(self, d, K):
        self.d, self.K = d, K
        d1 = d + 1
        off = 0
        self.w, self.alpha = [], []
        for k in range(K):
            m = d1 + k
            self.w.append(slice(off, off + m))
            self.alpha.append(slice(off + m, off + 2 * m))
            off += 2 * m
        self.beta = slice(off, off + K)
        off += K
        self.c = slice(off, off + d1 + K)
        self.size = off + d1 + K


def pack(model):
    lay = Layout(model.d, model.K)
    theta = np.empty(lay.size)
    for k, st in enumerate(model.steps):
        theta[lay.w[k]] = st.w
        theta[lay.alpha[k]] = st.alpha
        theta[lay.beta.start + k] = st.beta
    theta[lay.c] = model.c
    return lay, theta


def unpack(lay, theta, R):
    steps = tuple(
        Step(theta[lay.w[k]].copy(), theta[lay.alpha[k]].copy(), float(theta[lay.beta.start + k]))
        for k in range(lay.K)
    )
    return AxonModel(lay.d, R, steps, theta[lay.c].copy(), RELU)


def initial_features(R, X):
    """``[1, x]`` mapped through ``R^{-T}``, shape (n, d+1)."""
    return solve_triangular(R, build_initial_basis(X).T, trans="T", lower=False).T


def _batched_loss_and_grad(theta, lay, V0, y, want_grad=True):
    """Mean squared error and its gradient for every row of ``theta`` (B x P)."""
    B = theta.shape[0]
    n, d1 = V0.shape
    M = d1 + lay.K
    # feature-major so every prefix F[:, :m] is a contiguous block
    F = np.empty((B, M, n))
    F[:, :d1] = V0.T
    beta = theta[:, lay.beta]
    Z = []
    for k in range(lay.K):
        m = d1 + k
        V = F[:, :m]
        z = (theta[:, None, lay.w[k]] @ V)[:, 0]
        t = (theta[:, None, lay.alpha[k]] @ V)[:, 0]
        F[:, m] = (np.maximum(z, 0.0) - t) / beta[:, k, None]
        Z.append(z)
    c = theta[:, lay.c]
    res = (c[:, None, :] @ F)[:, 0] - y
    loss = np.mean(res * res, axis=1)
    if not want_grad:
        return loss, None
    grad = np.empty_like(theta)
    gres = (2.0 / n) * res
    grad[:, lay.c] = (F @ gres[:, :, None])[:, :, 0]
    # rows 2j, 2j+1 hold w_j and alpha_j zero-padded to M columns
    WA = np.zeros((B, 2 * lay.K, M))
    for j in range(lay.K):
        WA[:, 2 * j, : d1 + j] = theta[:, lay.w[j]]
        WA[:, 2 * j + 1, : d1 + j] = theta[:, lay.alpha[j]]
    # upstream signals dL/dz_j and dL/dt_j, same row order as WA
    DZ = np.empty((B, 2 * lay.K, n))
    for k in reversed(range(lay.K)):
        m = d1 + k
        later = slice(2 * k + 2, 2 * lay.K)
        gk = c[:, m, None] * gres + (WA[:, None, later, m] @ DZ[:, later])[:, 0]
        bk = beta[:, k, None]
        grad[:, lay.beta.start + k] = -np.sum(gk * F[:, m], axis=1) / beta[:, k]
        DZ[:, 2 * k] = np.where(Z[k] > 0, gk / bk, 0.0)
        DZ[:, 2 * k + 1] = -gk / bk
        gw = F[:, :m] @ DZ[:, 2 * k : 2 * k + 2].transpose(0, 2, 1)
        grad[:, lay.w[k]] = gw[:, :, 0]
        grad[:, lay.alpha[k]] = gw[:, :, 1]
    return loss, grad


@dataclass
class Gradients:
    w: List[np.ndarray]
    alpha: List[np.ndarray]
    beta: np.ndarray
    c: np.ndarray


def loss_and_grad(model, data):
    """MSE of ``model`` on ``data`` and its gradient w.r.t. w, alpha, beta, c.

    ``model.R`` is treated as a constant.
    """
    if any(not st.beta > 0 for st in model.steps):
        raise ValueError("beta must be positive")
    lay, theta = pack(model)
    V0 = initial_features(model.R, data.X)
    with np.errstate(over="ignore", invalid="ignore"):
        loss, grad = _batched_loss_and_grad(theta[None, :], lay, V0, data.y)
    loss, grad = float(loss[0]), grad[0]
    if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
        raise NumericalBlowup("non-finite loss or gradient")
    return loss, Gradients(
        w=[grad[s] for s in lay.w],
        alpha=[grad[s] for s in lay.alpha],
        beta=grad[lay.beta],
        c=grad[lay.c],
    )


def random_init(lay, cfg, restart):
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(restart,)))
    theta = np.empty(lay.size)
    for k in range(lay.K):
        w = rng.standard_normal(lay.w[k].stop - lay.w[k].start)
        theta[lay.w[k]] = w / np.linalg.norm(w)
        theta[lay.alpha[k]] = rng.normal(0.0, cfg.init_scale, lay.alpha[k].stop - lay.alpha[k].start)
    theta[lay.beta] = 1.0
    theta[lay.c] = rng.normal(0.0, cfg.init_scale, lay.c.stop - lay.c.start)
    return theta


def _project(theta, lay):
    for s in lay.w:
        nrm = np.linalg.norm(theta[:, s], axis=1, keepdims=True)
        theta[:, s] /= np.where(nrm > 0, nrm, 1.0)
    np.maximum(theta[:, lay.beta], BETA_MIN, out=theta[:, lay.beta])
    return theta


def _optimize(theta, lay, V0, y, cfg, record_history=False):
    """Run ``cfg.epochs`` of updates on a stack of restarts.

    Returns final parameters, final full-batch losses (nan where diverged) and
    optionally the full-batch loss history, shape (B, epochs + 1).
    """
    B = theta.shape[0]
    n = V0.shape[0]
    full_batch = cfg.batch_size is None
    alive = np.ones(B, dtype=bool)
    history = np.full((B, cfg.epochs + 1), np.nan) if record_history else None
    m1 = np.zeros_like(theta)
    m2 = np.zeros_like(theta)
    lr = np.full(B, cfg.learning_rate)
    b1, b2, eps = 0.9, 0.999, 1e-8
    step = 0
    shuffle_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(2**31,)))
    for epoch in range(cfg.epochs):
        if not alive.any():
            break
        if full_batch:
            batches = [slice(None)]
        else:
            perm = shuffle_rng.permutation(n)
            batches = [perm[i : i + cfg.batch_size] for i in range(0, n, cfg.batch_size)]
            if record_history:
                history[:, epoch] = _batched_loss_and_grad(theta, lay, V0, y, want_grad=False)[0]
        for idx in batches:
            a = np.flatnonzero(alive)
            th = theta[a]
            cur, grad = _batched_loss_and_grad(th, lay, V0[idx], y[idx])
            if full_batch and record_history:
                history[a, epoch] = cur
            bad = ~(np.isfinite(cur) & np.all(np.isfinite(grad), axis=1))
            if cfg.optimizer == "adam":
                step += 1
                m1[a] = b1 * m1[a] + (1 - b1) * grad
                m2[a] = b2 * m2[a] + (1 - b2) * grad * grad
                mhat = m1[a] / (1 - b1**step)
                vhat = m2[a] / (1 - b2**step)
                new = _project(th - cfg.learning_rate * mhat / (np.sqrt(vhat) + eps), lay)
            elif not cfg.backtracking:
                new = _project(th - lr[a, None] * grad, lay)
            else:
                new = th.copy()
                todo = ~bad
                la = lr[a]
                for _ in range(40):
                    if not todo.any():
                        break
                    t = np.flatnonzero(todo)
                    trial = _project(th[t] - la[t, None] * grad[t], lay)
                    tl, _ = _batched_loss_and_grad(trial, lay, V0, y, want_grad=False)
                    ok = tl <= cur[t]
                    new[t[ok]] = trial[ok]
                    todo[t[ok]] = False
                    la[t[~ok]] *= 0.5
                lr[a] = np.where(todo, la, np.minimum(la * 2.0, cfg.learning_rate))
            theta[a[~bad]] = new[~bad]
            alive[a[bad]] = False
    loss, _ = _batched_loss_and_grad(theta, lay, V0, y, want_grad=False)
    alive &= np.isfinite(loss)
    loss = np.where(alive, loss, np.nan)
    if record_history:
        history[:, cfg.epochs] = loss
    return theta, loss, history


@dataclass
class BaselineResult:
    best_model: AxonModel
    best_restart: int
    per_restart_losses: List[float]
    diverged: List[int]
    history: Optional[np.ndarray] = None

    @property
    def best_loss(self):
        return self.per_restart_losses[self.best_restart]


def _threads():
    try:
        return max(1, int(os.environ.get("AXON_THREADS", "1")))
    except ValueError:
        return 1


def train_random_init(data, K, cfg=BaselineConfig(), record_history=False):
    """Best-of-``cfg.restarts`` end-to-end training of a K-neuron network.

    Restart ``i`` is initialized from ``SeedSequence(cfg.seed, spawn_key=(i,))``.
    Restarts whose loss turns non-finite are reported in ``diverged`` and
    never selected.
    """
    if K < 0:
        raise ValueError("K must be non-negative")
    R = linalg.thin_qr(build_initial_basis(data.X)).R
    lay = Layout(data.d, K)
    V0 = initial_features(R, data.X)
    theta0 = np.stack([random_init(lay, cfg, i) for i in range(cfg.restarts)])
    chunks = np.array_split(np.arange(cfg.restarts), min(_threads(), cfg.restarts))

    def run(ix):
        # blow-ups are detected and reported per restart, so silence numpy's warnings
        with np.errstate(over="ignore", invalid="ignore"):
            return _optimize(theta0[ix].copy(), lay, V0, data.y, cfg, record_history)

    if len(chunks) == 1:
        parts = [run(chunks[0])]
    else:
        with ThreadPoolExecutor(len(chunks)) as pool:
            parts = list(pool.map(run, chunks))
    theta = np.concatenate([p[0] for p in parts])
    losses = np.concatenate([p[1] for p in parts])
    history = np.concatenate([p[2] for p in parts]) if record_history else None
    diverged = [int(i) for i in np.flatnonzero(~np.isfinite(losses))]
    if len(diverged) == cfg.restarts:
        raise AllDiverged(f"all {cfg.restarts} restarts produced non-finite losses")
    # lowest loss, ties to the lowest restart index
    best = int(np.nanargmin(losses))
    return BaselineResult(
        best_model=unpack(lay, theta[best], R),
        best_restart=best,
        per_restart_losses=[float(v) for v in losses],
        diverged=diverged,
        history=history,
    )
