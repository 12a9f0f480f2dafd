"""Greedy growth of an Axon network and inference with the trained parameters.

Training keeps an orthonormal basis ``Q`` of the neuron values at the
training points.  Each iteration picks a unit direction ``w`` in the current
orthonormal coordinates, forms the new neuron ``g(Q w)``, orthogonalizes it
against ``Q`` and appends it.  Inference replays the same transformation on
a fresh input, so the orthonormal features of a training point are exactly
its row of ``Q``.
"""

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List

import numpy as np
from scipy.linalg import solve_triangular

from . import linalg
from .errors import DegenerateDirection, ModelCorrupt, NoAscent, SchemaError
from .inner_opt import RELU, Activation, InnerObjective, SolverConfig, activation_from_spec, maximize

FORMAT_VERSION = 1
RESIDUAL_STOP = 1e-13


@dataclass(frozen=True)
class TrainingSet:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if X.shape[0] < X.shape[1] + 2:
            raise ValueError(f"need at least d+2={X.shape[1] + 2} samples, got {X.shape[0]}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("training data must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def d(self):
        return self.X.shape[1]

    @property
    def n(self):
        return self.X.shape[0]


@dataclass(frozen=True)
class Step:
    w: np.ndarray
    alpha: np.ndarray
    beta: float


@dataclass(frozen=True)
class AxonModel:
    """Trained parameters.

    ``c`` holds output weights in the orthonormal coordinates, one per
    feature: ``d + 1`` initial features followed by one per grown neuron.
    """

    d: int
    R: np.ndarray
    steps: tuple
    c: np.ndarray
    activation: Activation = RELU

    @property
    def K(self):
        return len(self.steps)

    def truncated(self, k):
        """Model built from the first ``k`` neurons.

        The basis is nested and ``c = Q^T y``, so this is exactly what
        training with ``K = k`` would have returned.
        """
        if not 0 <= k <= self.K:
            raise ValueError(f"k must be in [0, {self.K}]")
        return AxonModel(self.d, self.R, self.steps[:k], self.c[: self.d + 1 + k], self.activation)

    def validate(self):
        d = self.d
        if self.R.shape != (d + 1, d + 1):
            raise ModelCorrupt(f"R has shape {self.R.shape}, expected {(d + 1, d + 1)}")
        if np.any(np.diag(self.R) <= 0):
            raise ModelCorrupt("R must have a positive diagonal")
        for k, st in enumerate(self.steps):
            m = d + 1 + k
            if st.w.shape != (m,) or st.alpha.shape != (m,):
                raise ModelCorrupt(f"step {k}: w/alpha must have length {m}")
            if not st.beta > 0:
                raise ModelCorrupt(f"step {k}: beta must be positive, got {st.beta}")
        if self.c.shape != (d + 1 + self.K,):
            raise ModelCorrupt(f"c has length {self.c.shape[0]}, expected {d + 1 + self.K}")


@dataclass(frozen=True)
class IterationRecord:
    k: int
    objective_value: float
    beta: float
    train_rel_l2: float
    eval_rel_l2: float


@dataclass
class TrainReport:
    initial_train_rel_l2: float
    initial_eval_rel_l2: float
    records: List[IterationRecord] = field(default_factory=list)
    stop_reason: str = "completed"
    max_ortho_error: float = 0.0

    def train_errors(self):
        """Train rel L2 indexed by number of neurons, K = 0..len(records)."""
        return [self.initial_train_rel_l2] + [r.train_rel_l2 for r in self.records]

    def eval_errors(self):
        return [self.initial_eval_rel_l2] + [r.eval_rel_l2 for r in self.records]


def build_initial_basis(X):
    """Initial features ``[1, x_1, ..., x_d]`` (ones column first)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return np.column_stack([np.ones(X.shape[0]), X])


def _iteration_seed(seed, k, retry):
    return int(np.random.SeedSequence([seed, k, retry]).generate_state(1)[0])


def _rel(num, den):
    return float(num / den) if den > 0 else float(num)


def _residual(Q, y):
    # second projection keeps Q^T r small relative to |r| once r is tiny
    return linalg.project_residual(Q, linalg.project_residual(Q, y))


def train(data, K, g=RELU, cfg=SolverConfig(), eval_set=None):
    """Grow ``K`` neurons greedily.  Returns ``(AxonModel, TrainReport)``.

    Stops early when the residual is negligible, the inner solver finds no
    ascent direction, or the chosen neuron keeps landing in the current span.
    ``eval_set`` (a TrainingSet) only feeds the report's ``eval_rel_l2``.
    """
    if K < 0:
        raise ValueError("K must be non-negative")
    y = data.y
    y_norm = float(np.linalg.norm(y))
    basis = linalg.thin_qr(build_initial_basis(data.X))
    steps = []

    def eval_error(nsteps, c):
        if eval_set is None:
            return float("nan")
        partial = AxonModel(data.d, basis.R, tuple(steps[:nsteps]), c, g)
        pred = infer(partial, eval_set.X)
        return _rel(np.linalg.norm(pred - eval_set.y), np.linalg.norm(eval_set.y))

    r = _residual(basis.Q, y)
    report = TrainReport(
        initial_train_rel_l2=_rel(np.linalg.norm(r), y_norm),
        initial_eval_rel_l2=eval_error(0, basis.Q.T @ y),
        max_ortho_error=basis.orthogonality_error(),
    )
    for k in range(K):
        if np.linalg.norm(r) <= RESIDUAL_STOP * y_norm:
            report.stop_reason = "residual_below_tol"
            break
        obj = InnerObjective(basis.Q, r, g)
        step = None
        for retry in range(cfg.degenerate_retries + 1):
            scfg = replace(cfg, seed=_iteration_seed(cfg.seed, k, retry))
            try:
                sol = maximize(obj, scfg)
            except NoAscent:
                report.stop_reason = "no_ascent"
                break
            w = sol.w / np.linalg.norm(sol.w)
            phi = g(basis.Q @ w)
            try:
                alpha, beta, q = linalg.gs_append(basis, phi)
            except DegenerateDirection:
                continue
            step = Step(w, alpha, beta)
            break
        else:
            report.stop_reason = "degenerate_direction"
        if step is None:
            break
        steps.append(step)
        basis = basis.append(q)
        r = _residual(basis.Q, y)
        report.max_ortho_error = max(report.max_ortho_error, basis.orthogonality_error())
        report.records.append(
            IterationRecord(
                k=k,
                objective_value=sol.objective_value,
                beta=beta,
                train_rel_l2=_rel(np.linalg.norm(r), y_norm),
                eval_rel_l2=eval_error(k + 1, basis.Q.T @ y),
            )
        )
    c = basis.Q.T @ y
    model = AxonModel(data.d, basis.R, tuple(steps), c, g)
    return model, report


def features(model, X):
    """Orthonormal-coordinate features of the inputs, one row per point.

    For a training point this reproduces its row of ``Q``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None] if model.d == 1 else X[None, :]
    if X.shape[1] != model.d:
        raise ValueError(f"model expects d={model.d} inputs, got {X.shape[1]}")
    d1 = model.d + 1
    F = np.empty((X.shape[0], d1 + model.K))
    # rows of Q are rows of V times R^{-1}, i.e. solve R^T v = [1, x]
    F[:, :d1] = solve_triangular(model.R, build_initial_basis(X).T, trans="T", lower=False).T
    for k, st in enumerate(model.steps):
        V = F[:, : d1 + k]
        F[:, d1 + k] = (model.activation(V @ st.w) - V @ st.alpha) / st.beta
    return F


def neuron_activations(model, X):
    """Post-activation values ``g(w_k . v)`` of every grown neuron (n x K)."""
    F = features(model, X)
    d1 = model.d + 1
    out = np.empty((F.shape[0], model.K))
    for k, st in enumerate(model.steps):
        out[:, k] = model.activation(F[:, : d1 + k] @ st.w)
    return out


def infer(model, x):
    """Evaluate the network.  ``x`` may be one point or an (n, d) batch."""
    model.validate()
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0 or (x.ndim == 1 and model.d > 1)
    out = features(model, np.atleast_1d(x)) @ model.c
    return float(out[0]) if scalar else out


# -- serialization ---------------------------------------------------------


def model_to_dict(model):
    return {
        "format_version": FORMAT_VERSION,
        "d": model.d,
        "K": model.K,
        "activation": model.activation.spec(),
        "R": model.R.tolist(),
        "steps": [{"w": s.w.tolist(), "alpha": s.alpha.tolist(), "beta": s.beta} for s in model.steps],
        "c": model.c.tolist(),
    }


def save(model, path):
    # json writes floats with repr(), the shortest round-trip decimal
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def _vector(value, path, length):
    if not isinstance(value, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        raise SchemaError(path, "expected a list of numbers")
    arr = np.array(value, dtype=float)
    if arr.shape != (length,):
        raise SchemaError(path, f"expected length {length}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise SchemaError(path, "non-finite entry")
    return arr


def _count(doc, key):
    v = doc.get(key)
    if not isinstance(v, int) or isinstance(v, bool) or v < 0:
        raise SchemaError(key, "expected a non-negative integer")
    return v


def model_from_dict(doc):
    if not isinstance(doc, dict):
        raise SchemaError("$", "expected an object")
    if doc.get("format_version") != FORMAT_VERSION:
        raise SchemaError("format_version", f"expected {FORMAT_VERSION}")
    d = _count(doc, "d")
    K = _count(doc, "K")
    if d < 1:
        raise SchemaError("d", "must be >= 1")
    try:
        act = activation_from_spec(doc.get("activation"))
    except (ValueError, AttributeError) as exc:
        raise SchemaError("activation", str(exc)) from None
    R_raw = doc.get("R")
    if not isinstance(R_raw, list) or len(R_raw) != d + 1:
        raise SchemaError("R", f"expected {d + 1} rows")
    R = np.array([_vector(row, f"R[{i}]", d + 1) for i, row in enumerate(R_raw)])
    if np.any(np.tril(R, -1) != 0):
        raise SchemaError("R", "must be upper triangular")
    if np.any(np.diag(R) <= 0):
        raise SchemaError("R", "diagonal must be positive")
    steps_raw = doc.get("steps")
    if not isinstance(steps_raw, list) or len(steps_raw) != K:
        raise SchemaError("steps", f"expected a list of {K} steps")
    steps = []
    for k, s in enumerate(steps_raw):
        p = f"steps[{k}]"
        if not isinstance(s, dict):
            raise SchemaError(p, "expected an object")
        w = _vector(s.get("w"), f"{p}.w", d + 1 + k)
        if abs(np.linalg.norm(w) - 1.0) > 1e-12:
            raise SchemaError(f"{p}.w", "must be a unit vector")
        alpha = _vector(s.get("alpha"), f"{p}.alpha", d + 1 + k)
        beta = s.get("beta")
        if not isinstance(beta, (int, float)) or isinstance(beta, bool) or not np.isfinite(beta):
            raise SchemaError(f"{p}.beta", "expected a finite number")
        if beta <= 0:
            raise SchemaError(f"{p}.beta", "must be positive")
        steps.append(Step(w, alpha, float(beta)))
    c = _vector(doc.get("c"), "c", d + 1 + K)
    return AxonModel(d, R, tuple(steps), c, act)


def load(path):
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from None
    return model_from_dict(doc)
