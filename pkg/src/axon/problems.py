"""Model regression problems, sampling and the relative L2 error metric."""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Tuple

import numpy as np

from .core import TrainingSet
from .errors import DomainError, ZeroNorm

DEFAULT_TRAIN_N = {1: 1000, 2: 64 * 64}
DEFAULT_EVAL_GRID = {1: 10**5, 2: 512}


def reaction_diffusion_solution(eps, x):
    """Solution of -eps^2 u'' + u = 1 on [0, 1] with u(0) = u(1) = 0.

    Written as 1 - cosh((x - 1/2)/eps) / cosh(1/(2 eps)) and evaluated as a
    ratio of decaying exponentials, so it never overflows for small eps.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)) or not np.all(np.isfinite(x)):
        raise DomainError("reaction-diffusion solution is defined on [0, 1]")
    num = np.exp((x - 1.0) / eps) + np.exp(-x / eps)
    out = 1.0 - num / (1.0 + math.exp(-1.0 / eps))
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class Problem:
    name: str
    d: int
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    target: Callable[[np.ndarray], np.ndarray]
    params: Dict[str, float] = field(default_factory=dict)
    label: str = ""

    def __call__(self, X):
        """Evaluate the target on an (n, d) array or a single point."""
        X = np.asarray(X, dtype=float)
        if self.d == 1:
            return self.target(X[:, 0] if X.ndim == 2 else X)
        if X.ndim == 1:
            return float(self.target(X[None, :])[0])
        return self.target(X)


def _rd(eps):
    return lambda x: reaction_diffusion_solution(eps, x)


def catalog():
    unit = ((0.0,), (1.0,))
    return [
        Problem("x2", 1, *unit, lambda x: x * x, label="x^2"),
        Problem("sqrt", 1, *unit, np.sqrt, label="sqrt(x)"),
        Problem("exp", 1, *unit, lambda x: np.exp(-x), label="exp(-x)"),
        Problem("sin20", 1, *unit, lambda x: np.sin(20.0 * x), label="sin(20x)"),
        Problem(
            "radial2d", 2, (-1.0, -1.0), (1.0, 1.0),
            lambda X: np.sqrt(X[:, 0] ** 2 + X[:, 1] ** 2), label="sqrt(x^2+y^2)",
        ),
        Problem("rd_eps0.1", 1, *unit, _rd(0.1), {"eps": 0.1}, label="reaction-diffusion, eps=0.1"),
        Problem("rd_eps0.01", 1, *unit, _rd(0.01), {"eps": 0.01}, label="reaction-diffusion, eps=0.01"),
    ]


def get_problem(name):
    for p in catalog():
        if p.name == name:
            return p
    raise KeyError(f"unknown problem {name!r}; choose from {', '.join(problem_names())}")


def problem_names():
    return [p.name for p in catalog()]


def grid_points(problem, per_axis):
    """Uniform tensor grid including the boundary, shape (per_axis**d, d)."""
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(problem.lower, problem.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def sample(problem, N=None, scheme="grid", seed=0):
    """Training set for ``problem``.

    The grid scheme uses N points in 1D and a ceil(sqrt(N))^2 tensor grid in
    2D; the random scheme draws N seeded uniform points from the box.
    """
    d = problem.d
    if N is None:
        N = DEFAULT_TRAIN_N[d]
    if N < d + 2:
        raise ValueError(f"need N >= d+2 = {d + 2}")
    if scheme == "grid":
        per_axis = N if d == 1 else math.isqrt(N - 1) + 1
        X = grid_points(problem, per_axis)
    elif scheme == "random":
        rng = np.random.default_rng(seed)
        X = rng.uniform(problem.lower, problem.upper, size=(N, d))
    else:
        raise ValueError(f"unknown sampling scheme {scheme!r}")
    return TrainingSet(X, problem(X))


def eval_set(problem, eval_grid_size=None):
    """Dense evaluation grid; ``eval_grid_size`` counts points per axis."""
    if eval_grid_size is None:
        eval_grid_size = DEFAULT_EVAL_GRID[problem.d]
    X = grid_points(problem, eval_grid_size)
    return TrainingSet(X, problem(X))


def rel_l2_error(predict, problem, eval_grid_size=None):
    """||f - predict||_2 / ||f||_2 on the dense evaluation grid.

    ``predict`` maps an (n, d) array to n values.
    """
    if eval_grid_size is None:
        eval_grid_size = DEFAULT_EVAL_GRID[problem.d]
    minimum = 1000 if problem.d == 1 else 100
    if eval_grid_size < minimum:
        raise ValueError(f"evaluation grid needs at least {minimum} points per axis")
    ev = eval_set(problem, eval_grid_size)
    fnorm = np.linalg.norm(ev.y)
    if fnorm == 0:
        raise ZeroNorm(f"target {problem.name} vanishes on the evaluation grid")
    pred = np.asarray(predict(ev.X), dtype=float).reshape(-1)
    return float(np.linalg.norm(ev.y - pred) / fnorm)
