"""Explicit deep ReLU approximant of x^2 on [0, 1] built from sawtooth functions.

``g`` is the hat function; ``g_s`` is its s-fold composition, a sawtooth with
``2**(s-1)`` teeth.  The depth-m approximant

    f_m(x) = x - sum_{s=1..m} g_s(x) / 4**s

is the piecewise-linear interpolant of x^2 on the dyadic grid of step 2**-m,
so its maximal error is 2**(-2m-2), reached at the segment midpoints.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


def hat(x):
    """2x on [0, 1/2), 2(1 - x) on [1/2, 1], 0 elsewhere."""
    x = np.asarray(x, dtype=float)
    out = np.where((x >= 0) & (x < 0.5), 2.0 * x, np.where((x >= 0.5) & (x <= 1.0), 2.0 * (1.0 - x), 0.0))
    return out[()] if out.ndim == 0 else out


def hat_relu(x):
    """The same hat written as one layer of three ReLU neurons."""
    x = np.asarray(x, dtype=float)
    relu = lambda z: np.maximum(z, 0.0)
    out = 2.0 * relu(x) - 4.0 * relu(x - 0.5) + 2.0 * relu(x - 1.0)
    return out[()] if out.ndim == 0 else out


def sawtooth(s, x):
    """g_s(x), by applying the hat ``s`` times."""
    v = np.asarray(x, dtype=float)
    for _ in range(s):
        v = hat(v)
    return v


def _check_domain(x):
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)) or not np.all(np.isfinite(x)):
        raise DomainError("f_m is defined on [0, 1]")
    return x


@dataclass(frozen=True)
class YarotskyApproximant:
    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("depth m must be >= 1")

    @property
    def bound(self):
        return 2.0 ** (-2 * self.m - 2)

    def __call__(self, x):
        return f_m(self, x)


def f_m(approx, x):
    x = _check_domain(x)
    out = x.copy()
    g = x
    scale = 1.0
    for _ in range(approx.m):
        g = hat(g)
        scale *= 0.25
        out = out - scale * g
    return out[()] if out.ndim == 0 else out


def verify_bound(m_max, grid=2**17 + 1):
    """Max error of f_m against x^2 on a uniform grid, m = 1..m_max.

    Returns rows ``(m, bound, max_error, ratio)`` where ratio is
    max_error / bound.  The grid must resolve every segment midpoint.
    """
    if grid < 2 ** (m_max + 2) + 1:
        raise ValueError(f"grid must have at least 2**(m_max+2)+1 = {2 ** (m_max + 2) + 1} points")
    x = np.linspace(0.0, 1.0, grid)
    x2 = x * x
    out = x.copy()
    g = x
    rows = []
    for m in range(1, m_max + 1):
        g = hat(g)
        out = out - g * 0.25**m
        err = float(np.max(np.abs(x2 - out)))
        bound = 2.0 ** (-2 * m - 2)
        rows.append((m, bound, err, err / bound))
    return rows


def as_axon_reference(m, x):
    """Basis functions ``[x, g_1, ..., g_m]`` on ``x`` and their output weights.

    Returns ``(Phi, coef)`` with ``Phi`` of shape (len(x), m + 1); ``Phi @ coef``
    equals f_m.
    """
    if m < 1:
        raise ValueError("depth m must be >= 1")
    x = np.asarray(x, dtype=float)
    cols = [x]
    for _ in range(m):
        cols.append(hat(cols[-1]))
    coef = np.array([1.0] + [-(0.25**s) for s in range(1, m + 1)])
    return np.column_stack(cols), coef
