"""Shared test fixtures that are not pytest fixtures."""

import numpy as np

from axon.inner_opt import RELU, InnerObjective, objective
from axon.linalg import thin_qr


def random_objective(rng, n=50, k=4, g=RELU):
    Q = thin_qr(rng.standard_normal((n, k))).Q
    r = rng.standard_normal(n)
    r -= Q @ (Q.T @ r)
    r -= Q @ (Q.T @ r)
    return InnerObjective(Q, r, g)


def planted_instance(rng, n=50, k=4, scale=3.0):
    """Residual built from the orthogonal part of relu(Q w*).

    Returns ``(obj, w_star, J(w_star))``; the planted value has the closed
    form ``scale * |P u| / |u|`` with ``u = relu(Q w*)`` and ``P`` the
    projector onto the complement of span(Q).
    """
    Q = thin_qr(rng.standard_normal((n, k))).Q
    while True:
        w = rng.standard_normal(k)
        w /= np.linalg.norm(w)
        u = np.maximum(Q @ w, 0.0)
        p = u - Q @ (Q.T @ u)
        p -= Q @ (Q.T @ p)
        if np.linalg.norm(u) > 1e-3 and np.linalg.norm(p) > 1e-3:
            break
    r = scale * p / np.linalg.norm(p)
    obj = InnerObjective(Q, r, RELU)
    expected = scale * np.linalg.norm(p) / np.linalg.norm(u)
    assert abs(objective(obj, w) - expected) <= 1e-12 * scale
    return obj, w, expected
