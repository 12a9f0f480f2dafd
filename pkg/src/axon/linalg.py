"""Dense QR kernels: thin QR, residual projection and Gram-Schmidt append."""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDirection, RankDeficient

TOL_ORTHO = 1e-10
TOL_INDEP = 1e-8
TOL_RANK = 1e-12


@dataclass(frozen=True)
class OrthoBasis:
    """Orthonormal columns ``Q`` (N x K) plus the initial triangular factor ``R``.

    ``R`` is the factor of the initial feature matrix only; columns appended
    later by :func:`gs_append` are not reflected in it.
    """

    Q: np.ndarray
    R: np.ndarray

    @property
    def n(self):
        return self.Q.shape[0]

    @property
    def k(self):
        return self.Q.shape[1]

    def append(self, q):
        return OrthoBasis(np.column_stack([self.Q, q]), self.R)

    def orthogonality_error(self):
        """max |Q^T Q - I| entrywise."""
        G = self.Q.T @ self.Q
        return float(np.max(np.abs(G - np.eye(G.shape[0])))) if G.size else 0.0


def empty_basis(n):
    return OrthoBasis(np.zeros((n, 0)), np.zeros((0, 0)))


def thin_qr(V):
    """Thin Householder QR of ``V`` with a positive diagonal in ``R``.

    Raises RankDeficient when a pivot is tiny compared to its column norm,
    which is what happens for e.g. a constant input coordinate.
    """
    V = np.asarray(V, dtype=float)
    if V.ndim != 2:
        raise ValueError("V must be a 2-D array")
    n, k = V.shape
    if n < k:
        raise RankDeficient(f"need at least as many rows as columns, got {n}x{k}")
    if not np.all(np.isfinite(V)):
        raise ValueError("V has non-finite entries")
    Q, R = np.linalg.qr(V, mode="reduced")
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    Q = Q * signs
    R = R * signs[:, None]
    col_norms = np.linalg.norm(V, axis=0)
    pivots = np.diag(R)
    bad = np.flatnonzero(pivots <= TOL_RANK * np.maximum(col_norms, np.finfo(float).tiny))
    if bad.size:
        raise RankDeficient(
            f"column {bad[0]} is numerically dependent on the previous ones "
            f"(pivot {pivots[bad[0]]:.3e}, column norm {col_norms[bad[0]]:.3e})"
        )
    return OrthoBasis(Q, R)


def project_residual(Q, y):
    """Return ``y - Q (Q^T y)``."""
    y = np.asarray(y, dtype=float)
    if Q.shape[1] == 0:
        return y.copy()
    return y - Q @ (Q.T @ y)


def gs_append(basis, phi):
    """Orthogonalize ``phi`` against ``basis.Q`` (classical GS, done twice).

    Returns ``(alpha, beta, q)`` with ``phi = Q alpha + beta q`` and ``q`` a
    unit vector orthogonal to the columns of ``Q``.  The caller grows the
    basis with ``basis.append(q)``.
    """
    phi = np.asarray(phi, dtype=float)
    Q = basis.Q
    phi_norm = np.linalg.norm(phi)
    alpha = Q.T @ phi
    q = phi - Q @ alpha
    # second pass; keeps Q^T Q = I to roundoff once K gets large
    correction = Q.T @ q
    q = q - Q @ correction
    alpha = alpha + correction
    beta = float(np.linalg.norm(q))
    if not beta >= TOL_INDEP * phi_norm or beta == 0.0:
        raise DegenerateDirection(
            f"new vector lies in the current span (beta={beta:.3e}, |phi|={phi_norm:.3e})"
        )
    return alpha, beta, q / beta
