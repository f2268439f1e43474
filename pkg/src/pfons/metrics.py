"""Dense PSD metric A = eps_I * I + sum of rank-one terms.

The metric induces the norm ||v||_A^2 = v^T A v used by the separation and
projection routines. A and its inverse are maintained together: each
rank-one update applies the Sherman-Morrison identity to the inverse, and a
dense refactorization every `refresh_interval` updates stops drift from
accumulating over long runs.

Instances are plain mutable values with a single writer; nothing here is
thread-safe.
"""

from __future__ import annotations

import numpy as np


def _symmetrize(m: np.ndarray) -> np.ndarray:
    # Mirror the upper triangle onto the lower one so roundoff cannot make
    # the stored matrix drift away from symmetry.
    upper = np.triu(m)
    return upper + np.triu(m, 1).T


class ExactMetric:
    """Explicit n x n metric with O(n^2) rank-one updates.

    Attributes
    ----------
    mat : ndarray          the matrix A itself
    inv : ndarray          running inverse of A
    eps_I : float          the initial multiple of the identity
    lambda_max_bound : float
        Cheap upper bound on the top eigenvalue, maintained as
        eps_I + sum of ||u||^2 over all updates. Iteration caps use this
        bound so the run path never needs an eigendecomposition.
    """

    def __init__(self, dim: int, eps_I: float, refresh_interval: int = 1024):
        if not isinstance(dim, (int, np.integer)) or dim < 1:
            raise ValueError(f"dim must be a positive integer, got {dim!r}")
        if not eps_I > 0:
            raise ValueError(f"eps_I must be positive, got {eps_I!r}")
        if refresh_interval < 1:
            raise ValueError("refresh_interval must be >= 1")
        self.dim = int(dim)
        self.eps_I = float(eps_I)
        self.refresh_interval = int(refresh_interval)
        self.mat = np.eye(self.dim) * self.eps_I
        self.inv = np.eye(self.dim) / self.eps_I
        self.lambda_max_bound = float(eps_I)
        self.update_count = 0

    def update(self, u) -> "ExactMetric":
        """Rank-one update A += u u^T, keeping inv and the eigenvalue bound."""
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dim,):
            raise ValueError(f"update vector has shape {u.shape}, expected ({self.dim},)")
        self.mat = _symmetrize(self.mat + np.outer(u, u))
        w = self.inv @ u
        denom = 1.0 + float(u @ w)
        self.inv = _symmetrize(self.inv - np.outer(w, w) / denom)
        self.lambda_max_bound += float(u @ u)
        self.update_count += 1
        if self.update_count % self.refresh_interval == 0:
            self.inv = _symmetrize(np.linalg.inv(self.mat))
        return self

    def mat_vec(self, v) -> np.ndarray:
        """A v."""
        return self.mat @ np.asarray(v, dtype=float)

    def norm_sq(self, v) -> float:
        """||v||_A^2 = v^T A v (>= eps_I ||v||^2)."""
        v = np.asarray(v, dtype=float)
        return float(v @ (self.mat @ v))

    def inner(self, u, v) -> float:
        """u^T A v."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return float(u @ (self.mat @ v))

    def inv_apply(self, v) -> np.ndarray:
        """A^{-1} v via the maintained inverse (no fresh factorization)."""
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dim,):
            raise ValueError(f"vector has shape {v.shape}, expected ({self.dim},)")
        return self.inv @ v

    def copy(self) -> "ExactMetric":
        out = ExactMetric(self.dim, self.eps_I, self.refresh_interval)
        out.mat = self.mat.copy()
        out.inv = self.inv.copy()
        out.lambda_max_bound = self.lambda_max_bound
        out.update_count = self.update_count
        return out


def _as_matrix(a) -> np.ndarray:
    if isinstance(a, ExactMetric):
        return a.mat
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix or ExactMetric")
    return m


def logdet_ratio(a, b) -> tuple[float, float]:
    """Return (A^{-1} . (A - B), log det A - log det B) for PD A, B.

    The first quantity never exceeds the second when 0 < B <= A in the PSD
    order; callers use the pair to sanity-check telescoping potential
    arguments. Non-PD input raises ValueError.
    """
    ma, mb = _as_matrix(a), _as_matrix(b)
    if ma.shape != mb.shape:
        raise ValueError("matrices must share a shape")
    try:
        np.linalg.cholesky(ma)
        np.linalg.cholesky(mb)
    except np.linalg.LinAlgError as exc:
        raise ValueError("logdet_ratio requires positive definite inputs") from exc
    inv_a = np.linalg.inv(ma)
    lhs = float(np.sum(inv_a * (ma - mb)))
    sign_a, logdet_a = np.linalg.slogdet(ma)
    sign_b, logdet_b = np.linalg.slogdet(mb)
    if sign_a <= 0 or sign_b <= 0:
        raise ValueError("logdet_ratio requires positive definite inputs")
    return lhs, float(logdet_a - logdet_b)
