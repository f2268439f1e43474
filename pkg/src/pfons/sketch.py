"""Frequent-directions sketch of a metric A = eps_I * I + sum of g g^T.

Instead of the dense n x n matrix, only a (rho+1) x n factor S with
A ~= eps_I * I + S^T S is kept, together with the diagonal
H = (eps_I * I_{rho+1} + S S^T)^{-1}. Inserting a vector costs one SVD of S
(O(rho^2 n)); applying the inverse uses the Woodbury identity

    A^{-1} v = (v - S^T (H (S v))) / eps_I

so the dense A is never materialized on the run path. Each insert shrinks
the spectrum by the smallest retained eigenvalue sigma; the running sum of
shrinkages (`sigma_total`) is the quantity that standard frequent-directions
error bounds control.
"""

from __future__ import annotations

import numpy as np

_DENSE_LIMIT = 200


class SketchMetric:
    """Factorized metric with frequent-directions updates.

    State is exactly (S, H diagonal) plus scalar accumulators; the
    eigenbasis is recomputed at each insert and never stored.
    """

    def __init__(self, dim: int, rho: int, eps_I: float):
        if not isinstance(dim, (int, np.integer)) or dim < 1:
            raise ValueError(f"dim must be a positive integer, got {dim!r}")
        if not isinstance(rho, (int, np.integer)) or rho < 1:
            raise ValueError(f"rho must be a positive integer, got {rho!r}")
        if not eps_I > 0:
            raise ValueError(f"eps_I must be positive, got {eps_I!r}")
        self.dim = int(dim)
        self.rho = int(rho)
        self.eps_I = float(eps_I)
        self.S = np.zeros((self.rho + 1, self.dim))
        self.h_diag = np.full(self.rho + 1, 1.0 / self.eps_I)
        self.lambda_max_bound = float(eps_I)
        self.sigma_total = 0.0
        self.update_count = 0

    # The run loop calls metrics through a common update/apply surface, so
    # the frequent-directions insert is also exposed as `update`.
    def update(self, gbar) -> "SketchMetric":
        return self.insert(gbar)

    def insert(self, gbar) -> "SketchMetric":
        """Fold one vector into the sketch and re-shrink the spectrum."""
        gbar = np.asarray(gbar, dtype=float)
        if gbar.shape != (self.dim,):
            raise ValueError(f"insert vector has shape {gbar.shape}, expected ({self.dim},)")
        self.update_count += 1
        if not np.any(gbar):
            # A zero insert leaves S^T S unchanged; recomputing the SVD would
            # only rotate rows, so keep the state bit-identical.
            return self
        self.S[-1] = gbar
        # Eigendecomposition of S^T S through the SVD of S.
        _, svals, vt = np.linalg.svd(self.S, full_matrices=False)
        lam = np.zeros(self.rho + 1)
        lam[: svals.size] = svals**2
        sigma = lam[self.rho]
        shifted = np.sqrt(np.maximum(lam - sigma, 0.0))
        rows = np.zeros((self.rho + 1, self.dim))
        rows[: vt.shape[0]] = vt
        self.S = shifted[:, None] * rows
        self.h_diag = 1.0 / (self.eps_I + shifted**2)
        self.sigma_total += float(sigma)
        self.lambda_max_bound += float(gbar @ gbar)
        return self

    def mat_vec(self, v) -> np.ndarray:
        """A v = eps_I v + S^T (S v), in O(rho n)."""
        v = np.asarray(v, dtype=float)
        return self.eps_I * v + self.S.T @ (self.S @ v)

    def norm_sq(self, v) -> float:
        """||v||_A^2 = eps_I ||v||^2 + ||S v||^2."""
        v = np.asarray(v, dtype=float)
        sv = self.S @ v
        return float(self.eps_I * (v @ v) + sv @ sv)

    def inner(self, u, v) -> float:
        """u^T A v through the factorized form."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return float(self.eps_I * (u @ v) + (self.S @ u) @ (self.S @ v))

    def inv_apply(self, v) -> np.ndarray:
        """A^{-1} v by the Woodbury identity; O(rho n), no dense solve."""
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dim,):
            raise ValueError(f"vector has shape {v.shape}, expected ({self.dim},)")
        sv = self.S @ v
        return (v - self.S.T @ (self.h_diag * sv)) / self.eps_I

    def reconstruct_dense(self) -> np.ndarray:
        """Materialize eps_I * I + S^T S (tests and diagnostics only)."""
        if self.dim > _DENSE_LIMIT:
            raise ValueError(
                f"refusing to materialize a {self.dim} x {self.dim} matrix "
                f"(limit {_DENSE_LIMIT}); the sketch exists to avoid exactly that"
            )
        return self.eps_I * np.eye(self.dim) + self.S.T @ self.S
