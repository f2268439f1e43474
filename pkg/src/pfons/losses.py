"""Loss families for the online runs.

Both families are defined on the ball of radius 3R (three times the
feasible set's enclosing radius) because the online iterates' anchors can
wander up to 2R outside the set. Each instance carries its own constants:

  G     gradient norm bound on the 3R ball,
  beta  smoothness,
  alpha exp-concavity,

and must satisfy the curvature condition

  f(x) - f(y) <= grad f(x).(x - y) - (1/(2 eta)) (grad f(x).(x - y))^2

for every eta >= max(4 G R, 2 / alpha), which `check_curvature` verifies by
sampling. Sums of k such losses satisfy the same condition with the
threshold scaled by k; passing a sequence checks that block-sum form.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ContractViolationError
from .seeding import rng_for


class QuadraticLoss:
    """f(x) = scale * (a.x - b)^2 on the 3R ball."""

    family = "quadratic"

    def __init__(self, a, b: float, radius: float, scale: float = 1.0):
        a = np.asarray(a, dtype=float)
        if a.ndim != 1 or not np.any(a):
            raise ValueError("a must be a nonzero 1-d vector")
        if not radius > 0 or not scale > 0:
            raise ValueError("radius and scale must be positive")
        self.a = a
        self.b = float(b)
        self.radius = float(radius)
        self.scale = float(scale)
        a_norm = float(np.linalg.norm(a))
        self.D = 3.0 * self.radius * a_norm + abs(self.b)
        self.G = 2.0 * self.scale * self.D * a_norm
        self.beta = 2.0 * self.scale * a_norm**2
        self.alpha = 1.0 / (2.0 * self.scale * self.D**2)

    def value(self, x) -> float:
        r = float(self.a @ np.asarray(x, dtype=float)) - self.b
        return self.scale * r * r

    def grad(self, x) -> np.ndarray:
        r = float(self.a @ np.asarray(x, dtype=float)) - self.b
        return (2.0 * self.scale * r) * self.a


class LogPortfolioLoss:
    """f(x) = -log(r.x + c) on the 3R ball; requires c > 3R ||r||."""

    family = "log_portfolio"

    def __init__(self, r, c: float, radius: float):
        r = np.asarray(r, dtype=float)
        if r.ndim != 1 or not np.any(r):
            raise ValueError("r must be a nonzero 1-d vector")
        if not radius > 0:
            raise ValueError("radius must be positive")
        r_norm = float(np.linalg.norm(r))
        m_min = float(c) - 3.0 * radius * r_norm
        if not m_min > 0:
            raise ValueError(
                f"c must exceed 3 R ||r|| = {3.0 * radius * r_norm:.6g} so the "
                f"argument stays positive on the domain; got c = {c!r}"
            )
        self.r = r
        self.c = float(c)
        self.radius = float(radius)
        self.m_min = m_min
        self.m_max = float(c) + 3.0 * radius * r_norm
        self.G = r_norm / m_min
        self.beta = r_norm**2 / m_min**2
        # -log of a positive affine argument is 1-exp-concave, but the
        # curvature condition must hold pairwise across the whole domain
        # ball, where the argument ratio can reach m_max / m_min. The exact
        # requirement there is eta >= t^2 / (2 (t - log(1 + t))) with
        # t = m_max / m_min - 1, so alpha is tightened until 2 / alpha
        # covers that supremum.
        t = (self.m_max - m_min) / m_min
        eta_star = t * t / (2.0 * (t - math.log1p(t)))
        self.alpha = min(1.0, 2.0 / eta_star)

    def _arg(self, x) -> float:
        arg = float(self.r @ np.asarray(x, dtype=float)) + self.c
        if arg <= 0.0:
            raise ContractViolationError(
                f"log-portfolio argument {arg:.3e} <= 0; the query point left the domain"
            )
        return arg

    def value(self, x) -> float:
        return -math.log(self._arg(x))

    def grad(self, x) -> np.ndarray:
        return -self.r / self._arg(x)


def stream_constants(losses) -> dict:
    """Worst-case constants across a stream: max G, max beta, min alpha."""
    losses = list(losses)
    if not losses:
        raise ValueError("empty loss stream")
    return {
        "G": max(f.G for f in losses),
        "beta": max(f.beta for f in losses),
        "alpha": min(f.alpha for f in losses),
    }


def _sample_in_ball(rng: np.random.Generator, dim: int, radius: float) -> np.ndarray:
    u = rng.standard_normal(dim)
    norm = float(np.linalg.norm(u))
    if norm == 0.0:
        u = np.zeros(dim)
        u[0] = 1.0
        norm = 1.0
    return (radius * rng.random() ** (1.0 / dim) / norm) * u


def check_curvature(losses, radius: float, eta: float, n_samples: int, seed: int) -> int:
    """Count curvature-condition violations over sampled pairs in the 3R ball.

    `losses` may be a single loss or a sequence of k losses; the sequence
    form checks the block sum h = sum f_i, whose admissible eta threshold
    scales by k. Returns the number of sampled pairs violating the
    condition by more than 1e-9 (zero for a correct loss at an admissible
    eta).
    """
    if not isinstance(losses, (list, tuple)):
        losses = [losses]
    if not losses:
        raise ValueError("need at least one loss")
    k = len(losses)
    g_max = max(f.G for f in losses)
    alpha_min = min(f.alpha for f in losses)
    threshold = max(4.0 * k * g_max * radius, 2.0 * k / alpha_min)
    if eta < threshold * (1.0 - 1e-12):
        raise ValueError(
            f"eta = {eta!r} is below the admissible threshold "
            f"max(4 k G R, 2 k / alpha) = {threshold:.6g}"
        )
    dim = losses[0].a.size if hasattr(losses[0], "a") else losses[0].r.size
    rng = rng_for(seed, "curvature")
    violations = 0
    for _ in range(n_samples):
        x = _sample_in_ball(rng, dim, 3.0 * radius)
        y = _sample_in_ball(rng, dim, 3.0 * radius)
        hx = sum(f.value(x) for f in losses)
        hy = sum(f.value(y) for f in losses)
        gx = sum((f.grad(x) for f in losses), np.zeros(dim))
        proj = float(gx @ (x - y))
        rhs = proj - proj * proj / (2.0 * eta)
        if hx - hy > rhs + 1e-9:
            violations += 1
    return violations


def batch_values(losses, x) -> np.ndarray:
    """f_t(x) for every loss in the stream, vectorized per family."""
    losses = list(losses)
    x = np.asarray(x, dtype=float)
    if all(isinstance(f, QuadraticLoss) for f in losses):
        a = np.stack([f.a for f in losses])
        b = np.array([f.b for f in losses])
        s = np.array([f.scale for f in losses])
        return s * (a @ x - b) ** 2
    if all(isinstance(f, LogPortfolioLoss) for f in losses):
        r = np.stack([f.r for f in losses])
        c = np.array([f.c for f in losses])
        args = r @ x + c
        if np.any(args <= 0.0):
            raise ContractViolationError("log-portfolio argument <= 0 in batch evaluation")
        return -np.log(args)
    return np.array([f.value(x) for f in losses])


def total_value_and_grad(losses):
    """Closures (value, grad) for F(x) = sum_t f_t(x), vectorized per family.

    The offline solver calls these tens of thousands of times; per-family
    aggregation keeps each call at one or two matrix-vector products
    instead of T Python-level loss evaluations.
    """
    losses = list(losses)
    if all(isinstance(f, QuadraticLoss) for f in losses):
        w = np.sqrt(np.array([f.scale for f in losses]))
        a = np.stack([f.a for f in losses]) * w[:, None]
        b = np.array([f.b for f in losses]) * w

        def value(x):
            r = a @ np.asarray(x, dtype=float) - b
            return float(r @ r)

        def grad(x):
            r = a @ np.asarray(x, dtype=float) - b
            return 2.0 * (a.T @ r)

        return value, grad
    if all(isinstance(f, LogPortfolioLoss) for f in losses):
        r_mat = np.stack([f.r for f in losses])
        c_vec = np.array([f.c for f in losses])

        def value(x):
            args = r_mat @ np.asarray(x, dtype=float) + c_vec
            if np.any(args <= 0.0):
                raise ContractViolationError("log-portfolio argument <= 0")
            return float(-np.sum(np.log(args)))

        def grad(x):
            args = r_mat @ np.asarray(x, dtype=float) + c_vec
            if np.any(args <= 0.0):
                raise ContractViolationError("log-portfolio argument <= 0")
            return -(r_mat.T @ (1.0 / args))

        return value, grad

    def value(x):
        return float(sum(f.value(x) for f in losses))

    def grad(x):
        out = np.zeros_like(np.asarray(x, dtype=float))
        for f in losses:
            out += f.grad(x)
        return out

    return value, grad
