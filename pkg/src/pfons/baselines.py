"""Reference online learners for regret comparisons.

These are yardsticks, not the product: both use exact Euclidean or
metric-norm projections, which the projection-free path deliberately
avoids. They share the seeded initial point with the main run so curves
are comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .losses import stream_constants
from .seeding import rng_for
from .sets import FeasibleSet, L2Ball


@dataclass
class BaselineReport:
    name: str
    play_losses: np.ndarray
    total_loss: float
    regret_curve: np.ndarray | None = None
    offline = None

    @property
    def final_regret(self) -> float:
        if self.regret_curve is None:
            raise ValueError("regret not computed yet")
        return float(self.regret_curve[-1])


def run_baseline_ogd(losses, feasible_set: FeasibleSet, seed: int) -> BaselineReport:
    """Projected online gradient descent with step D / (G sqrt(t))."""
    losses = list(losses)
    consts = stream_constants(losses)
    G = consts["G"]
    diameter = 2.0 * feasible_set.radius_R
    x = np.asarray(feasible_set.sample_point(rng_for(seed, "init")), dtype=float)
    plays = np.empty(len(losses))
    for t, loss in enumerate(losses, start=1):
        plays[t - 1] = loss.value(x)
        step = diameter / (G * math.sqrt(t))
        x = feasible_set.euclid_project(x - step * loss.grad(x))
    return BaselineReport("ogd", plays, float(np.sum(plays)))


def project_ball_metric(mat: np.ndarray, y: np.ndarray, radius: float,
                        tol: float = 1e-10) -> np.ndarray:
    """argmin ||x - y||_A^2 over the radius-ball, by dual bisection.

    Stationarity gives x(lam) = (A + lam I)^{-1} A y with ||x(lam)||
    strictly decreasing in lam >= 0; bisection drives the norm residual
    below tol. Points already inside the ball are returned unchanged.
    """
    y = np.asarray(y, dtype=float)
    if float(np.linalg.norm(y)) <= radius:
        return y.copy()
    evals, evecs = np.linalg.eigh(np.asarray(mat, dtype=float))
    if evals[0] <= 0:
        raise ValueError("metric must be positive definite")
    u = evecs.T @ y

    def point(lam: float) -> np.ndarray:
        return (evals * u) / (evals + lam)

    lo = 0.0
    hi = 1.0
    while float(np.linalg.norm(point(hi))) > radius:
        hi *= 2.0
        if hi > 1e300:
            raise ArithmeticError("dual bisection failed to bracket")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        norm_mid = float(np.linalg.norm(point(mid)))
        if abs(norm_mid - radius) <= tol:
            lo = hi = mid
            break
        if norm_mid > radius:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    return evecs @ point(lam)


def run_baseline_exact_ons_ball(losses, ball: L2Ball, seed: int) -> BaselineReport:
    """Per-step online Newton step with exact metric projections on a ball.

    Textbook tuning: gamma = 0.5 min(1/(4 G D), alpha), A_0 = I/(gamma^2 D^2),
    per-round rank-one updates and an exact A-norm projection each step.
    Only meaningful on the l2 ball, where the projection has a one-
    dimensional dual.
    """
    if not isinstance(ball, L2Ball):
        raise ValueError("exact-ONS baseline requires an l2 ball")
    losses = list(losses)
    consts = stream_constants(losses)
    G, alpha = consts["G"], consts["alpha"]
    diameter = 2.0 * ball.radius
    gamma = 0.5 * min(1.0 / (4.0 * G * diameter), alpha)
    mat = np.eye(ball.dim) / (gamma**2 * diameter**2)
    x = np.asarray(ball.sample_point(rng_for(seed, "init")), dtype=float)
    plays = np.empty(len(losses))
    for t, loss in enumerate(losses):
        plays[t] = loss.value(x)
        g = loss.grad(x)
        mat = mat + np.outer(g, g)
        y = x - np.linalg.solve(mat, g) / gamma
        x = project_ball_metric(mat, y, ball.radius)
    return BaselineReport("exact_ons_ball", plays, float(np.sum(plays)))
