"""Separation-or-approach via Frank-Wolfe on the squared metric distance.

Given a point y (typically infeasible), run Frank-Wolfe with exact line
search on g(x) = 0.5 ||x - y||_A^2 over the feasible set. Each iteration
makes exactly one linear-oracle call. The loop stops as soon as either

  * the dual gap (x - y)^T A (x - v) drops to eps: x then certifies a
    separating halfspace with margin (2/3) ||x - y||_A^2 against all of K,
    unless the iterate is already close, or
  * ||x - y||_A^2 <= 3 eps: y is approximately feasible ("proximal").

Both exits return a feasible x_tilde. The dual-gap convergence of
Frank-Wolfe bounds the iteration count by ceil(27 R^2 lambda_max / eps - 2);
a hard cap at ceil(27 R^2 lambda_max / eps) raises instead of truncating,
because exceeding it means a precondition was violated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapExceededError
from .sets import FeasibleSet, OracleCounter

PROXIMAL = "proximal"
SEPARATING = "separating"

_REL_TOL = 1e-12


def _leq(a: float, b: float) -> bool:
    """a <= b with 1e-12 relative slack on the threshold."""
    return a <= b + _REL_TOL * abs(b)


def line_search_sigma(metric, y, x, v) -> float:
    """Exact step length for Frank-Wolfe on 0.5 ||x - y||_A^2.

    Minimizes the objective over x + sigma (v - x), sigma in [0, 1]:
    sigma* = clamp( (y - x)^T A (v - x) / ||v - x||_A^2 , 0, 1 ).
    Returns 0 when v coincides with x (no direction to move).
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    d = v - x
    if float(np.max(np.abs(d), initial=0.0)) <= 1e-14:
        return 0.0
    ad = metric.mat_vec(d)
    denom = float(d @ ad)
    if denom <= 0.0:
        return 0.0
    num = float((y - x) @ ad)
    return float(min(1.0, max(0.0, num / denom)))


@dataclass
class SeparationOutcome:
    """Result of one separate-or-approach call.

    status is "proximal" when ||x_tilde - y||_A^2 <= 3 eps, else
    "separating" (dual gap <= eps with the iterate still far), in which
    case every z in K satisfies (y-z)^T A (y-x_tilde) > (2/3)||x_tilde-y||_A^2.
    """

    x_tilde: np.ndarray
    status: str
    final_gap: float
    final_dist_sq: float
    iterations: int


def fw_iteration_bound(radius: float, lambda_max: float, eps: float) -> int:
    """Provable iteration bound ceil(27 R^2 lambda_max / eps - 2)."""
    return int(math.ceil(27.0 * radius * radius * lambda_max / eps - 2.0))


def separate_or_approach(
    feasible_set: FeasibleSet,
    metric,
    y,
    x_init,
    eps: float,
    counter: OracleCounter | None = None,
) -> SeparationOutcome:
    """Frank-Wolfe until a proximity or separation certificate appears."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    y = np.asarray(y, dtype=float)
    x = np.asarray(x_init, dtype=float)
    if y.shape != (feasible_set.dim,) or x.shape != (feasible_set.dim,):
        raise ValueError("y and x_init must match the set dimension")
    if not feasible_set.contains(x, tol=1e-9):
        raise ValueError("x_init must be feasible (within 1e-9)")

    radius = feasible_set.radius_R
    hard_cap = max(1, math.ceil(27.0 * radius * radius * metric.lambda_max_bound / eps))
    iterations = 0
    while True:
        iterations += 1
        grad = metric.mat_vec(x - y)
        dist_sq = float(grad @ (x - y))
        v = feasible_set.loo_argmin(grad, counter)
        if counter is not None:
            counter.fw_iterations += 1
        gap = float(grad @ (x - v))
        if _leq(dist_sq, 3.0 * eps):
            return SeparationOutcome(x, PROXIMAL, gap, dist_sq, iterations)
        if _leq(gap, eps):
            return SeparationOutcome(x, SEPARATING, gap, dist_sq, iterations)
        if iterations >= hard_cap:
            raise CapExceededError(
                f"separation loop passed its termination cap ({hard_cap} iterations; "
                f"gap={gap:.3e}, dist_sq={dist_sq:.3e}, eps={eps:.3e}, "
                f"lambda_max_bound={metric.lambda_max_bound:.3e})"
            )
        sigma = line_search_sigma(metric, y, x, v)
        x = x + sigma * (v - x)
