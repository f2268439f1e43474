"""Approximately-feasible projection through repeated separation.

The projection never solves a quadratic program. Starting from an anchor
y_1, it alternates:

  1. run separate_or_approach from the previous feasible iterate;
  2. if the returned feasible x is still far (||x - y||_A^2 > 3 eps), pull
     the anchor toward it: y <- y - gamma (y - x) with gamma = 2/3, which
     provably cuts the squared metric distance to the set by at least
     (4/9) ||y - x||_A^2 and moves the anchor closer to *every* feasible
     point (a Fejer step);
  3. otherwise stop: the pair (x, y) is 3 eps-close in the metric.

The distance to the set decays geometrically (factor e^{-4/9} per pull), so
the loop runs at most max(2.25 ln(||y_1 - x_0||_A^2 / eps) + 1, 0)
iterations; the hard cap adds one iteration of slack and raises beyond it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapExceededError
from .separation import fw_iteration_bound, separate_or_approach
from .sets import FeasibleSet, OracleCounter

_MACHINE_EPS = float(np.finfo(float).eps)


def pull_step(y, x, gamma: float = 2.0 / 3.0) -> np.ndarray:
    """Move the anchor toward a separating feasible point."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma!r}")
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    return y - gamma * (y - x)


def pull_iteration_bound(initial_dist_sq: float, eps: float) -> float:
    """Provable bound on pull-loop iterations: max(2.25 ln(d0/eps) + 1, 0)."""
    if initial_dist_sq <= 0.0:
        return 0.0
    return max(2.25 * math.log(initial_dist_sq / eps) + 1.0, 0.0)


@dataclass
class AFPResult:
    """Feasible point, adjusted anchor, and the work both took.

    Guarantees: x is feasible; ||x - y_tilde||_A^2 <= 3 eps; y_tilde is no
    farther (in the metric) from any feasible point than the original
    anchor was; ||y_tilde|| <= R + sqrt(3 eps / eps_I).
    """

    x: np.ndarray
    y_tilde: np.ndarray
    pull_iterations: int
    fw_iterations_total: int
    final_dist_sq: float
    used_cap_slack: bool = False
    fw_caps_ok: bool = True
    y_trace: list = field(default_factory=list)


def approx_feasible_projection(
    feasible_set: FeasibleSet,
    metric,
    y1,
    x0,
    eps: float,
    counter: OracleCounter | None = None,
    keep_trace: bool = False,
) -> AFPResult:
    """Produce a feasible x and anchor y_tilde with ||x - y_tilde||_A^2 <= 3 eps."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    y = np.asarray(y1, dtype=float)
    x_prev = np.asarray(x0, dtype=float)
    if y.shape != (feasible_set.dim,) or x_prev.shape != (feasible_set.dim,):
        raise ValueError("y1 and x0 must match the set dimension")
    if not feasible_set.contains(x_prev, tol=1e-9):
        raise ValueError("x0 must be feasible (within 1e-9)")
    anchor_scale = metric.norm_sq(y)
    if 3.0 * eps < _MACHINE_EPS * anchor_scale:
        raise ValueError(
            f"eps={eps!r} is below float resolution for this anchor "
            f"(3 eps < machine epsilon * ||y1||_A^2 = {_MACHINE_EPS * anchor_scale:.3e})"
        )

    trace = [y.copy()] if keep_trace else []
    d0 = metric.norm_sq(x_prev - y)
    if d0 <= 3.0 * eps * (1.0 + 1e-12):
        return AFPResult(x_prev, y, 0, 0, d0, y_trace=trace)

    bound = pull_iteration_bound(d0, eps)
    hard_cap = bound + 1.0
    fw_total = 0
    fw_caps_ok = True
    iterations = 0
    while True:
        iterations += 1
        if counter is not None:
            counter.pull_iterations += 1
        if iterations > hard_cap:
            raise CapExceededError(
                f"pull loop passed its termination cap ({hard_cap:.2f} iterations; "
                f"d0={d0:.3e}, eps={eps:.3e})"
            )
        outcome = separate_or_approach(feasible_set, metric, y, x_prev, eps, counter)
        fw_total += outcome.iterations
        per_call_cap = max(
            1, fw_iteration_bound(feasible_set.radius_R, metric.lambda_max_bound, eps)
        )
        if outcome.iterations > per_call_cap:
            fw_caps_ok = False
        x_prev = outcome.x_tilde
        if outcome.final_dist_sq > 3.0 * eps * (1.0 + 1e-12):
            y = pull_step(y, x_prev)
            if keep_trace:
                trace.append(y.copy())
            continue
        return AFPResult(
            x_prev,
            y,
            iterations,
            fw_total,
            outcome.final_dist_sq,
            used_cap_slack=iterations > bound,
            fw_caps_ok=fw_caps_ok,
            y_trace=trace,
        )
