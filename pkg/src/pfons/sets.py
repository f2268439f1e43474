"""Feasible sets accessed through linear optimization oracles.

Every set K here supports:

  * loo_argmin(g): a vertex/extreme point minimizing g . x over K. This is
    the only operation the online algorithm needs, and calls are counted.
  * euclid_project(y): exact Euclidean projection. Used by baselines, the
    offline solver and tests only; never on the projection-free path.
  * contains(x, tol): feasibility up to tol in each defining constraint.
  * sample_point(rng): a random feasible point.
  * radius_R: a radius R with K contained in the origin-centered R-ball.

Tie-breaking in loo_argmin is canonical (lowest coordinate index wins, and
g = 0 returns a fixed canonical point) so runs are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class OracleCounter:
    """Tallies of oracle work; one instance accompanies each run."""

    loo_calls: int = 0
    fw_iterations: int = 0
    pull_iterations: int = 0

    def snapshot(self) -> dict:
        return {
            "loo_calls": self.loo_calls,
            "fw_iterations": self.fw_iterations,
            "pull_iterations": self.pull_iterations,
        }


class FeasibleSet:
    """Base class; concrete sets fill in the oracle methods."""

    kind: str = "abstract"
    dim: int
    radius_R: float

    def loo_argmin(self, g, counter: OracleCounter | None = None) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        if g.shape != (self.dim,):
            raise ValueError(f"gradient has shape {g.shape}, expected ({self.dim},)")
        if counter is not None:
            counter.loo_calls += 1
        return self._loo(g)

    def _loo(self, g: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def euclid_project(self, y) -> np.ndarray:
        raise NotImplementedError

    def contains(self, x, tol: float = 1e-9) -> bool:
        raise NotImplementedError

    def sample_point(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, "radius_R": self.radius_R}


class Simplex(FeasibleSet):
    """Probability simplex {x >= 0, sum x = 1}; R = 1."""

    kind = "simplex"

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("simplex needs dim >= 1")
        self.dim = int(dim)
        self.radius_R = 1.0

    def _loo(self, g):
        v = np.zeros(self.dim)
        v[int(np.argmin(g))] = 1.0  # argmin returns the lowest tied index
        return v

    def euclid_project(self, y):
        return project_to_simplex(np.asarray(y, dtype=float), 1.0)

    def contains(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= -tol) and abs(float(np.sum(x)) - 1.0) <= tol)

    def sample_point(self, rng):
        return rng.dirichlet(np.ones(self.dim))


class L2Ball(FeasibleSet):
    """Euclidean ball of radius r centered at the origin."""

    kind = "l2_ball"

    def __init__(self, dim: int, radius: float):
        if dim < 1 or not radius > 0:
            raise ValueError("l2 ball needs dim >= 1 and radius > 0")
        self.dim = int(dim)
        self.radius = float(radius)
        self.radius_R = float(radius)

    def _loo(self, g):
        norm = float(np.linalg.norm(g))
        if norm == 0.0:
            return np.zeros(self.dim)
        return -(self.radius / norm) * g

    def euclid_project(self, y):
        y = np.asarray(y, dtype=float)
        norm = float(np.linalg.norm(y))
        if norm <= self.radius:
            return y.copy()
        return (self.radius / norm) * y

    def contains(self, x, tol=1e-9):
        return bool(float(np.linalg.norm(np.asarray(x, dtype=float))) <= self.radius + tol)

    def sample_point(self, rng):
        u = rng.standard_normal(self.dim)
        norm = float(np.linalg.norm(u))
        if norm == 0.0:
            u = np.zeros(self.dim)
            u[0] = 1.0
            norm = 1.0
        r = self.radius * rng.random() ** (1.0 / self.dim)
        return (r / norm) * u


class Box(FeasibleSet):
    """Axis-aligned box [lo, hi] componentwise."""

    kind = "box"

    def __init__(self, lo, hi):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise ValueError("lo and hi must be 1-d arrays of equal length")
        if not np.all(lo <= hi):
            raise ValueError("box needs lo <= hi componentwise")
        self.lo = lo
        self.hi = hi
        self.dim = lo.size
        self.radius_R = float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi))))

    def _loo(self, g):
        # g_i > 0 pulls toward lo_i, g_i < 0 toward hi_i; zero entries take
        # the lo corner so ties are canonical.
        return np.where(g < 0, self.hi, self.lo).astype(float)

    def euclid_project(self, y):
        return np.clip(np.asarray(y, dtype=float), self.lo, self.hi)

    def contains(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def sample_point(self, rng):
        return self.lo + rng.random(self.dim) * (self.hi - self.lo)


class L1Ball(FeasibleSet):
    """Cross-polytope {||x||_1 <= r}."""

    kind = "l1_ball"

    def __init__(self, dim: int, radius: float):
        if dim < 1 or not radius > 0:
            raise ValueError("l1 ball needs dim >= 1 and radius > 0")
        self.dim = int(dim)
        self.radius = float(radius)
        self.radius_R = float(radius)

    def _loo(self, g):
        i = int(np.argmax(np.abs(g)))  # lowest index on ties
        v = np.zeros(self.dim)
        if g[i] != 0.0:
            v[i] = -self.radius * np.sign(g[i])
        return v

    def euclid_project(self, y):
        y = np.asarray(y, dtype=float)
        if float(np.sum(np.abs(y))) <= self.radius:
            return y.copy()
        mags = project_to_simplex(np.abs(y), self.radius)
        return np.sign(y) * mags

    def contains(self, x, tol=1e-9):
        return bool(float(np.sum(np.abs(np.asarray(x, dtype=float)))) <= self.radius + tol)

    def sample_point(self, rng):
        p = rng.dirichlet(np.ones(self.dim))
        signs = rng.integers(0, 2, self.dim) * 2 - 1
        scale = self.radius * rng.random() ** (1.0 / self.dim)
        return scale * signs * p


def project_to_simplex(y: np.ndarray, total: float) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x = total} by sorting."""
    if total <= 0:
        raise ValueError("simplex total must be positive")
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - total
    ks = np.arange(1, y.size + 1)
    mask = u - css / ks > 0
    k = int(ks[mask][-1])
    tau = css[k - 1] / k
    return np.maximum(y - tau, 0.0)


_SET_KINDS = ("simplex", "l2_ball", "box", "l1_ball")


def make_set(kind: str, dim: int | None = None, radius: float | None = None,
             lo=None, hi=None) -> FeasibleSet:
    """Factory used by the config layer."""
    if kind == "simplex":
        if dim is None:
            raise ValueError("simplex needs dim")
        return Simplex(dim)
    if kind == "l2_ball":
        if dim is None or radius is None:
            raise ValueError("l2_ball needs dim and radius")
        return L2Ball(dim, radius)
    if kind == "l1_ball":
        if dim is None or radius is None:
            raise ValueError("l1_ball needs dim and radius")
        return L1Ball(dim, radius)
    if kind == "box":
        if lo is None or hi is None:
            raise ValueError("box needs lo and hi")
        return Box(lo, hi)
    raise ValueError(f"unknown set kind {kind!r}; expected one of {_SET_KINDS}")
