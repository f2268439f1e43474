"""Block-structured projection-free online Newton step.

The horizon T is cut into blocks of length K. One feasible point x_m is
played for the whole block while gradients are taken at a nearby anchor
ytilde_m (not necessarily feasible); the block's gradient sum gbar feeds a
rank-one metric update, a Newton step produces the next anchor, and the
approximately-feasible projection turns it into the next playable pair.
Only linear-oracle calls ever touch the feasible set.

`tune_params_*` produce the horizon-dependent parameters; the invariants

    eta   >= max(12 K G R, 2 K / alpha)
    eps_I >= (K G)^2
    3 eps <= 4 R^2 eps_I
    1 <= K <= T

are enforced by upward adjustment (recorded, never silent). The last one
keeps every anchor inside the 3R ball where the losses are defined.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolationError
from .losses import batch_values, stream_constants, total_value_and_grad
from .metrics import ExactMetric
from .seeding import rng_for
from .sets import FeasibleSet, OracleCounter
from .afp import approx_feasible_projection
from .sketch import SketchMetric

MODES = ("fullrank", "lowdim", "sketch")


@dataclass
class Params:
    """Run parameters; `adjustments` records any upward fixes applied."""

    T: int
    K: int
    eta: float
    eps: float
    eps_I: float
    mode: str = "fullrank"
    rho: int | None = None
    tuned: bool = False
    adjustments: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "T": self.T,
            "K": self.K,
            "eta": self.eta,
            "eps": self.eps,
            "eps_I": self.eps_I,
            "mode": self.mode,
            "rho": self.rho,
            "tuned": self.tuned,
            "adjustments": list(self.adjustments),
        }


def validate_params(params: Params, G: float, R: float, alpha: float) -> list[str]:
    """Return the list of violated invariants (empty when valid)."""
    p = params
    bad = []
    if p.mode not in MODES:
        bad.append(f"mode must be one of {MODES}, got {p.mode!r}")
    if p.mode in ("lowdim", "sketch") and (p.rho is None or p.rho < 1):
        bad.append(f"mode {p.mode!r} needs rho >= 1, got {p.rho!r}")
    if not (isinstance(p.K, (int, np.integer)) and 1 <= p.K <= p.T):
        bad.append(f"K must be an integer in [1, T], got K={p.K!r}, T={p.T!r}")
    if not p.eps > 0 or not p.eps_I > 0 or not p.eta > 0:
        bad.append("eta, eps, eps_I must all be positive")
        return bad
    slack = 1.0 - 1e-12
    eta_floor = max(12.0 * p.K * G * R, 2.0 * p.K / alpha)
    if p.eta < eta_floor * slack:
        bad.append(f"eta={p.eta:.6g} below max(12 K G R, 2 K / alpha)={eta_floor:.6g}")
    if p.eps_I < (p.K * G) ** 2 * slack:
        bad.append(f"eps_I={p.eps_I:.6g} below (K G)^2={(p.K * G) ** 2:.6g}")
    if 3.0 * p.eps > 4.0 * R * R * p.eps_I * (1.0 + 1e-12):
        bad.append(
            f"3 eps={3.0 * p.eps:.6g} exceeds 4 R^2 eps_I={4.0 * R * R * p.eps_I:.6g} "
            "(anchors could leave the loss domain)"
        )
    return bad


def _tune(T: int, q: int, G: float, R: float, alpha: float, mode: str,
          rho: int | None) -> Params:
    if T < 1 or q < 1:
        raise ValueError("T and the dimension parameter must be >= 1")
    if not (G > 0 and R > 0 and alpha > 0):
        raise ValueError("G, R, alpha must be positive")
    k_raw = 4.0 * q ** (-1.0 / 3.0) * T ** (2.0 / 3.0)
    K = min(max(int(round(k_raw)), 1), T)
    eta = 2.0 * K * max(6.0 * G * R, 1.0 / alpha)
    eps_I = 32.0 * G * G * T ** (4.0 / 3.0)
    eps = (
        96.0 * G * G * R * R
        * math.log(
            19.0
            + 8.0 * (12.0 + 1.0 / (3.0 * R * R * G * G * alpha * alpha))
            * q ** (-4.0 / 3.0) * T ** (1.0 / 3.0)
        )
        * T
    )
    adjustments = []
    floor_kg = (K * G) ** 2
    if eps_I < floor_kg:
        adjustments.append(f"eps_I raised from {eps_I:.6g} to (K G)^2 = {floor_kg:.6g}")
        eps_I = floor_kg
    floor_anchor = 3.0 * eps / (4.0 * R * R)
    if eps_I < floor_anchor:
        adjustments.append(
            f"eps_I raised from {eps_I:.6g} to 3 eps / (4 R^2) = {floor_anchor:.6g} "
            "to keep anchors inside the loss domain"
        )
        eps_I = floor_anchor
    params = Params(T=int(T), K=K, eta=eta, eps=eps, eps_I=eps_I, mode=mode,
                    rho=rho, tuned=True, adjustments=adjustments)
    leftover = validate_params(params, G, R, alpha)
    if leftover:
        raise AssertionError(f"tuning left invariants violated: {leftover}")
    return params


def tune_params_fullrank(T: int, n: int, G: float, R: float, alpha: float) -> Params:
    """Horizon-tuned parameters with the ambient dimension driving K."""
    return _tune(T, n, G, R, alpha, "fullrank", None)


def tune_params_lowdim(T: int, rho: int, G: float, R: float, alpha: float,
                       sketch: bool = False) -> Params:
    """Same tuning with the effective dimension rho in place of n.

    With sketch=True the run also replaces the dense metric by a
    frequent-directions sketch of size rho.
    """
    return _tune(T, rho, G, R, alpha, "sketch" if sketch else "lowdim", int(rho))


def theoretical_regret_bound(params: Params, G: float, R: float, alpha: float,
                             beta: float, q: int, c: float = 1e6) -> float:
    """Closed-form regret guarantee R_T = O(beta R^2 T^{2/3} log T + ...).

    q is the dimension parameter the tuning used (n or rho); c is the
    log-argument constant knob (the guarantee is asymptotic, so the
    absolute constant inside the log is reported, not hidden).
    """
    T = params.T
    log_term = math.log((c + c / (R * R * G * G * alpha * alpha)) * T ** (1.0 / 3.0))
    t23 = T ** (2.0 / 3.0)
    return (
        9.0 * beta * R * R * t23 * log_term
        + 2.0 * R * G * q ** (1.0 / 3.0) * t23
        + (36.0 * G * R + 4.0 / alpha) * q ** (2.0 / 3.0) * t23 * log_term
    )


def loo_call_budget(params: Params, G: float, R: float) -> float:
    """Upper bound on total linear-oracle calls for a full run."""
    p = params
    log_arg = 19.0 + 4.0 * p.eta**2 * p.K**2 * G * G / (p.eps * p.eps_I)
    per_round = (p.eps_I + G * G * p.K * p.T) / (p.K * p.eps)
    return 61.0 * R * R * math.log(log_arg) * per_round * p.T


def tuned_loo_budget(T: int, q: int) -> float:
    """Oracle budget 0.65 (8 q^{1/3} T^{2/3} + T) for tuned runs."""
    return 0.65 * (8.0 * q ** (1.0 / 3.0) * T ** (2.0 / 3.0) + T)


@dataclass
class BlockRow:
    """Diagnostics for one block; the pair described is the one played."""

    m: int
    block_len: int
    fw_iters: int
    pull_iters: int
    loo_calls_cum: int
    loss_cum: float
    regret_cum: float | None
    afp_dist_sq: float


@dataclass
class RunDiagnostics:
    """Optional extras collected when the dimension is small enough."""

    energy_per_block: list = field(default_factory=list)
    gbar_per_block: list = field(default_factory=list)
    metric_per_block: list = field(default_factory=list)
    anchor_norms: list = field(default_factory=list)
    pair_dist_euclid_sq: list = field(default_factory=list)
    grad_cov: np.ndarray | None = None
    sigma_total: float = 0.0
    fw_caps_ok: bool = True
    used_cap_slack: bool = False


@dataclass
class OfflineSolution:
    x: np.ndarray
    value: float
    residual: float
    iterations: int
    converged: bool
    sampled_beaten: bool = False


@dataclass
class RunReport:
    params: Params
    constants: dict
    rows: list
    play_losses: np.ndarray
    counter: OracleCounter
    total_loss: float
    wallclock_sec: float
    warnings: list
    diagnostics: RunDiagnostics
    regret_curve: np.ndarray | None = None
    offline: OfflineSolution | None = None

    @property
    def total_loo_calls(self) -> int:
        return self.counter.loo_calls

    @property
    def final_regret(self) -> float:
        if self.regret_curve is None:
            raise ValueError("regret not computed yet; call compute_regret first")
        return float(self.regret_curve[-1])


_DIAG_DIM_LIMIT = 20


def run_online(
    losses,
    feasible_set: FeasibleSet,
    params: Params,
    seed: int,
    metric_strategy: str | None = None,
    collect_diagnostics: bool | None = None,
) -> RunReport:
    """Play the whole stream and return the per-block report.

    metric_strategy defaults to the sketch when params.mode == "sketch",
    the dense metric otherwise. Diagnostics (per-block dense metrics,
    gradient covariance, per-block energies) are collected automatically
    for dimensions <= 20 unless overridden.
    """
    losses = list(losses)
    n = feasible_set.dim
    consts = stream_constants(losses)
    G, R, alpha = consts["G"], feasible_set.radius_R, consts["alpha"]
    if len(losses) != params.T:
        raise ValueError(f"stream has {len(losses)} losses but params.T = {params.T}")
    bad = validate_params(params, G, R, alpha)
    if bad:
        raise ValueError("invalid params: " + "; ".join(bad))
    if metric_strategy is None:
        metric_strategy = "sketch" if params.mode == "sketch" else "exact"
    if metric_strategy not in ("exact", "sketch"):
        raise ValueError(f"metric_strategy must be 'exact' or 'sketch', got {metric_strategy!r}")
    if metric_strategy == "sketch":
        if params.rho is None:
            raise ValueError("sketch strategy needs params.rho")
        metric = SketchMetric(n, params.rho, params.eps_I)
    else:
        metric = ExactMetric(n, params.eps_I)
    if collect_diagnostics is None:
        collect_diagnostics = n <= _DIAG_DIM_LIMIT

    warnings = list(params.adjustments)
    if params.rho is not None and params.rho >= n:
        warnings.append(
            f"rho = {params.rho} >= ambient dimension {n}: the sketch saves nothing here"
        )

    started = time.perf_counter()
    counter = OracleCounter()
    diag = RunDiagnostics()
    if collect_diagnostics:
        diag.grad_cov = np.zeros((n, n))
    rng_init = rng_for(seed, "init")
    x = np.asarray(feasible_set.sample_point(rng_init), dtype=float)
    ytilde = x.copy()

    T, K = params.T, params.K
    domain_radius = 3.0 * R
    play_losses = np.empty(T)
    rows: list[BlockRow] = []
    pending_fw, pending_pull, pending_dist = 0, 0, 0.0
    loss_cum = 0.0
    t = 0
    m = 0
    while t < T:
        m += 1
        block_len = min(K, T - t)
        anchor_norm = float(np.linalg.norm(ytilde))
        if anchor_norm > domain_radius + 1e-9:
            raise ContractViolationError(
                f"anchor left the loss domain: ||ytilde|| = {anchor_norm:.6g} > 3R = {domain_radius:.6g}"
            )
        gbar = np.zeros(n)
        for j in range(block_len):
            loss = losses[t + j]
            play_losses[t + j] = loss.value(x)
            g = loss.grad(ytilde)
            gbar += g
            if collect_diagnostics:
                diag.grad_cov += np.outer(g, g)
        loss_cum += float(np.sum(play_losses[t : t + block_len]))
        t += block_len

        metric.update(gbar)
        if collect_diagnostics:
            diag.energy_per_block.append(float(gbar @ metric.inv_apply(gbar)))
            diag.gbar_per_block.append(gbar.copy())
            diag.anchor_norms.append(anchor_norm)
            diag.pair_dist_euclid_sq.append(float(np.sum((x - ytilde) ** 2)))
            if metric_strategy == "sketch":
                diag.metric_per_block.append(metric.reconstruct_dense())
            else:
                diag.metric_per_block.append(metric.mat.copy())

        y_next = ytilde - params.eta * metric.inv_apply(gbar)
        row = BlockRow(m, block_len, pending_fw, pending_pull, 0, loss_cum, None, pending_dist)
        afp = approx_feasible_projection(feasible_set, metric, y_next, x, params.eps, counter)
        row.loo_calls_cum = counter.loo_calls
        rows.append(row)
        diag.fw_caps_ok = diag.fw_caps_ok and afp.fw_caps_ok
        diag.used_cap_slack = diag.used_cap_slack or afp.used_cap_slack
        pending_fw = afp.fw_iterations_total
        pending_pull = afp.pull_iterations
        pending_dist = afp.final_dist_sq
        x, ytilde = afp.x, afp.y_tilde

    if counter.loo_calls != counter.fw_iterations:
        raise ContractViolationError(
            f"oracle accounting broke: {counter.loo_calls} LOO calls vs "
            f"{counter.fw_iterations} separation iterations"
        )
    if isinstance(metric, SketchMetric):
        diag.sigma_total = metric.sigma_total
    return RunReport(
        params=params,
        constants={"G": G, "beta": consts["beta"], "alpha": alpha, "R": R, "n": n},
        rows=rows,
        play_losses=play_losses,
        counter=counter,
        total_loss=float(np.sum(play_losses)),
        wallclock_sec=time.perf_counter() - started,
        warnings=warnings,
        diagnostics=diag,
    )


def offline_best(losses, feasible_set: FeasibleSet, seed: int = 0,
                 max_iterations: int = 100_000, tol: float = 1e-9) -> OfflineSolution:
    """Minimize the summed loss over the set by projected gradient descent.

    Runs until the gradient-mapping norm drops to `tol` or the iteration
    budget runs out (non-convergence is reported, not fatal). As a guard
    the solution is compared against 100 random feasible points; a sampled
    point beating the solver marks the solution accordingly and the better
    value is kept.
    """
    losses = list(losses)
    value_fn, grad_fn = total_value_and_grad(losses)
    lipschitz = sum(f.beta for f in losses)
    if lipschitz <= 0:
        raise ValueError("total smoothness must be positive")
    step = 1.0 / lipschitz
    x = feasible_set.euclid_project(np.zeros(feasible_set.dim))
    residual = math.inf
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        moved = feasible_set.euclid_project(x - step * grad_fn(x))
        residual = float(np.linalg.norm(x - moved)) / step
        x = moved
        if residual <= tol:
            break
    converged = residual <= tol
    value = value_fn(x)

    rng = rng_for(seed, "offline")
    sampled_beaten = False
    for _ in range(100):
        z = feasible_set.sample_point(rng)
        vz = value_fn(z)
        if vz < value * (1.0 - 1e-12) - 1e-12:
            sampled_beaten = True
            x, value = np.asarray(z, dtype=float), vz
    return OfflineSolution(x, float(value), residual, iterations, converged, sampled_beaten)


def compute_regret(report, losses, feasible_set: FeasibleSet, seed: int = 0,
                   offline: OfflineSolution | None = None) -> np.ndarray:
    """Fill the report's regret curve against the offline optimum.

    Works for the online Newton report and for baseline reports (anything
    with a `play_losses` array; block rows are filled when present).
    """
    losses = list(losses)
    if offline is None:
        offline = offline_best(losses, feasible_set, seed)
    opt_values = batch_values(losses, offline.x)
    curve = np.cumsum(report.play_losses - opt_values)
    report.regret_curve = curve
    report.offline = offline
    rows = getattr(report, "rows", None)
    if rows:
        end = 0
        for row in rows:
            end += row.block_len
            row.regret_cum = float(curve[end - 1])
    return curve
