"""End-to-end experiment pipeline: stream generation, the online run,
regret accounting, invariant verification, and report emission.

Outputs per run:
  report.json   parameters, constants, totals, bounds, named checks
  blocks.csv    one row per block (byte-deterministic for a fixed config)
  *.png         regret and per-block diagnostics figures (optional)
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import run_baseline_exact_ons_ball, run_baseline_ogd
from .config import RunConfig
from .errors import ConfigError
from .losses import LogPortfolioLoss, QuadraticLoss, stream_constants
from .ons import (
    OfflineSolution,
    Params,
    RunReport,
    compute_regret,
    loo_call_budget,
    offline_best,
    run_online,
    theoretical_regret_bound,
    tune_params_fullrank,
    tune_params_lowdim,
    tuned_loo_budget,
    validate_params,
)
from .seeding import rng_for
from .sets import FeasibleSet


# ---------------------------------------------------------------------------
# Stream generation


def generate_lowdim_stream(n: int, rho: int, T: int, feasible_set: FeasibleSet,
                           seed: int, noise: float = 0.05,
                           normalize_gradients: bool = False) -> list:
    """Quadratic stream whose gradients live in a rho-dimensional subspace.

    Directions a_t are unit vectors in a fixed random rho-subspace; targets
    are b_t = a_t . x0 + noise * g_t for a planted feasible x0. Draws are
    arranged so that a longer horizon extends a shorter one: the first
    T' losses coincide for any T' < T under the same seed. rho = n gives a
    full-rank stream. With normalize_gradients each loss is rescaled so its
    gradient bound G_t equals 1 to machine precision.
    """
    if not 1 <= rho <= n:
        raise ValueError(f"need 1 <= rho <= n, got rho={rho}, n={n}")
    if T < 1:
        raise ValueError("T must be >= 1")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    rng = rng_for(seed, "stream")
    basis, _ = np.linalg.qr(rng.standard_normal((n, rho)))
    planted = np.asarray(feasible_set.sample_point(rng), dtype=float)
    draws = rng.standard_normal((T, rho + 1))  # row t: z_t then the noise draw
    directions = draws[:, :rho] @ basis.T
    norms = np.linalg.norm(directions, axis=1)
    degenerate = norms < 1e-12
    if np.any(degenerate):
        directions[degenerate] = basis[:, 0]
        norms[degenerate] = 1.0
    directions /= norms[:, None]
    targets = directions @ planted + noise * draws[:, rho]
    radius = feasible_set.radius_R
    out = []
    for t in range(T):
        scale = 1.0
        if normalize_gradients:
            d_t = 3.0 * radius + abs(targets[t])  # ||a_t|| = 1
            scale = 1.0 / (2.0 * d_t)
        out.append(QuadraticLoss(directions[t], float(targets[t]), radius, scale))
    return out


def generate_portfolio_stream(n: int, T: int, feasible_set: FeasibleSet, seed: int,
                              margin: float = 5.0) -> list:
    """Log-portfolio stream with unit-norm positive return vectors.

    The shift c_t = 3 R ||r_t|| + margin keeps the argument bounded away
    from zero on the whole loss domain; margin >= 5 leaves the curvature
    condition a real analytic margin at the minimal admissible eta.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if not margin > 0:
        raise ValueError("margin must be positive")
    rng = rng_for(seed, "stream")
    radius = feasible_set.radius_R
    out = []
    for _ in range(T):
        r = np.abs(rng.standard_normal(n))
        norm = float(np.linalg.norm(r))
        if norm < 1e-12:
            r = np.ones(n)
            norm = float(np.linalg.norm(r))
        r /= norm
        out.append(LogPortfolioLoss(r, 3.0 * radius + margin, radius))
    return out


def make_losses(config: RunConfig, feasible_set: FeasibleSet) -> list:
    spec = config.loss_spec
    if spec["family"] == "quadratic":
        rho = spec.get("stream_rho")
        if rho is None:
            rho = feasible_set.dim
        if rho > feasible_set.dim:
            raise ConfigError(
                f"losses.stream_rho = {rho} exceeds the set dimension {feasible_set.dim}"
            )
        return generate_lowdim_stream(
            feasible_set.dim, rho, config.T, feasible_set, config.seed,
            noise=spec.get("noise", 0.05),
            normalize_gradients=spec.get("normalize_gradients", False),
        )
    return generate_portfolio_stream(
        feasible_set.dim, config.T, feasible_set, config.seed,
        margin=spec.get("margin", 5.0),
    )


def build_params(config: RunConfig, feasible_set: FeasibleSet, losses) -> Params:
    """Tune for the configured mode, then apply manual overrides."""
    consts = stream_constants(losses)
    G, alpha = consts["G"], consts["alpha"]
    R = feasible_set.radius_R
    if config.mode_kind == "fullrank":
        params = tune_params_fullrank(config.T, feasible_set.dim, G, R, alpha)
    else:
        params = tune_params_lowdim(config.T, config.mode_rho, G, R, alpha,
                                    sketch=config.mode_kind == "sketch")
    if config.overrides:
        for key, value in config.overrides.items():
            setattr(params, "eps_I" if key == "eps_I" else key, value)
        params.tuned = False
        violations = validate_params(params, G, R, alpha)
        if violations:
            raise ConfigError("overrides violate parameter invariants: " + "; ".join(violations))
    return params


# ---------------------------------------------------------------------------
# Invariant verification


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def verify_run(report: RunReport) -> list[CheckResult]:
    """Evaluate the named invariant checklist against a finished run."""
    checks: list[CheckResult] = []
    p = report.params
    consts = report.constants
    G, R = consts["G"], consts["R"]

    bad = validate_params(p, G, R, consts["alpha"])
    checks.append(CheckResult("params_invariants", not bad, "; ".join(bad)))

    late = [row.afp_dist_sq for row in report.rows if row.m >= 2]
    limit = 3.0 * p.eps * (1.0 + 1e-9)
    worst = max(late, default=0.0)
    checks.append(
        CheckResult(
            "afp_proximity",
            all(d <= limit for d in late),
            f"max ||x - ytilde||_A^2 = {worst:.6g} vs 3 eps = {3.0 * p.eps:.6g}",
        )
    )

    diag = report.diagnostics
    if diag.anchor_norms:
        anchor_ok = all(a <= 3.0 * R + 1e-9 for a in diag.anchor_norms)
        euclid_limit = 3.0 * p.eps / p.eps_I + 1e-9
        euclid_ok = all(d <= euclid_limit for d in diag.pair_dist_euclid_sq)
        checks.append(
            CheckResult(
                "anchor_containment",
                anchor_ok and euclid_ok,
                f"max ||ytilde|| = {max(diag.anchor_norms):.6g} (limit {3.0 * R:.6g}); "
                f"max ||x - ytilde||^2 = {max(diag.pair_dist_euclid_sq):.6g} "
                f"(limit {euclid_limit:.6g})",
            )
        )

    counter = report.counter
    checks.append(
        CheckResult(
            "counter_consistency",
            counter.loo_calls == counter.fw_iterations,
            f"loo_calls={counter.loo_calls}, fw_iterations={counter.fw_iterations}",
        )
    )

    budget = loo_call_budget(p, G, R)
    checks.append(
        CheckResult(
            "loo_budget",
            counter.loo_calls <= budget,
            f"{counter.loo_calls} calls vs budget {budget:.6g}",
        )
    )
    if p.tuned:
        q = p.rho if p.mode in ("lowdim", "sketch") else consts["n"]
        tuned_budget = tuned_loo_budget(p.T, q)
        checks.append(
            CheckResult(
                "loo_budget_tuned",
                counter.loo_calls <= tuned_budget,
                f"{counter.loo_calls} calls vs 0.65 (8 q^(1/3) T^(2/3) + T) = {tuned_budget:.6g}",
            )
        )

    checks.append(
        CheckResult(
            "per_call_caps",
            diag.fw_caps_ok and not diag.used_cap_slack,
            f"fw_caps_ok={diag.fw_caps_ok}, pull_cap_slack_used={diag.used_cap_slack}",
        )
    )

    if diag.metric_per_block:
        ok, detail = _check_metric_ordering(diag, p.eps_I)
        checks.append(CheckResult("metric_ordering", ok, detail))
    if diag.energy_per_block and diag.grad_cov is not None:
        ok, detail = _check_energy_bound(report)
        checks.append(CheckResult("energy_bound", ok, detail))
    return checks


def _check_metric_ordering(diag, eps_I: float, slack: float = 1e-8) -> tuple[bool, str]:
    """A_0 <= A_m <= A_{m-1} + gbar gbar^T in the PSD order, per block."""
    n = diag.metric_per_block[0].shape[0]
    prev = eps_I * np.eye(n)
    worst_low = worst_high = np.inf
    for mat, gbar in zip(diag.metric_per_block, diag.gbar_per_block):
        low = float(np.linalg.eigvalsh(mat - eps_I * np.eye(n))[0])
        high = float(np.linalg.eigvalsh(prev + np.outer(gbar, gbar) - mat)[0])
        worst_low = min(worst_low, low)
        worst_high = min(worst_high, high)
        prev = mat
    ok = worst_low >= -slack and worst_high >= -slack
    return ok, f"min eig(A_m - A_0) = {worst_low:.3e}, min eig(A_(m-1) + g g^T - A_m) = {worst_high:.3e}"


def _check_energy_bound(report: RunReport, rel_slack: float = 1e-6) -> tuple[bool, str]:
    """Sum of ||gbar_m||^2 in the inverse metric against its closed-form cap.

    Exact metric: for every split point r, the energy is at most
    r log((T K G^2 + eps_I)/eps_I) + (K/eps_I) * (tail eigenvalue mass of
    the per-round gradient covariance beyond r). Sketch of size rho:
    rho log(1 + G^2 K T / eps_I) + (rho+1) K Omega_rho / eps_I.
    """
    p = report.params
    G = report.constants["G"]
    energy = float(np.sum(report.diagnostics.energy_per_block))
    eigvals = np.sort(np.linalg.eigvalsh(report.diagnostics.grad_cov))[::-1]
    if p.mode == "sketch":
        rho = p.rho
        omega = float(np.sum(eigvals[rho:]))
        bound = rho * math.log(1.0 + G * G * p.K * p.T / p.eps_I) \
            + (rho + 1.0) * p.K * omega / p.eps_I
        ok = energy <= bound * (1.0 + rel_slack)
        return ok, f"energy {energy:.6g} vs sketch bound {bound:.6g} (rho={rho})"
    log_term = math.log((p.T * p.K * G * G + p.eps_I) / p.eps_I)
    worst_margin = np.inf
    worst_r = 0
    for r in range(1, eigvals.size + 1):
        bound = r * log_term + p.K * float(np.sum(eigvals[r:])) / p.eps_I
        margin = bound * (1.0 + rel_slack) - energy
        if margin < worst_margin:
            worst_margin, worst_r = margin, r
    ok = worst_margin >= 0.0
    return ok, f"energy {energy:.6g}; tightest split r={worst_r} leaves margin {worst_margin:.6g}"


# ---------------------------------------------------------------------------
# Serialization (17 significant digits, atomic writes)


def format_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise ValueError(f"refusing to serialize non-finite float {x!r}")
    return f"{float(x):.17g}"


def _json17(obj, indent: int) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (list, tuple, np.ndarray)):
        items = [_json17(v, indent + 1) for v in list(obj)]
        if not items:
            return "[]"
        return "[\n" + ",\n".join(inner + it for it in items) + "\n" + pad + "]"
    if isinstance(obj, dict):
        items = [
            f"{inner}{json.dumps(str(k))}: {_json17(v, indent + 1)}" for k, v in obj.items()
        ]
        if not items:
            return "{}"
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_report(obj: dict) -> str:
    return _json17(obj, 0) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


BLOCKS_HEADER = "m,block_len,fw_iters,pull_iters,loo_calls_cum,loss_cum,regret_cum,afp_dist_sq"


def write_blocks_csv(path, rows) -> None:
    lines = [BLOCKS_HEADER]
    for row in rows:
        if row.regret_cum is None:
            raise ValueError("regret_cum not filled; compute_regret must run before writing")
        lines.append(
            ",".join(
                [
                    str(row.m),
                    str(row.block_len),
                    str(row.fw_iters),
                    str(row.pull_iters),
                    str(row.loo_calls_cum),
                    format_float(row.loss_cum),
                    format_float(row.regret_cum),
                    format_float(row.afp_dist_sq),
                ]
            )
        )
    _atomic_write(Path(path), "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# The pipeline


@dataclass
class ExperimentResult:
    config: RunConfig
    report: RunReport
    baseline_reports: dict
    checks: list
    out_dir: Path | None = None
    files: dict = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def run_experiment(config: RunConfig, output_dir=None, render_figures: bool = True,
                   write_outputs: bool = True) -> ExperimentResult:
    feasible_set = config.build_set()
    losses = make_losses(config, feasible_set)
    params = build_params(config, feasible_set, losses)
    report = run_online(losses, feasible_set, params, config.seed)

    offline = offline_best(losses, feasible_set, config.seed)
    compute_regret(report, losses, feasible_set, config.seed, offline)
    if not offline.converged:
        report.warnings.append(
            f"offline solver stopped at residual {offline.residual:.3e} "
            f"after {offline.iterations} iterations"
        )
    if offline.sampled_beaten:
        report.warnings.append("offline solver was beaten by a sampled feasible point")

    baseline_reports = {}
    for name in config.baselines:
        if name == "ogd":
            b = run_baseline_ogd(losses, feasible_set, config.seed)
        else:
            b = run_baseline_exact_ons_ball(losses, feasible_set, config.seed)
        compute_regret(b, losses, feasible_set, config.seed, offline)
        baseline_reports[name] = b

    checks = verify_run(report)
    result = ExperimentResult(config, report, baseline_reports, checks)

    if write_outputs:
        out_dir = Path(output_dir) if output_dir is not None else _default_out_dir(config)
        out_dir.mkdir(parents=True, exist_ok=True)
        result.out_dir = out_dir
        write_blocks_csv(out_dir / "blocks.csv", report.rows)
        result.files["blocks"] = out_dir / "blocks.csv"
        payload = build_report_payload(config, report, baseline_reports, checks)
        _atomic_write(out_dir / "report.json", dumps_report(payload))
        result.files["report"] = out_dir / "report.json"
        if render_figures:
            from . import figures

            result.files.update(figures.render_run_figures(out_dir, report, baseline_reports))
    return result


def _default_out_dir(config: RunConfig) -> Path:
    if config.output_dir:
        return Path(config.output_dir)
    return Path("runs") / f"{config.set_spec['kind']}_{config.mode_kind}_T{config.T}_seed{config.seed}"


def build_report_payload(config: RunConfig, report: RunReport, baseline_reports: dict,
                         checks: list) -> dict:
    p = report.params
    consts = report.constants
    q = p.rho if p.mode in ("lowdim", "sketch") else consts["n"]
    offline = report.offline
    bounds = {
        "loo_budget": loo_call_budget(p, consts["G"], consts["R"]),
        "loo_budget_tuned": tuned_loo_budget(p.T, q) if p.tuned else None,
        "regret_bound": theoretical_regret_bound(
            p, consts["G"], consts["R"], consts["alpha"], consts["beta"], q
        ),
        "regret_bound_log_constant": 1e6,
    }
    baselines_payload = {
        name: {
            "final_regret": b.final_regret,
            "total_loss": b.total_loss,
        }
        for name, b in baseline_reports.items()
    }
    return {
        "config": config.raw,
        "params": p.as_dict(),
        "constants": consts,
        "totals": {
            "blocks": len(report.rows),
            "total_loo_calls": report.counter.loo_calls,
            "fw_iterations": report.counter.fw_iterations,
            "pull_iterations": report.counter.pull_iterations,
            "total_loss": report.total_loss,
            "final_regret": report.final_regret,
            "offline_value": offline.value,
            "offline_residual": offline.residual,
            "offline_iterations": offline.iterations,
            "offline_converged": offline.converged,
        },
        "bounds": bounds,
        "checks": [
            {"name": c.name, "passed": c.passed, "detail": c.detail} for c in checks
        ],
        "baselines": baselines_payload,
        "warnings": list(report.warnings),
        "timing": {"wallclock_sec": report.wallclock_sec},  # not deterministic
    }


# ---------------------------------------------------------------------------
# Sweeps


def run_sweep(config: RunConfig, horizons, output_dir=None,
              render_figures: bool = True) -> dict:
    """Run the config at several horizons; emit per-run outputs and a summary."""
    horizons = sorted(set(int(t) for t in horizons))
    if not horizons:
        raise ConfigError("sweep needs at least one horizon")
    out_dir = Path(output_dir) if output_dir is not None else _default_out_dir(config) / "sweep"
    entries = []
    for T in horizons:
        raw = dict(config.raw)
        raw["T"] = T
        sub = parse_sub(raw)
        res = run_experiment(sub, out_dir / f"T_{T}", render_figures=render_figures)
        entries.append(
            {
                "T": T,
                "K": res.report.params.K,
                "final_regret": res.report.final_regret,
                "regret_per_round": res.report.final_regret / T,
                "total_loo_calls": res.report.counter.loo_calls,
                "all_checks_passed": res.all_passed,
                "ogd_final_regret": (
                    res.baseline_reports["ogd"].final_regret
                    if "ogd" in res.baseline_reports else None
                ),
                "result": res,
            }
        )
    lines = ["T,K,final_regret,regret_per_round,total_loo_calls,ogd_final_regret"]
    for e in entries:
        ogd = "" if e["ogd_final_regret"] is None else format_float(e["ogd_final_regret"])
        lines.append(
            f"{e['T']},{e['K']},{format_float(e['final_regret'])},"
            f"{format_float(e['regret_per_round'])},{e['total_loo_calls']},{ogd}"
        )
    out_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write(out_dir / "sweep.csv", "\n".join(lines) + "\n")
    slope = regret_slope([e["T"] for e in entries], [e["final_regret"] for e in entries])
    summary = {"entries": entries, "slope": slope, "out_dir": out_dir}
    if render_figures and len(entries) >= 2:
        from . import figures

        summary["figure"] = figures.render_sweep_figure(out_dir, entries, slope)
    return summary


def parse_sub(raw: dict) -> RunConfig:
    from .config import parse_config

    return parse_config(raw)


def regret_slope(horizons, regrets) -> float | None:
    """Least-squares slope of log regret against log horizon."""
    if len(horizons) < 2 or any(r <= 0 for r in regrets):
        return None
    coeffs = np.polyfit(np.log(np.asarray(horizons, dtype=float)),
                        np.log(np.asarray(regrets, dtype=float)), 1)
    return float(coeffs[0])
