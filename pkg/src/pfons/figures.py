"""Figure rendering for run and sweep reports.

Kept in its own module so the pipeline only pays the matplotlib import
when figures are actually requested.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_run_figures(out_dir, report, baseline_reports) -> dict:
    out_dir = Path(out_dir)
    files = {}

    fig, ax = plt.subplots(figsize=(7, 4.5))
    t = np.arange(1, report.play_losses.size + 1)
    ax.plot(t, report.regret_curve, label="projection-free ONS", lw=1.8)
    for name, b in baseline_reports.items():
        if b.regret_curve is not None:
            ax.plot(t, b.regret_curve, label=name, lw=1.2, alpha=0.85)
    ax.set_xlabel("round t")
    ax.set_ylabel("cumulative regret")
    ax.set_title(f"regret, T={report.params.T}, mode={report.params.mode}")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = out_dir / "regret_curve.png"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    files["regret_curve"] = path

    rows = report.rows
    fig, axes = plt.subplots(3, 1, figsize=(7, 7.5), sharex=True)
    ms = [row.m for row in rows]
    axes[0].bar(ms, [row.fw_iters for row in rows], color="tab:blue", label="separation iters")
    axes[0].bar(ms, [row.pull_iters for row in rows], color="tab:orange",
                label="pull iters", alpha=0.8)
    axes[0].set_ylabel("per-block work")
    axes[0].legend()
    axes[1].plot(ms, [row.loo_calls_cum for row in rows], marker="o", ms=3)
    axes[1].set_ylabel("cumulative LOO calls")
    dist = [row.afp_dist_sq for row in rows]
    axes[2].semilogy(ms, np.maximum(dist, 1e-300), marker="o", ms=3)
    axes[2].axhline(3.0 * report.params.eps, color="tab:red", ls="--",
                    label="3 eps proximity bound")
    axes[2].set_ylabel(r"$\|x_m - \tilde{y}_m\|_A^2$")
    axes[2].set_xlabel("block m")
    axes[2].legend()
    for ax in axes:
        ax.grid(alpha=0.3)
    fig.tight_layout()
    path = out_dir / "block_diagnostics.png"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    files["block_diagnostics"] = path
    return files


def render_sweep_figure(out_dir, entries, slope) -> Path:
    out_dir = Path(out_dir)
    horizons = np.array([e["T"] for e in entries], dtype=float)
    regrets = np.array([e["final_regret"] for e in entries], dtype=float)
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    ax.loglog(horizons, regrets, marker="o", label="projection-free ONS")
    ogd = [e.get("ogd_final_regret") for e in entries]
    if all(v is not None for v in ogd):
        ax.loglog(horizons, ogd, marker="s", label="ogd", alpha=0.85)
    if slope is not None and np.all(regrets > 0):
        anchor = regrets[0] * (horizons / horizons[0]) ** slope
        ax.loglog(horizons, anchor, ls="--", color="gray",
                  label=f"fitted slope {slope:.3f}")
    ax.set_xlabel("horizon T")
    ax.set_ylabel("final regret")
    ax.legend()
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    path = out_dir / "sweep_regret.png"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
