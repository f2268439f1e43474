"""Pipeline tests: config validation, stream generation, parameter building,
run verification, serialization, file outputs, sweeps, and the command line."""

import copy
import json
import math
from pathlib import Path

import numpy as np
import pytest

from pfons import cli
from pfons import experiment as exp
from pfons.config import load_config, parse_config
from pfons.errors import ConfigError
from pfons.experiment import (
    BLOCKS_HEADER,
    CheckResult,
    build_params,
    build_report_payload,
    dumps_report,
    format_float,
    generate_lowdim_stream,
    generate_portfolio_stream,
    make_losses,
    regret_slope,
    run_experiment,
    run_sweep,
    verify_run,
    write_blocks_csv,
)
from pfons.losses import stream_constants
from pfons.ons import compute_regret, offline_best, run_online, tune_params_fullrank
from pfons.seeding import rng_for
from pfons.sets import make_set


def base_config(**kw):
    data = {
        "set": {"kind": "simplex", "dim": 4},
        "losses": {"family": "quadratic", "noise": 0.05},
        "T": 120,
        "mode": {"kind": "fullrank"},
        "seed": 7,
    }
    data.update(kw)
    return data


# Manual parameters that keep the approximate-projection tolerance small
# relative to the set, so the iterate actually moves at short horizons.
LEARN_OVERRIDES = {"K": 10, "eta": 240.0, "eps": 4.0, "eps_I": 400.0}


def learning_config(**kw):
    return base_config(
        losses={"family": "quadratic", "noise": 0.05, "normalize_gradients": True},
        overrides=dict(LEARN_OVERRIDES),
        **kw,
    )


@pytest.fixture(scope="module")
def learning_run():
    config = parse_config(learning_config())
    feasible_set = config.build_set()
    losses = make_losses(config, feasible_set)
    params = build_params(config, feasible_set, losses)
    report = run_online(losses, feasible_set, params, config.seed)
    offline = offline_best(losses, feasible_set, config.seed)
    compute_regret(report, losses, feasible_set, config.seed, offline)
    return config, feasible_set, losses, params, report


# ---------------------------------------------------------------------------
# Config validation


class TestConfigValidation:
    def test_minimal_config_parses(self):
        cfg = parse_config(base_config())
        assert cfg.T == 120
        assert cfg.mode_kind == "fullrank"
        assert cfg.mode_rho is None
        assert cfg.seed == 7
        assert cfg.overrides == {}
        assert cfg.baselines == []
        assert cfg.output_dir is None

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config(base_config(horizon=10))

    def test_missing_required_key(self):
        data = base_config()
        del data["mode"]
        with pytest.raises(ConfigError, match="missing key"):
            parse_config(data)

    def test_simplex_requires_dim(self):
        with pytest.raises(ConfigError, match="missing key"):
            parse_config(base_config(set={"kind": "simplex"}))

    def test_simplex_rejects_radius(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config(base_config(set={"kind": "simplex", "dim": 3, "radius": 1.0}))

    def test_ball_requires_radius(self):
        with pytest.raises(ConfigError, match="missing key"):
            parse_config(base_config(set={"kind": "l2_ball", "dim": 3}))

    def test_ball_radius_positive(self):
        with pytest.raises(ConfigError, match="positive"):
            parse_config(base_config(set={"kind": "l2_ball", "dim": 3, "radius": 0}))

    def test_dim_must_be_positive_int(self):
        with pytest.raises(ConfigError, match="integer|>="):
            parse_config(base_config(set={"kind": "simplex", "dim": 0}))
        with pytest.raises(ConfigError, match="integer"):
            parse_config(base_config(set={"kind": "simplex", "dim": 2.5}))

    def test_box_needs_equal_length_bounds(self):
        with pytest.raises(ConfigError, match="equal length"):
            parse_config(base_config(set={"kind": "box", "lo": [0, 0], "hi": [1.0]}))

    def test_box_bounds_must_be_numbers(self):
        with pytest.raises(ConfigError, match="numbers"):
            parse_config(base_config(set={"kind": "box", "lo": [0, "a"], "hi": [1, 2]}))

    def test_unknown_set_kind(self):
        with pytest.raises(ConfigError, match="unknown set kind"):
            parse_config(base_config(set={"kind": "torus", "dim": 3}))

    def test_build_set_all_kinds(self):
        specs = [
            ({"kind": "simplex", "dim": 5}, "simplex", 5),
            ({"kind": "l2_ball", "dim": 3, "radius": 2.0}, "l2_ball", 3),
            ({"kind": "l1_ball", "dim": 4, "radius": 1.5}, "l1_ball", 4),
            ({"kind": "box", "lo": [-1, 0], "hi": [1, 2]}, "box", 2),
        ]
        for spec, kind, dim in specs:
            fs = parse_config(base_config(set=spec)).build_set()
            assert fs.kind == kind
            assert fs.dim == dim

    def test_quadratic_rejects_margin(self):
        with pytest.raises(ConfigError, match="not valid for quadratic"):
            parse_config(base_config(losses={"family": "quadratic", "margin": 2.0}))

    def test_portfolio_rejects_stream_keys(self):
        with pytest.raises(ConfigError, match="not valid for log_portfolio"):
            parse_config(base_config(losses={"family": "log_portfolio", "noise": 0.1}))

    def test_unknown_loss_family(self):
        with pytest.raises(ConfigError, match="unknown loss family"):
            parse_config(base_config(losses={"family": "hinge"}))

    def test_noise_nonnegative(self):
        with pytest.raises(ConfigError, match="noise"):
            parse_config(base_config(losses={"family": "quadratic", "noise": -0.1}))

    def test_normalize_gradients_boolean(self):
        with pytest.raises(ConfigError, match="boolean"):
            parse_config(
                base_config(losses={"family": "quadratic", "normalize_gradients": "yes"})
            )

    def test_margin_positive(self):
        with pytest.raises(ConfigError, match="positive"):
            parse_config(base_config(losses={"family": "log_portfolio", "margin": 0}))

    def test_stream_rho_at_least_one(self):
        with pytest.raises(ConfigError, match="stream_rho"):
            parse_config(base_config(losses={"family": "quadratic", "stream_rho": 0}))

    def test_horizon_rules(self):
        with pytest.raises(ConfigError, match=">= 1"):
            parse_config(base_config(T=0))
        with pytest.raises(ConfigError, match="integer"):
            parse_config(base_config(T=12.5))
        with pytest.raises(ConfigError, match="integer"):
            parse_config(base_config(T=True))

    def test_seed_is_any_integer(self):
        assert parse_config(base_config(seed=-3)).seed == -3
        with pytest.raises(ConfigError, match="integer"):
            parse_config(base_config(seed="seven"))

    def test_fullrank_rejects_rho(self):
        with pytest.raises(ConfigError, match="not valid for fullrank"):
            parse_config(base_config(mode={"kind": "fullrank", "rho": 2}))

    def test_lowdim_requires_rho(self):
        with pytest.raises(ConfigError, match="requires mode.rho"):
            parse_config(base_config(mode={"kind": "lowdim"}))

    def test_sketch_rho_positive(self):
        with pytest.raises(ConfigError, match=">= 1"):
            parse_config(base_config(mode={"kind": "sketch", "rho": 0}))

    def test_unknown_mode_kind(self):
        with pytest.raises(ConfigError, match="unknown mode kind"):
            parse_config(base_config(mode={"kind": "banded"}))

    def test_mode_rho_round_trip(self):
        cfg = parse_config(base_config(mode={"kind": "lowdim", "rho": 2}))
        assert cfg.mode_kind == "lowdim"
        assert cfg.mode_rho == 2

    def test_override_keys_checked(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config(base_config(overrides={"step_size": 0.1}))

    def test_override_types_checked(self):
        with pytest.raises(ConfigError, match="integer"):
            parse_config(base_config(overrides={"K": 10.5}))
        with pytest.raises(ConfigError, match="positive"):
            parse_config(base_config(overrides={"eta": -1.0}))
        with pytest.raises(ConfigError, match="number"):
            parse_config(base_config(overrides={"eps_I": "big"}))

    def test_valid_overrides_preserved(self):
        cfg = parse_config(base_config(overrides=dict(LEARN_OVERRIDES)))
        assert cfg.overrides == LEARN_OVERRIDES

    def test_baselines_must_be_known(self):
        with pytest.raises(ConfigError, match="unknown baseline"):
            parse_config(base_config(baselines=["sgd"]))
        with pytest.raises(ConfigError, match="list of strings"):
            parse_config(base_config(baselines="ogd"))

    def test_exact_newton_baseline_needs_ball(self):
        with pytest.raises(ConfigError, match="l2_ball"):
            parse_config(base_config(baselines=["exact_ons_ball"]))
        cfg = parse_config(
            base_config(
                set={"kind": "l2_ball", "dim": 3, "radius": 1.0},
                baselines=["ogd", "exact_ons_ball"],
            )
        )
        assert cfg.baselines == ["ogd", "exact_ons_ball"]

    def test_output_dir_must_be_string(self):
        with pytest.raises(ConfigError, match="output_dir"):
            parse_config(base_config(output_dir=17))
        assert parse_config(base_config(output_dir="runs/x")).output_dir == "runs/x"

    def test_load_config_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "nope.json")

    def test_load_config_bad_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(p)

    def test_load_config_non_object_root(self, tmp_path):
        p = tmp_path / "list.json"
        p.write_text("[1, 2, 3]")
        with pytest.raises(ConfigError, match="JSON object"):
            load_config(p)

    def test_load_config_round_trip(self, tmp_path):
        p = tmp_path / "ok.json"
        p.write_text(json.dumps(base_config()))
        cfg = load_config(p)
        assert cfg.T == 120
        assert cfg.set_spec["kind"] == "simplex"


# ---------------------------------------------------------------------------
# Stream generation


class TestStreamGeneration:
    def test_longer_horizon_extends_shorter(self):
        fs = make_set("simplex", dim=5)
        short = generate_lowdim_stream(5, 2, 50, fs, seed=11)
        full = generate_lowdim_stream(5, 2, 100, fs, seed=11)
        assert len(short) == 50 and len(full) == 100
        for a, b in zip(short, full):
            assert np.array_equal(a.a, b.a)
            assert a.b == b.b
            assert a.scale == b.scale

    def test_fixed_seed_determinism(self):
        fs = make_set("l2_ball", dim=4, radius=2.0)
        s1 = generate_lowdim_stream(4, 3, 40, fs, seed=5)
        s2 = generate_lowdim_stream(4, 3, 40, fs, seed=5)
        for a, b in zip(s1, s2):
            assert np.array_equal(a.a, b.a) and a.b == b.b
        s3 = generate_lowdim_stream(4, 3, 40, fs, seed=6)
        assert any(not np.array_equal(a.a, b.a) for a, b in zip(s1, s3))

    def test_direction_rank_matches_stream_rho(self):
        fs = make_set("simplex", dim=6)
        for rho in (1, 3, 6):
            losses = generate_lowdim_stream(6, rho, 200, fs, seed=3)
            mat = np.array([l.a for l in losses])
            assert np.linalg.matrix_rank(mat, tol=1e-8) == rho

    def test_directions_are_unit_vectors(self):
        fs = make_set("simplex", dim=5)
        losses = generate_lowdim_stream(5, 2, 100, fs, seed=9)
        for l in losses:
            assert abs(np.linalg.norm(l.a) - 1.0) < 1e-12

    def test_normalized_stream_has_unit_gradient_bound(self):
        fs = make_set("simplex", dim=5)
        losses = generate_lowdim_stream(5, 5, 60, fs, seed=2, normalize_gradients=True)
        for l in losses:
            assert abs(l.G - 1.0) < 1e-15

    def test_stream_validation(self):
        fs = make_set("simplex", dim=4)
        with pytest.raises(ValueError, match="rho"):
            generate_lowdim_stream(4, 0, 10, fs, seed=0)
        with pytest.raises(ValueError, match="rho"):
            generate_lowdim_stream(4, 5, 10, fs, seed=0)
        with pytest.raises(ValueError, match="T"):
            generate_lowdim_stream(4, 2, 0, fs, seed=0)
        with pytest.raises(ValueError, match="noise"):
            generate_lowdim_stream(4, 2, 10, fs, seed=0, noise=-0.1)

    def test_portfolio_stream_constants(self):
        fs = make_set("simplex", dim=4)
        losses = generate_portfolio_stream(4, 30, fs, seed=5, margin=5.0)
        assert len(losses) == 30
        for l in losses:
            assert abs(np.linalg.norm(l.r) - 1.0) < 1e-12
            assert np.all(l.r >= 0.0)
            assert l.c == 3.0 * fs.radius_R + 5.0
            assert l.m_min == pytest.approx(5.0)
            assert l.G == pytest.approx(1.0 / 5.0)

    def test_portfolio_stream_validation(self):
        fs = make_set("simplex", dim=4)
        with pytest.raises(ValueError, match="T"):
            generate_portfolio_stream(4, 0, fs, seed=0)
        with pytest.raises(ValueError, match="margin"):
            generate_portfolio_stream(4, 10, fs, seed=0, margin=0.0)

    def test_make_losses_rejects_oversized_stream_rho(self):
        cfg = parse_config(
            base_config(losses={"family": "quadratic", "stream_rho": 10})
        )
        fs = cfg.build_set()
        with pytest.raises(ConfigError, match="exceeds the set dimension"):
            make_losses(cfg, fs)

    def test_make_losses_defaults_to_full_rank(self):
        cfg = parse_config(base_config(T=100))
        fs = cfg.build_set()
        losses = make_losses(cfg, fs)
        mat = np.array([l.a for l in losses])
        assert np.linalg.matrix_rank(mat, tol=1e-8) == fs.dim

    def test_make_losses_portfolio_family(self):
        cfg = parse_config(
            base_config(losses={"family": "log_portfolio", "margin": 2.0}, T=15)
        )
        fs = cfg.build_set()
        losses = make_losses(cfg, fs)
        assert len(losses) == 15
        assert all(l.c == 3.0 * fs.radius_R + 2.0 for l in losses)


# ---------------------------------------------------------------------------
# Parameter building


class TestBuildParams:
    def test_tuned_fullrank(self):
        cfg = parse_config(base_config())
        fs = cfg.build_set()
        losses = make_losses(cfg, fs)
        params = build_params(cfg, fs, losses)
        consts = stream_constants(losses)
        expected = tune_params_fullrank(cfg.T, fs.dim, consts["G"], fs.radius_R,
                                        consts["alpha"])
        assert params.tuned
        assert params.mode == "fullrank"
        assert params.K == expected.K
        assert params.eta == expected.eta
        assert params.eps == expected.eps
        assert params.eps_I == expected.eps_I

    def test_overrides_applied_and_revalidated(self):
        cfg = parse_config(learning_config())
        fs = cfg.build_set()
        losses = make_losses(cfg, fs)
        params = build_params(cfg, fs, losses)
        assert not params.tuned
        assert params.K == 10
        assert params.eta == 240.0
        assert params.eps == 4.0
        assert params.eps_I == 400.0

    def test_invalid_overrides_rejected(self):
        cfg = parse_config(base_config(overrides={"eps_I": 1.0}))
        fs = cfg.build_set()
        losses = make_losses(cfg, fs)
        with pytest.raises(ConfigError, match="overrides violate parameter invariants"):
            build_params(cfg, fs, losses)

    def test_lowdim_and_sketch_modes(self):
        for kind in ("lowdim", "sketch"):
            cfg = parse_config(base_config(mode={"kind": kind, "rho": 2}))
            fs = cfg.build_set()
            losses = make_losses(cfg, fs)
            params = build_params(cfg, fs, losses)
            assert params.mode == kind
            assert params.rho == 2
            assert params.tuned


# ---------------------------------------------------------------------------
# Run verification


EXPECTED_CHECKS = [
    "params_invariants",
    "afp_proximity",
    "anchor_containment",
    "counter_consistency",
    "loo_budget",
    "per_call_caps",
    "metric_ordering",
    "energy_bound",
]


class TestVerifyRun:
    def test_learning_run_passes_all_checks(self, learning_run):
        _, _, _, _, report = learning_run
        checks = verify_run(report)
        assert [c.name for c in checks] == EXPECTED_CHECKS
        failed = [f"{c.name}: {c.detail}" for c in checks if not c.passed]
        assert not failed, failed

    def test_tuned_run_adds_budget_check(self):
        cfg = parse_config(base_config(T=60, set={"kind": "simplex", "dim": 3}))
        fs = cfg.build_set()
        losses = make_losses(cfg, fs)
        params = build_params(cfg, fs, losses)
        report = run_online(losses, fs, params, cfg.seed)
        compute_regret(report, losses, fs, cfg.seed)
        checks = verify_run(report)
        names = [c.name for c in checks]
        assert "loo_budget_tuned" in names
        failed = [f"{c.name}: {c.detail}" for c in checks if not c.passed]
        assert not failed, failed

    def test_tampered_proximity_fails(self, learning_run):
        _, _, _, _, report = learning_run
        bad = copy.deepcopy(report)
        bad.rows[1].afp_dist_sq = 1e9
        results = {c.name: c.passed for c in verify_run(bad)}
        assert not results["afp_proximity"]

    def test_tampered_counter_fails(self, learning_run):
        _, _, _, _, report = learning_run
        bad = copy.deepcopy(report)
        bad.counter.loo_calls += 1
        results = {c.name: c.passed for c in verify_run(bad)}
        assert not results["counter_consistency"]

    def test_tampered_metric_fails(self, learning_run):
        _, _, _, _, report = learning_run
        bad = copy.deepcopy(report)
        bad.diagnostics.metric_per_block[0][0, 0] -= 1.0
        results = {c.name: c.passed for c in verify_run(bad)}
        assert not results["metric_ordering"]


# ---------------------------------------------------------------------------
# Serialization


class TestSerialization:
    def test_format_float_round_trips_exactly(self):
        rng = np.random.default_rng(0)
        values = list(rng.standard_normal(50))
        values += list(rng.standard_normal(20) * 1e300)
        values += list(rng.standard_normal(20) * 1e-300)
        values += [0.0, -0.0, 1.0 / 3.0, 0.1, 2.0**-1074, -(2.0**1023)]
        for x in values:
            assert float(format_float(float(x))) == float(x)

    def test_format_float_rejects_non_finite(self):
        for bad in (math.nan, math.inf, -math.inf):
            with pytest.raises(ValueError, match="non-finite"):
                format_float(bad)

    def test_dumps_report_round_trip(self):
        payload = {
            "ints": [1, 2, np.int64(3)],
            "floats": [0.1, np.float64(1.0 / 3.0)],
            "array": np.array([1.5, 2.5]),
            "nested": {"flag": True, "none": None, "text": "a \"quoted\" string"},
            "empty_list": [],
            "empty_dict": {},
        }
        text = dumps_report(payload)
        assert text.endswith("\n")
        parsed = json.loads(text)
        assert parsed["ints"] == [1, 2, 3]
        assert parsed["floats"] == [0.1, 1.0 / 3.0]
        assert parsed["array"] == [1.5, 2.5]
        assert parsed["nested"] == {"flag": True, "none": None, "text": 'a "quoted" string'}
        assert parsed["empty_list"] == [] and parsed["empty_dict"] == {}

    def test_dumps_report_rejects_unknown_types(self):
        with pytest.raises(TypeError, match="cannot serialize"):
            dumps_report({"bad": object()})
        with pytest.raises(ValueError, match="non-finite"):
            dumps_report({"bad": math.inf})


class TestBlocksCsv:
    def test_header_and_round_trip(self, learning_run, tmp_path):
        _, _, _, _, report = learning_run
        path = tmp_path / "blocks.csv"
        write_blocks_csv(path, report.rows)
        lines = path.read_text().splitlines()
        assert lines[0] == BLOCKS_HEADER
        assert len(lines) == len(report.rows) + 1
        first = lines[1].split(",")
        row = report.rows[0]
        assert int(first[0]) == row.m
        assert int(first[1]) == row.block_len
        assert int(first[4]) == row.loo_calls_cum
        assert float(first[5]) == row.loss_cum
        assert float(first[6]) == row.regret_cum
        assert float(first[7]) == row.afp_dist_sq

    def test_refuses_rows_without_regret(self, learning_run, tmp_path):
        _, fs, losses, params, _ = learning_run
        fresh = run_online(losses, fs, params, 7)
        with pytest.raises(ValueError, match="compute_regret"):
            write_blocks_csv(tmp_path / "x.csv", fresh.rows)


# ---------------------------------------------------------------------------
# End-to-end pipeline


PAYLOAD_KEYS = {
    "config", "params", "constants", "totals", "bounds", "checks",
    "baselines", "warnings", "timing",
}


class TestRunExperiment:
    def test_end_to_end_files_and_payload(self, tmp_path):
        cfg = parse_config(learning_config(baselines=["ogd"]))
        out = tmp_path / "out"
        result = run_experiment(cfg, output_dir=out, render_figures=True)
        assert result.all_passed, [c for c in result.checks if not c.passed]
        for name in ("blocks.csv", "report.json", "regret_curve.png",
                     "block_diagnostics.png"):
            f = out / name
            assert f.is_file() and f.stat().st_size > 0, name
        payload = json.loads((out / "report.json").read_text())
        assert set(payload) == PAYLOAD_KEYS
        assert payload["params"]["K"] == 10
        assert payload["params"]["tuned"] is False
        assert payload["totals"]["blocks"] == 12
        assert payload["totals"]["final_regret"] > 0
        assert payload["totals"]["total_loo_calls"] == result.report.counter.loo_calls
        assert payload["bounds"]["loo_budget_tuned"] is None
        assert all(c["passed"] for c in payload["checks"])
        assert "ogd" in payload["baselines"]
        assert payload["baselines"]["ogd"]["final_regret"] > 0
        assert payload["config"] == cfg.raw

    def test_learning_beats_frozen_start(self, tmp_path):
        cfg = parse_config(learning_config(baselines=["ogd"]))
        result = run_experiment(cfg, output_dir=tmp_path / "o", render_figures=False)
        fs = cfg.build_set()
        losses = make_losses(cfg, fs)
        x1 = fs.sample_point(rng_for(cfg.seed, "init"))
        frozen_regret = sum(l.value(x1) for l in losses) - result.report.offline.value
        assert result.report.final_regret < 0.5 * frozen_regret
        assert result.baseline_reports["ogd"].final_regret > 0

    def test_write_outputs_false_writes_nothing(self, tmp_path):
        cfg = parse_config(learning_config())
        result = run_experiment(cfg, output_dir=tmp_path / "never",
                                render_figures=True, write_outputs=False)
        assert result.out_dir is None
        assert result.files == {}
        assert not (tmp_path / "never").exists()
        assert result.report.final_regret is not None

    def test_no_figures_skips_pngs(self, tmp_path):
        cfg = parse_config(learning_config())
        out = tmp_path / "nf"
        result = run_experiment(cfg, output_dir=out, render_figures=False)
        assert (out / "blocks.csv").is_file()
        assert (out / "report.json").is_file()
        assert not list(out.glob("*.png"))
        assert set(result.files) == {"blocks", "report"}

    def test_byte_identical_reruns(self, tmp_path):
        cfg1 = parse_config(learning_config(baselines=["ogd"]))
        cfg2 = parse_config(learning_config(baselines=["ogd"]))
        r1 = run_experiment(cfg1, output_dir=tmp_path / "a", render_figures=False)
        r2 = run_experiment(cfg2, output_dir=tmp_path / "b", render_figures=False)
        assert (tmp_path / "a" / "blocks.csv").read_bytes() == \
            (tmp_path / "b" / "blocks.csv").read_bytes()
        p1 = json.loads((tmp_path / "a" / "report.json").read_text())
        p2 = json.loads((tmp_path / "b" / "report.json").read_text())
        p1.pop("timing")
        p2.pop("timing")
        assert p1 == p2
        assert r1.report.final_regret == r2.report.final_regret

    def test_tuned_small_run_passes_checks(self, tmp_path):
        cfg = parse_config(base_config(T=60, set={"kind": "simplex", "dim": 3}))
        result = run_experiment(cfg, output_dir=tmp_path / "t", render_figures=False)
        assert result.all_passed, [c for c in result.checks if not c.passed]
        payload = json.loads((tmp_path / "t" / "report.json").read_text())
        assert payload["params"]["tuned"] is True
        assert payload["bounds"]["loo_budget_tuned"] is not None

    def test_sketch_mode_pipeline(self, tmp_path):
        cfg = parse_config(
            base_config(
                T=60,
                set={"kind": "simplex", "dim": 6},
                mode={"kind": "sketch", "rho": 2},
            )
        )
        result = run_experiment(cfg, output_dir=tmp_path / "s", render_figures=False)
        assert result.report.params.mode == "sketch"
        assert result.all_passed, [c for c in result.checks if not c.passed]

    def test_default_out_dir_naming(self):
        cfg = parse_config(base_config())
        assert exp._default_out_dir(cfg) == Path("runs") / "simplex_fullrank_T120_seed7"
        cfg2 = parse_config(base_config(output_dir="custom/place"))
        assert exp._default_out_dir(cfg2) == Path("custom/place")

    def test_payload_builder_matches_report(self, learning_run):
        config, _, _, _, report = learning_run
        checks = verify_run(report)
        payload = build_report_payload(config, report, {}, checks)
        assert payload["totals"]["total_loss"] == report.total_loss
        assert payload["totals"]["final_regret"] == report.final_regret
        assert payload["constants"]["G"] == report.constants["G"]
        assert len(payload["checks"]) == len(checks)
        assert payload["baselines"] == {}


class TestRunSweep:
    def test_sweep_outputs(self, tmp_path):
        cfg = parse_config(learning_config(baselines=["ogd"]))
        out = tmp_path / "sw"
        summary = run_sweep(cfg, [120, 60, 60], output_dir=out, render_figures=True)
        entries = summary["entries"]
        assert [e["T"] for e in entries] == [60, 120]
        for e in entries:
            assert e["all_checks_passed"]
            assert e["final_regret"] > 0
            assert e["regret_per_round"] == pytest.approx(e["final_regret"] / e["T"])
            assert e["ogd_final_regret"] is not None
            sub = out / f"T_{e['T']}"
            assert (sub / "blocks.csv").is_file()
            assert (sub / "report.json").is_file()
        lines = (out / "sweep.csv").read_text().splitlines()
        assert lines[0] == "T,K,final_regret,regret_per_round,total_loo_calls,ogd_final_regret"
        assert len(lines) == 3
        assert lines[1].startswith("60,") and lines[2].startswith("120,")
        assert isinstance(summary["slope"], float)
        assert (out / "sweep_regret.png").is_file()

    def test_sweep_requires_horizons(self):
        cfg = parse_config(learning_config())
        with pytest.raises(ConfigError, match="at least one horizon"):
            run_sweep(cfg, [])

    def test_regret_slope_helper(self):
        assert regret_slope([10, 100], [1.0, 10.0]) == pytest.approx(1.0)
        assert regret_slope([10, 100, 1000], [2.0, 2.0, 2.0]) == pytest.approx(0.0)
        assert regret_slope([10], [1.0]) is None
        assert regret_slope([10, 100], [1.0, -1.0]) is None


# ---------------------------------------------------------------------------
# Command line


def write_config(tmp_path, data, name="config.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


class TestCli:
    def test_run_success(self, tmp_path, capsys):
        p = write_config(tmp_path, learning_config(baselines=["ogd"]))
        out = tmp_path / "out"
        rc = cli.main(["run", str(p), "--output-dir", str(out), "--no-figures"])
        captured = capsys.readouterr()
        assert rc == 0
        assert "run complete" in captured.out
        assert "PASS params_invariants" in captured.out
        assert "baseline ogd" in captured.out
        assert (out / "blocks.csv").is_file()
        assert (out / "report.json").is_file()
        assert not list(out.glob("*.png"))

    def test_verify_success(self, tmp_path, capsys):
        p = write_config(tmp_path, learning_config())
        rc = cli.main(["verify", str(p)])
        captured = capsys.readouterr()
        assert rc == 0
        for name in EXPECTED_CHECKS:
            assert f"PASS {name}" in captured.out
        assert not list(tmp_path.glob("**/blocks.csv"))

    def test_info_prints_parameters(self, tmp_path, capsys):
        p = write_config(tmp_path, learning_config())
        rc = cli.main(["info", str(p)])
        captured = capsys.readouterr()
        assert rc == 0
        assert "K=10" in captured.out
        assert "eta=240" in captured.out
        assert "regret bound:" in captured.out
        assert "loo budget:" in captured.out

    def test_info_tuned_shows_budget_and_adjustments(self, tmp_path, capsys):
        p = write_config(tmp_path, base_config(T=60))
        rc = cli.main(["info", str(p)])
        captured = capsys.readouterr()
        assert rc == 0
        assert "loo budget (tuned form):" in captured.out

    def test_sweep_success(self, tmp_path, capsys):
        p = write_config(tmp_path, learning_config())
        out = tmp_path / "sw"
        rc = cli.main(["sweep", str(p), "--grid", "T=60,120",
                       "--output-dir", str(out), "--no-figures"])
        captured = capsys.readouterr()
        assert rc == 0
        assert (out / "sweep.csv").is_file()
        assert "log-log regret slope" in captured.out

    def test_config_error_is_exit_2(self, tmp_path, capsys):
        p = write_config(tmp_path, base_config(horizon=10))
        rc = cli.main(["run", str(p), "--output-dir", str(tmp_path / "x")])
        captured = capsys.readouterr()
        assert rc == 2
        assert "config error:" in captured.err

    def test_missing_config_is_exit_2(self, tmp_path, capsys):
        rc = cli.main(["run", str(tmp_path / "absent.json")])
        assert rc == 2
        assert "config error:" in capsys.readouterr().err

    def test_bad_grid_is_exit_2(self, tmp_path, capsys):
        p = write_config(tmp_path, learning_config())
        assert cli.main(["sweep", str(p), "--grid", "60,120"]) == 2
        assert cli.main(["sweep", str(p), "--grid", "T=60,0"]) == 2
        assert cli.main(["sweep", str(p), "--grid", "T="]) == 2
        err = capsys.readouterr().err
        assert "config error:" in err

    def test_invalid_overrides_are_exit_2(self, tmp_path, capsys):
        p = write_config(tmp_path, base_config(overrides={"eps_I": 1.0}))
        rc = cli.main(["run", str(p), "--output-dir", str(tmp_path / "x")])
        assert rc == 2
        assert "overrides violate" in capsys.readouterr().err

    def test_failed_check_is_exit_3(self, tmp_path, capsys, monkeypatch):
        p = write_config(tmp_path, learning_config())
        monkeypatch.setattr(
            exp, "verify_run",
            lambda report: [CheckResult("forced_failure", False, "injected")],
        )
        rc = cli.main(["run", str(p), "--output-dir", str(tmp_path / "x"),
                       "--no-figures"])
        captured = capsys.readouterr()
        assert rc == 3
        assert "FAIL forced_failure (injected)" in captured.out

    def test_runtime_error_is_exit_4(self, tmp_path, capsys, monkeypatch):
        p = write_config(tmp_path, learning_config())

        def boom(*args, **kwargs):
            raise RuntimeError("boom")

        monkeypatch.setattr(cli, "run_experiment", boom)
        rc = cli.main(["run", str(p)])
        captured = capsys.readouterr()
        assert rc == 4
        assert "error: RuntimeError: boom" in captured.err

    def test_missing_subcommand_exits_via_argparse(self, capsys):
        with pytest.raises(SystemExit):
            cli.main([])
        capsys.readouterr()
