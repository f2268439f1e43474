"""Experiment configuration: one JSON object, strictly validated.

Unknown keys are rejected at every level so typos fail fast instead of
silently running a different experiment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .sets import FeasibleSet, make_set

_TOP_KEYS = {"set", "losses", "T", "mode", "overrides", "seed", "baselines", "output_dir"}
_REQUIRED = {"set", "losses", "T", "mode", "seed"}
_SET_KEYS = {"kind", "dim", "radius", "lo", "hi"}
_LOSS_KEYS = {"family", "stream_rho", "noise", "normalize_gradients", "margin"}
_MODE_KEYS = {"kind", "rho"}
_OVERRIDE_KEYS = {"K", "eta", "eps", "eps_I"}
_BASELINES = {"ogd", "exact_ons_ball"}


def _require_keys(obj: dict, allowed: set, required: set, where: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ConfigError(f"missing key(s) in {where}: {sorted(missing)}")


def _as_int(value, where: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{where} must be >= {minimum}, got {value}")
    return value


def _as_number(value, where: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(f"{where} must be positive, got {value}")
    return float(value)


@dataclass
class RunConfig:
    raw: dict
    set_spec: dict
    loss_spec: dict
    T: int
    mode_kind: str
    mode_rho: int | None
    overrides: dict
    seed: int
    baselines: list
    output_dir: str | None = None

    def build_set(self) -> FeasibleSet:
        s = self.set_spec
        try:
            return make_set(s["kind"], dim=s.get("dim"), radius=s.get("radius"),
                            lo=s.get("lo"), hi=s.get("hi"))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def parse_config(data: dict) -> RunConfig:
    _require_keys(data, _TOP_KEYS, _REQUIRED, "config")

    set_spec = data["set"]
    _require_keys(set_spec, _SET_KEYS, {"kind"}, "config.set")
    kind = set_spec["kind"]
    if kind == "simplex":
        _require_keys(set_spec, {"kind", "dim"}, {"kind", "dim"}, "config.set (simplex)")
        _as_int(set_spec["dim"], "set.dim", 1)
    elif kind in ("l2_ball", "l1_ball"):
        _require_keys(set_spec, {"kind", "dim", "radius"}, {"kind", "dim", "radius"},
                      f"config.set ({kind})")
        _as_int(set_spec["dim"], "set.dim", 1)
        _as_number(set_spec["radius"], "set.radius", positive=True)
    elif kind == "box":
        _require_keys(set_spec, {"kind", "lo", "hi"}, {"kind", "lo", "hi"}, "config.set (box)")
        for name in ("lo", "hi"):
            v = set_spec[name]
            if not isinstance(v, list) or not v or not all(
                isinstance(e, (int, float)) and not isinstance(e, bool) for e in v
            ):
                raise ConfigError(f"set.{name} must be a nonempty list of numbers")
        if len(set_spec["lo"]) != len(set_spec["hi"]):
            raise ConfigError("set.lo and set.hi must have equal length")
    else:
        raise ConfigError(f"unknown set kind {kind!r}")

    loss_spec = dict(data["losses"])
    _require_keys(loss_spec, _LOSS_KEYS, {"family"}, "config.losses")
    family = loss_spec["family"]
    if family == "quadratic":
        extra = set(loss_spec) - {"family", "stream_rho", "noise", "normalize_gradients"}
        if extra:
            raise ConfigError(f"key(s) {sorted(extra)} not valid for quadratic losses")
        if "stream_rho" in loss_spec and loss_spec["stream_rho"] is not None:
            _as_int(loss_spec["stream_rho"], "losses.stream_rho", 1)
        if "noise" in loss_spec:
            noise = _as_number(loss_spec["noise"], "losses.noise")
            if noise < 0:
                raise ConfigError("losses.noise must be >= 0")
        if "normalize_gradients" in loss_spec and not isinstance(
            loss_spec["normalize_gradients"], bool
        ):
            raise ConfigError("losses.normalize_gradients must be a boolean")
    elif family == "log_portfolio":
        extra = set(loss_spec) - {"family", "margin"}
        if extra:
            raise ConfigError(f"key(s) {sorted(extra)} not valid for log_portfolio losses")
        if "margin" in loss_spec:
            _as_number(loss_spec["margin"], "losses.margin", positive=True)
    else:
        raise ConfigError(f"unknown loss family {family!r}")

    T = _as_int(data["T"], "T", 1)

    mode_spec = data["mode"]
    _require_keys(mode_spec, _MODE_KEYS, {"kind"}, "config.mode")
    mode_kind = mode_spec["kind"]
    if mode_kind == "fullrank":
        if "rho" in mode_spec:
            raise ConfigError("mode.rho is not valid for fullrank mode")
        mode_rho = None
    elif mode_kind in ("lowdim", "sketch"):
        if "rho" not in mode_spec:
            raise ConfigError(f"mode {mode_kind!r} requires mode.rho")
        mode_rho = _as_int(mode_spec["rho"], "mode.rho", 1)
    else:
        raise ConfigError(f"unknown mode kind {mode_kind!r}")

    overrides = dict(data.get("overrides", {}))
    _require_keys(overrides, _OVERRIDE_KEYS, set(), "config.overrides")
    if "K" in overrides:
        _as_int(overrides["K"], "overrides.K", 1)
    for key in ("eta", "eps", "eps_I"):
        if key in overrides:
            _as_number(overrides[key], f"overrides.{key}", positive=True)

    seed = _as_int(data["seed"], "seed")

    baselines = data.get("baselines", [])
    if not isinstance(baselines, list) or not all(isinstance(b, str) for b in baselines):
        raise ConfigError("baselines must be a list of strings")
    unknown = set(baselines) - _BASELINES
    if unknown:
        raise ConfigError(f"unknown baseline(s): {sorted(unknown)}")
    if "exact_ons_ball" in baselines and kind != "l2_ball":
        raise ConfigError("the exact_ons_ball baseline requires an l2_ball set")

    output_dir = data.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        raise ConfigError("output_dir must be a string")

    return RunConfig(
        raw=data,
        set_spec=set_spec,
        loss_spec=loss_spec,
        T=T,
        mode_kind=mode_kind,
        mode_rho=mode_rho,
        overrides=overrides,
        seed=seed,
        baselines=list(baselines),
        output_dir=output_dir,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return parse_config(data)
