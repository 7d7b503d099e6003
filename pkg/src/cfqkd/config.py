"""Scenario configuration files: schema, loading, and overrides.

Configs are YAML with a fixed nested schema. A missing key falls back to
the scenario's default; an unknown key is an error, never silently
ignored. Values pass through the same validation as the underlying
dataclasses, so a config cannot construct a state the API would reject.

Config names are resolved in order: an existing path as given, then the
directory named by $CFQKD_CONFIG_DIR, then the configs bundled with the
package (desktop_mu05, desktop_mu005, fiber1km_mu10, fiber1km_mu05).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence, Union

import yaml

from .adversary import AdversaryKind, AdversarySpec
from .devices import DetectorSpec, SwitchSpec
from .errors import ConfigError, ParameterError
from .feedback import PiControllerSpec
from .optics import ArmLosses, InterferenceSpec, SplitterSpec
from .protocol import FeedbackMode, FeedbackSettings, Scenario, SystemParams

ENV_CONFIG_DIR = "CFQKD_CONFIG_DIR"

_SECTION_FIELDS = {
    "splitter": ("reflectivity", "transmissivity"),
    "losses": ("arm_b_roundtrip_db", "channel_oneway_db", "arm_a_roundtrip_db"),
    "detector": ("efficiency", "dark_prob_per_gate", "afterpulse_prob"),
    "switch": (
        "static_extinction_db",
        "dynamic_extinction_db",
        "response_time_s",
        "switching_time_s",
    ),
    "interference": ("static_visibility", "phase_error_rad"),
    "adversary": ("kind", "fraction"),
    "feedback": ("mode", "enabled", "drift_rad_per_ms", "noise_sd", "kp", "ki"),
}

_TOP_FIELDS = (
    "scenario",
    "mu",
    "rep_rate_hz",
    "n_slots",
    "seed",
    "block_size",
    "workers",
) + tuple(_SECTION_FIELDS)


@dataclass
class ScenarioConfig:
    """Everything a run needs, as read from one config file."""

    params: SystemParams
    adversary: AdversarySpec
    feedback: FeedbackSettings
    n_slots: int
    seed: int
    block_size: int = 1_000_000
    workers: int = 1


def _check_keys(mapping: dict, allowed: Sequence[str], context: str) -> None:
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ConfigError(
            f"unknown config key(s) in {context}: {', '.join(unknown)}"
        )


def _section(data: dict, name: str) -> dict:
    value = data.get(name) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"config section {name!r} must be a mapping")
    _check_keys(value, _SECTION_FIELDS[name], name)
    return value


def config_from_dict(data: dict) -> ScenarioConfig:
    """Build a validated ScenarioConfig from a parsed YAML mapping."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    _check_keys(data, _TOP_FIELDS, "the top level")

    scenario_name = data.get("scenario", "desktop")
    try:
        scenario = Scenario(scenario_name)
    except ValueError:
        names = ", ".join(s.value for s in Scenario)
        raise ConfigError(
            f"invalid config value: scenario must be one of {names}, "
            f"got {scenario_name!r}"
        ) from None

    try:
        base = (
            SystemParams.desktop()
            if scenario is Scenario.DESKTOP
            else SystemParams.fiber1km()
        )
        params = replace(
            base,
            mu=data.get("mu", base.mu),
            rep_rate_hz=data.get("rep_rate_hz", base.rep_rate_hz),
            splitter=replace(base.splitter, **_section(data, "splitter")),
            losses=replace(base.losses, **_section(data, "losses")),
            detector=replace(base.detector, **_section(data, "detector")),
            switch=replace(base.switch, **_section(data, "switch")),
            interference=replace(base.interference, **_section(data, "interference")),
        )

        adv = _section(data, "adversary")
        kind_name = adv.get("kind", "none")
        try:
            kind = AdversaryKind(kind_name)
        except ValueError:
            raise ConfigError(
                f"invalid config value: adversary kind {kind_name!r}"
            ) from None
        adversary = AdversarySpec(kind=kind, fraction=adv.get("fraction", 0.0))

        fb = _section(data, "feedback")
        mode_name = fb.get("mode", "ideal")
        try:
            mode = FeedbackMode(mode_name)
        except ValueError:
            raise ConfigError(
                f"invalid config value: feedback mode {mode_name!r}"
            ) from None
        controller = PiControllerSpec()
        gains = {k: fb[k] for k in ("kp", "ki") if k in fb}
        if gains:
            controller = replace(controller, **gains)
        feedback = FeedbackSettings(
            mode=mode,
            enabled=fb.get("enabled", True),
            drift_rad_per_ms=fb.get("drift_rad_per_ms", 0.5),
            noise_sd=fb.get("noise_sd", 0.01),
            controller=controller,
        )

        n_slots = data.get("n_slots", 1_000_000)
        seed = data.get("seed", 0)
        block_size = data.get("block_size", 1_000_000)
        workers = data.get("workers", 1)
        if not isinstance(n_slots, int) or not isinstance(seed, int):
            raise ConfigError("invalid config value: n_slots and seed must be integers")
        return ScenarioConfig(
            params=params,
            adversary=adversary,
            feedback=feedback,
            n_slots=n_slots,
            seed=seed,
            block_size=block_size,
            workers=workers,
        )
    except ParameterError as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc
    except TypeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc


def config_to_dict(config: ScenarioConfig) -> dict:
    """Normalized full mapping; dump-then-load reproduces the config."""
    p = config.params
    return {
        "scenario": p.scenario.value,
        "mu": p.mu,
        "rep_rate_hz": p.rep_rate_hz,
        "n_slots": config.n_slots,
        "seed": config.seed,
        "block_size": config.block_size,
        "workers": config.workers,
        "splitter": {
            "reflectivity": p.splitter.reflectivity,
            "transmissivity": p.splitter.transmissivity,
        },
        "losses": {
            "arm_b_roundtrip_db": p.losses.arm_b_roundtrip_db,
            "channel_oneway_db": p.losses.channel_oneway_db,
            "arm_a_roundtrip_db": p.losses.arm_a_roundtrip_db,
        },
        "detector": {
            "efficiency": p.detector.efficiency,
            "dark_prob_per_gate": p.detector.dark_prob_per_gate,
            "afterpulse_prob": p.detector.afterpulse_prob,
        },
        "switch": {
            "static_extinction_db": p.switch.static_extinction_db,
            "dynamic_extinction_db": p.switch.dynamic_extinction_db,
            "response_time_s": p.switch.response_time_s,
            "switching_time_s": p.switch.switching_time_s,
        },
        "interference": {
            "static_visibility": p.interference.static_visibility,
            "phase_error_rad": p.interference.phase_error_rad,
        },
        "adversary": {
            "kind": config.adversary.kind.value,
            "fraction": config.adversary.fraction,
        },
        "feedback": {
            "mode": config.feedback.mode.value,
            "enabled": config.feedback.enabled,
            "drift_rad_per_ms": config.feedback.drift_rad_per_ms,
            "noise_sd": config.feedback.noise_sd,
            "kp": config.feedback.controller.kp,
            "ki": config.feedback.controller.ki,
        },
    }


def dump_config(config: ScenarioConfig) -> str:
    return yaml.safe_dump(config_to_dict(config), sort_keys=False)


def apply_overrides(data: dict, overrides: Sequence[str]) -> dict:
    """Apply key=value pairs (dotted keys for nesting) onto a raw mapping.

    Values are parsed as YAML scalars, so numbers, booleans, and null
    arrive typed. Unknown keys are caught by the schema check when the
    mapping is turned into a config.
    """
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        try:
            value = yaml.safe_load(raw) if raw != "" else None
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse override value {raw!r}: {exc}") from exc
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a scalar")
        node[parts[-1]] = value
    return data


def bundled_config_dir() -> Path:
    return Path(str(resources.files("cfqkd") / "configs"))


def bundled_config_names() -> list[str]:
    return sorted(p.stem for p in bundled_config_dir().glob("*.yaml"))


def resolve_config_path(name: Union[str, Path]) -> Path:
    """Find a config by path, by name in $CFQKD_CONFIG_DIR, or bundled."""
    direct = Path(name)
    if direct.is_file():
        return direct
    candidates = [str(name), f"{name}.yaml"]
    search_dirs = []
    env_dir = os.environ.get(ENV_CONFIG_DIR)
    if env_dir:
        search_dirs.append(Path(env_dir))
    search_dirs.append(bundled_config_dir())
    for directory in search_dirs:
        for candidate in candidates:
            path = directory / candidate
            if path.is_file():
                return path
    raise ConfigError(
        f"config file not found: {name} "
        f"(bundled configs: {', '.join(bundled_config_names())})"
    )


def load_config(
    name: Union[str, Path],
    overrides: Sequence[str] = (),
) -> ScenarioConfig:
    path = resolve_config_path(name)
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if data is None:
        data = {}
    if overrides:
        data = apply_overrides(data, list(overrides))
    return config_from_dict(data)
