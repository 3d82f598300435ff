"""Run configuration files (YAML key/value with nesting).

A configuration file supplies defaults for the command-line flags plus an
optional `scenario` section overriding scenario fields.  Unknown keys are a
hard error so that typos cannot silently fall back to defaults.
"""

from __future__ import annotations

from dataclasses import fields, replace
from pathlib import Path

import yaml

from .simgen import ScenarioConfig, ScenarioError, scenario_preset


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


TOP_LEVEL_KEYS = {
    "seed", "scenario", "n", "reps", "draws", "bootstraps", "out", "workers",
    "format", "n_oracle", "arms", "dataset",
}

SCENARIO_KEYS = {f.name for f in fields(ScenarioConfig)} - {"dgp"}


def load_config(path) -> dict:
    """Parse and validate a configuration file into a flat settings dict."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"configuration file {path} does not exist")
    raw = yaml.safe_load(path.read_text())
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError("configuration root must be a mapping")
    unknown = set(raw) - TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    scenario = raw.get("scenario")
    if isinstance(scenario, dict):
        bad = set(scenario) - SCENARIO_KEYS
        if bad:
            raise ConfigError(f"unknown scenario keys: {sorted(bad)}")
    return raw


def resolve_scenario(spec, n: int | None = None) -> ScenarioConfig:
    """Scenario from a preset name, a scenario file path, or a mapping."""
    if isinstance(spec, ScenarioConfig):
        config = spec
    elif isinstance(spec, dict):
        base = scenario_preset(str(spec.get("kind", "realistic")))
        overrides = {k: v for k, v in spec.items() if k != "kind"}
        bad = set(overrides) - SCENARIO_KEYS
        if bad:
            raise ConfigError(f"unknown scenario keys: {sorted(bad)}")
        config = replace(base, **overrides)
    elif spec in ("realistic", "enhanced"):
        config = scenario_preset(spec)
    else:
        path = Path(str(spec))
        if not path.exists():
            raise ConfigError(
                f"scenario {spec!r} is neither a preset nor an existing file")
        raw = yaml.safe_load(path.read_text())
        if not isinstance(raw, dict):
            raise ConfigError("scenario file must contain a mapping")
        config = resolve_scenario(raw)
    if n is not None:
        config = replace(config, n=n)
    return config
