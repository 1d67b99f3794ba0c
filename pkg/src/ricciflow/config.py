"""Scenario configuration: schema, loading, and metric construction.

One YAML file describes one run: the manifold to build, the flow settings,
which checks to apply afterwards, and where output goes. The schema is
strict - an unknown key anywhere is an error naming its full path - so a
sweep that typos a field fails loudly instead of silently running the
default.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import yaml

from .errors import ConfigError
from .flow import FlowConfig
from .manifolds import (
    FAMILIES,
    FAMILY_GRID,
    FAMILY_SU2,
    FAMILY_WARPED,
    MetricField,
    build_su2_metric,
    build_torus_metric,
    build_warped_sphere_metric,
)

DEFAULT_SEED = 0x5EED

_MANIFOLD_KEYS = {
    FAMILY_GRID: {"family", "dim", "resolution", "length", "amplitude", "wave"},
    FAMILY_WARPED: {"family", "dim", "resolution", "radius", "amplitude"},
    FAMILY_SU2: {"family", "coefficients"},
}

_FLOW_KEYS = {
    "time_horizon",
    "ricci_bound",
    "ball_radius",
    "energy_threshold",
    "dt_safety",
    "deturck",
    "stop_on_monitor_breach",
    "fixed_dt",
    "cadence",
    "record_states",
    "dense_centers",
}

_CHECK_KEYS = {
    "enabled",
    "include_smoothing",
    "flatness_time",
    "flatness_threshold",
    "sweep_assert",
}

_OUTPUT_KEYS = {"directory", "prefix"}

_TOP_KEYS = {"manifold", "flow", "checks", "output", "seed"}

_SWEEP_ASSERT_KEYS = {"quantity", "direction"}


@dataclass
class CheckSettings:
    enabled: bool = True
    include_smoothing: bool = True
    flatness_time: float | None = None
    flatness_threshold: float = 1.0
    sweep_assert: dict | None = None


@dataclass
class ScenarioConfig:
    """A fully validated scenario: built metric plus run and check settings."""

    initial_metric: MetricField
    flow: FlowConfig
    checks: CheckSettings = field(default_factory=CheckSettings)
    output_dir: str = "out"
    prefix: str = "run"
    seed: int = DEFAULT_SEED
    raw: dict = field(default_factory=dict)


def _require_mapping(node, path):
    if not isinstance(node, dict):
        raise ConfigError(f"{path}: expected a mapping")
    return node


def _reject_unknown(node: dict, allowed: set, path: str):
    unknown = sorted(set(node) - allowed)
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}: unknown key")


def _get_number(node, key, path, default=None, required=False):
    if key not in node or node[key] is None:
        if required:
            raise ConfigError(f"{path}.{key}: required")
        return default
    v = node[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {v!r}")
    return float(v)


def _get_int(node, key, path, default=None, required=False):
    if key not in node or node[key] is None:
        if required:
            raise ConfigError(f"{path}.{key}: required")
        return default
    v = node[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}.{key}: expected an integer, got {v!r}")
    return int(v)


def _get_bool(node, key, path, default):
    if key not in node or node[key] is None:
        return default
    v = node[key]
    if not isinstance(v, bool):
        raise ConfigError(f"{path}.{key}: expected true or false, got {v!r}")
    return v


def build_manifold(spec: dict) -> MetricField:
    """Construct the initial metric described by a manifold mapping."""
    spec = _require_mapping(spec, "manifold")
    family = spec.get("family")
    if family not in FAMILIES:
        raise ConfigError(
            f"manifold.family: expected one of {sorted(FAMILIES)}, got {family!r}"
        )
    _reject_unknown(spec, _MANIFOLD_KEYS[family], "manifold")
    if family == FAMILY_GRID:
        dim = _get_int(spec, "dim", "manifold", required=True)
        res = _get_int(spec, "resolution", "manifold", required=True)
        length = _get_number(spec, "length", "manifold", default=1.0)
        amplitude = _get_number(spec, "amplitude", "manifold", default=0.0)
        wave = spec.get("wave")
        if wave is not None and not (
            isinstance(wave, list) and all(isinstance(w, int) for w in wave)
        ):
            raise ConfigError("manifold.wave: expected a list of integers")
        return build_torus_metric(dim, res, length, amplitude, wave)
    if family == FAMILY_WARPED:
        dim = _get_int(spec, "dim", "manifold", required=True)
        res = _get_int(spec, "resolution", "manifold", required=True)
        radius = _get_number(spec, "radius", "manifold", default=1.0)
        amplitude = _get_number(spec, "amplitude", "manifold", default=0.0)
        return build_warped_sphere_metric(dim, res, radius, amplitude)
    coeffs = spec.get("coefficients")
    if (
        not isinstance(coeffs, list)
        or len(coeffs) != 3
        or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in coeffs)
    ):
        raise ConfigError("manifold.coefficients: expected three numbers")
    return build_su2_metric(*[float(c) for c in coeffs])


def scenario_from_mapping(raw: dict) -> ScenarioConfig:
    raw = _require_mapping(raw, "config")
    _reject_unknown(raw, _TOP_KEYS, "config")
    if "manifold" not in raw:
        raise ConfigError("config.manifold: required")
    if "flow" not in raw:
        raise ConfigError("config.flow: required")
    metric = build_manifold(raw["manifold"])

    flow_node = _require_mapping(raw["flow"], "flow")
    _reject_unknown(flow_node, _FLOW_KEYS, "flow")
    seed = _get_int(raw, "seed", "config", default=DEFAULT_SEED)
    deturck = flow_node.get("deturck")
    if deturck is not None and not isinstance(deturck, bool):
        raise ConfigError(f"flow.deturck: expected true/false/null, got {deturck!r}")
    flow = FlowConfig(
        initial_metric=metric,
        time_horizon=_get_number(flow_node, "time_horizon", "flow", required=True),
        ricci_bound=_get_number(flow_node, "ricci_bound", "flow", default=1.0),
        ball_radius=_get_number(flow_node, "ball_radius", "flow", default=0.25),
        energy_threshold=_get_number(
            flow_node, "energy_threshold", "flow", default=1.0
        ),
        dt_safety=_get_number(flow_node, "dt_safety", "flow", default=0.25),
        deturck=deturck,
        stop_on_monitor_breach=_get_bool(
            flow_node, "stop_on_monitor_breach", "flow", True
        ),
        fixed_dt=_get_number(flow_node, "fixed_dt", "flow", default=None),
        cadence=_get_int(flow_node, "cadence", "flow", default=None),
        seed=seed,
        record_states=_get_bool(flow_node, "record_states", "flow", False),
        dense_centers=_get_bool(flow_node, "dense_centers", "flow", False),
    )
    flow.validate()

    checks = CheckSettings()
    if "checks" in raw and raw["checks"] is not None:
        node = _require_mapping(raw["checks"], "checks")
        _reject_unknown(node, _CHECK_KEYS, "checks")
        checks.enabled = _get_bool(node, "enabled", "checks", True)
        checks.include_smoothing = _get_bool(node, "include_smoothing", "checks", True)
        checks.flatness_time = _get_number(node, "flatness_time", "checks", default=None)
        checks.flatness_threshold = _get_number(
            node, "flatness_threshold", "checks", default=1.0
        )
        if "sweep_assert" in node and node["sweep_assert"] is not None:
            sa = _require_mapping(node["sweep_assert"], "checks.sweep_assert")
            _reject_unknown(sa, _SWEEP_ASSERT_KEYS, "checks.sweep_assert")
            if sa.get("direction") not in ("nondecreasing", "nonincreasing"):
                raise ConfigError(
                    "checks.sweep_assert.direction: expected nondecreasing or nonincreasing"
                )
            if not isinstance(sa.get("quantity"), str):
                raise ConfigError("checks.sweep_assert.quantity: expected a check name")
            checks.sweep_assert = dict(sa)

    out_dir, prefix = "out", "run"
    if "output" in raw and raw["output"] is not None:
        node = _require_mapping(raw["output"], "output")
        _reject_unknown(node, _OUTPUT_KEYS, "output")
        if "directory" in node and node["directory"] is not None:
            if not isinstance(node["directory"], str):
                raise ConfigError("output.directory: expected a string")
            out_dir = node["directory"]
        if "prefix" in node and node["prefix"] is not None:
            if not isinstance(node["prefix"], str):
                raise ConfigError("output.prefix: expected a string")
            prefix = node["prefix"]

    return ScenarioConfig(metric, flow, checks, out_dir, prefix, seed, raw)


def load_scenario(path) -> ScenarioConfig:
    """Parse and validate a scenario file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    if raw is None:
        raise ConfigError(f"{path}: empty config")
    return scenario_from_mapping(raw)


# Sweep parameters map onto config paths; the CLI rewrites the raw mapping
# and revalidates, so sweeps get the same strictness as single runs.
SWEEP_PARAMETERS = {
    "epsilon_p": ("manifold", "amplitude", float),
    "resolution": ("manifold", "resolution", int),
    "dt_safety": ("flow", "dt_safety", float),
    "r": ("flow", "ball_radius", float),
}


def apply_sweep_value(raw: dict, parameter: str, value) -> dict:
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(
            f"sweep parameter must be one of {sorted(SWEEP_PARAMETERS)}, got {parameter!r}"
        )
    section, key, caster = SWEEP_PARAMETERS[parameter]
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in raw.items()}
    if section not in out or not isinstance(out[section], dict):
        raise ConfigError(f"sweep config lacks the {section} section")
    try:
        out[section][key] = caster(value)
    except (TypeError, ValueError):
        raise ConfigError(f"sweep value {value!r} not valid for {parameter}") from None
    return out
