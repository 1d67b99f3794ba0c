"""Scenario schema: strict keys, typed fields, sweep rewriting."""

import pytest

from ricciflow.config import (
    DEFAULT_SEED,
    SWEEP_PARAMETERS,
    apply_sweep_value,
    build_manifold,
    load_scenario,
    scenario_from_mapping,
)
from ricciflow.errors import ConfigError


def minimal_raw(**flow_extra):
    flow = {"time_horizon": 0.01, "fixed_dt": 1e-4}
    flow.update(flow_extra)
    return {
        "manifold": {"family": "periodic_grid", "dim": 3, "resolution": 8},
        "flow": flow,
    }


def test_minimal_scenario_defaults():
    sc = scenario_from_mapping(minimal_raw())
    assert sc.seed == DEFAULT_SEED == 0x5EED
    assert sc.output_dir == "out"
    assert sc.prefix == "run"
    assert sc.checks.enabled is True
    assert sc.checks.flatness_threshold == 1.0
    assert sc.flow.time_horizon == 0.01
    assert sc.flow.ball_radius == 0.25
    assert sc.initial_metric.model.family == "periodic_grid"


@pytest.mark.parametrize(
    "mutate, path_fragment",
    [
        (lambda r: r.update(extra=1), "config.extra"),
        (lambda r: r["manifold"].update(spacing=0.1), "manifold.spacing"),
        (lambda r: r["flow"].update(step=0.1), "flow.step"),
        (lambda r: r.update(checks={"tolerance": 1.0}), "checks.tolerance"),
        (lambda r: r.update(output={"folder": "x"}), "output.folder"),
    ],
)
def test_unknown_keys_are_named_by_path(mutate, path_fragment):
    raw = minimal_raw()
    mutate(raw)
    with pytest.raises(ConfigError, match=path_fragment.replace(".", r"\.")):
        scenario_from_mapping(raw)


def test_missing_required_sections():
    with pytest.raises(ConfigError, match="manifold"):
        scenario_from_mapping({"flow": {"time_horizon": 0.1}})
    with pytest.raises(ConfigError, match="flow"):
        scenario_from_mapping({"manifold": {"family": "periodic_grid", "dim": 3, "resolution": 8}})
    with pytest.raises(ConfigError, match=r"flow\.time_horizon"):
        scenario_from_mapping(
            {
                "manifold": {"family": "periodic_grid", "dim": 3, "resolution": 8},
                "flow": {},
            }
        )


def test_type_errors_are_loud():
    raw = minimal_raw()
    raw["flow"]["time_horizon"] = "soon"
    with pytest.raises(ConfigError, match="expected a number"):
        scenario_from_mapping(raw)
    raw = minimal_raw()
    raw["manifold"]["resolution"] = 8.5
    with pytest.raises(ConfigError, match="expected an integer"):
        scenario_from_mapping(raw)
    raw = minimal_raw(stop_on_monitor_breach="yes")
    with pytest.raises(ConfigError, match="expected true or false"):
        scenario_from_mapping(raw)
    raw = minimal_raw(deturck=1)
    with pytest.raises(ConfigError, match="deturck"):
        scenario_from_mapping(raw)
    # booleans must not pass as numbers
    raw = minimal_raw()
    raw["flow"]["ball_radius"] = True
    with pytest.raises(ConfigError, match="expected a number"):
        scenario_from_mapping(raw)


def test_manifold_families():
    grid = build_manifold(
        {"family": "periodic_grid", "dim": 3, "resolution": 8, "amplitude": 0.1}
    )
    assert grid.model.resolution == 8
    warped = build_manifold(
        {"family": "warped_sphere", "dim": 3, "resolution": 32, "radius": 2.0}
    )
    assert warped.model.family == "warped_sphere"
    su2 = build_manifold({"family": "homogeneous_su2", "coefficients": [0.25, 1, 1]})
    assert su2.model.family == "homogeneous_su2"
    with pytest.raises(ConfigError, match="family"):
        build_manifold({"family": "klein_bottle"})
    with pytest.raises(ConfigError, match="coefficients"):
        build_manifold({"family": "homogeneous_su2", "coefficients": [1, 2]})
    with pytest.raises(ConfigError, match="wave"):
        build_manifold(
            {"family": "periodic_grid", "dim": 3, "resolution": 8, "wave": [1.5, 0, 0]}
        )


def test_sweep_assert_schema():
    raw = minimal_raw()
    raw["checks"] = {
        "sweep_assert": {"quantity": "almost_flat_product", "direction": "nondecreasing"}
    }
    sc = scenario_from_mapping(raw)
    assert sc.checks.sweep_assert == {
        "quantity": "almost_flat_product",
        "direction": "nondecreasing",
    }
    raw["checks"]["sweep_assert"]["direction"] = "sideways"
    with pytest.raises(ConfigError, match="direction"):
        scenario_from_mapping(raw)


def test_sweep_parameters_table():
    assert set(SWEEP_PARAMETERS) == {"epsilon_p", "resolution", "dt_safety", "r"}
    raw = minimal_raw()
    out = apply_sweep_value(raw, "epsilon_p", "0.05")
    assert out["manifold"]["amplitude"] == 0.05
    assert "amplitude" not in raw["manifold"]
    out = apply_sweep_value(raw, "resolution", "16")
    assert out["manifold"]["resolution"] == 16
    out = apply_sweep_value(raw, "r", 0.4)
    assert out["flow"]["ball_radius"] == 0.4
    out = apply_sweep_value(raw, "dt_safety", "0.5")
    assert out["flow"]["dt_safety"] == 0.5
    with pytest.raises(ConfigError, match="sweep parameter"):
        apply_sweep_value(raw, "volume", 1.0)
    with pytest.raises(ConfigError, match="not valid"):
        apply_sweep_value(raw, "resolution", "sixteen")


def test_load_scenario_from_file(tmp_path):
    path = tmp_path / "scenario.yaml"
    path.write_text(
        "manifold:\n"
        "  family: warped_sphere\n"
        "  dim: 3\n"
        "  resolution: 48\n"
        "flow:\n"
        "  time_horizon: 0.2\n"
        "  ball_radius: 1.0\n"
        "seed: 99\n"
        "output:\n"
        "  directory: results\n"
        "  prefix: sphere\n"
    )
    sc = load_scenario(path)
    assert sc.seed == 99
    assert sc.flow.seed == 99
    assert sc.output_dir == "results"
    assert sc.prefix == "sphere"
    assert sc.initial_metric.model.resolution == 48


def test_load_scenario_bad_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_scenario(tmp_path / "absent.yaml")
    empty = tmp_path / "empty.yaml"
    empty.write_text("")
    with pytest.raises(ConfigError, match="empty"):
        load_scenario(empty)
    invalid = tmp_path / "invalid.yaml"
    invalid.write_text("manifold: [unclosed\n")
    with pytest.raises(ConfigError, match="YAML"):
        load_scenario(invalid)
