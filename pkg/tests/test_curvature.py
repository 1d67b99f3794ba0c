import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import conformal_ricci
from ricciflow.curvature import (
    calibrate_reaction_constants,
    compute_curvature,
    evolution_residual,
    metric_comparison,
    su2_frame_curvatures,
    tensor_sup_norms,
)
from ricciflow.errors import ConfigError, DegenerateMetricError
from ricciflow.flow import FlowConfig, run_flow
from ricciflow.manifolds import (
    MetricField,
    build_su2_metric,
    build_torus_metric,
    build_warped_sphere_metric,
    node_coordinates,
)

RIC_ROUND_S3 = 2.0 * np.sqrt(3.0)  # |Ric| of the unit round 3-sphere


def bundle_symmetry_errors(bundle, metric):
    rm = bundle.riemann
    if metric.model.family == "periodic_grid":
        ginv = np.linalg.inv(metric.data)
    else:
        n = rm.shape[1]
        ginv = np.broadcast_to(np.eye(n), rm.shape[:1] + (n, n))
    return {
        "antisym": max(
            np.abs(rm + rm.transpose(0, 2, 1, 3, 4)).max(),
            np.abs(rm + rm.transpose(0, 1, 2, 4, 3)).max(),
        ),
        "pair": np.abs(rm - rm.transpose(0, 3, 4, 1, 2)).max(),
        "bianchi": np.abs(
            rm + rm.transpose(0, 1, 3, 4, 2) + rm.transpose(0, 1, 4, 2, 3)
        ).max(),
        "ricci_trace": np.abs(
            np.einsum("xkl,xkilj->xij", ginv, rm) - bundle.ricci
        ).max(),
        "scalar_trace": np.abs(
            np.einsum("xij,xij->x", ginv, bundle.ricci) - bundle.scalar
        ).max(),
        "ricci_sym": np.abs(bundle.ricci - bundle.ricci.transpose(0, 2, 1)).max(),
    }


def test_flat_torus_curvature_vanishes(flat16):
    b = compute_curvature(flat16)
    assert np.all(b.riemann == 0.0)
    assert np.all(b.ricci == 0.0)
    assert np.all(b.scalar == 0.0)
    assert tensor_sup_norms(b) == {"sup_rm": 0.0, "sup_ric": 0.0}


def test_round_sphere_closed_forms(round48):
    b = compute_curvature(round48)
    assert np.allclose(b.scalar, 6.0, atol=1e-9)
    assert np.allclose(b.norm_ric, RIC_ROUND_S3, atol=1e-9)
    assert np.allclose(b.norm_rm, RIC_ROUND_S3, atol=1e-9)
    # Einstein: frame Ricci is twice the identity.
    assert np.allclose(b.ricci, 2.0 * np.eye(3)[None], atol=1e-9)


def test_sphere_radius_two_scalar():
    g = build_warped_sphere_metric(3, 48, radius=2.0)
    assert np.allclose(compute_curvature(g).scalar, 1.5, atol=1e-9)


def test_symmetry_suite_grid(bumpy16, flat16):
    for metric in (flat16, bumpy16):
        errs = bundle_symmetry_errors(compute_curvature(metric), metric)
        assert max(errs.values()) <= 1e-10, errs


def test_symmetry_suite_closed_form(round48, berger):
    for metric in (round48, berger):
        errs = bundle_symmetry_errors(compute_curvature(metric), metric)
        assert max(errs.values()) <= 1e-12, errs


def test_perturbed_ricci_against_symbolic_oracle():
    errors = []
    for res in (12, 24):
        g = build_torus_metric(3, res, amplitude=0.05)
        got = compute_curvature(g).ricci
        want = conformal_ricci(3, 0.05, (1, 0, 0), 1.0, node_coordinates(g.model))
        errors.append(np.abs(got - want).max())
    assert errors[0] < 0.2
    assert errors[0] / errors[1] >= 3.5  # second-order stencil


def test_oracle_wave_off_axis():
    g = build_torus_metric(3, 16, amplitude=0.1, wave=(1, 2, 0))
    got = compute_curvature(g).ricci
    want = conformal_ricci(3, 0.1, (1, 2, 0), 1.0, node_coordinates(g.model))
    assert np.abs(got - want).max() < 0.1 * np.abs(want).max()


def test_berger_frame_table(berger):
    # Hand-computed structure-constant table for (0.25, 1, 1), frozen.
    ric, sec = su2_frame_curvatures(berger.coef)
    assert np.allclose(ric, [0.5, 3.5, 3.5], atol=1e-13)
    assert np.allclose(sec, [0.25, 3.25, 0.25], atol=1e-13)
    b = compute_curvature(berger)
    assert np.isclose(b.norm_rm[0] ** 2, 42.75, atol=1e-11)
    assert np.isclose(b.norm_ric[0], np.sqrt(24.75), atol=1e-12)
    assert np.isclose(b.scalar[0], 7.5, atol=1e-12)


def test_round_su2_has_constant_curvature():
    ric, sec = su2_frame_curvatures(np.array([1.0, 1.0, 1.0]))
    assert np.allclose(ric, 2.0, atol=1e-14)
    assert np.allclose(sec, 1.0, atol=1e-14)


@pytest.mark.parametrize("c", [0.5, 2.0, 4.0])
def test_scaling_covariance(c, bumpy16, berger):
    for metric in (bumpy16, berger):
        base = compute_curvature(metric)
        scaled = compute_curvature(metric.scaled(c))
        assert np.allclose(scaled.norm_rm, base.norm_rm / c, rtol=1e-11)
        if metric.model.family == "periodic_grid":
            assert np.allclose(scaled.ricci, base.ricci, atol=1e-11)


def test_metric_comparison_examples(bumpy16):
    same = metric_comparison(bumpy16, bumpy16)
    assert np.isclose(same.lambda_min, 1.0, atol=1e-12)
    assert np.isclose(same.lambda_max, 1.0, atol=1e-12)
    assert same.deviation <= 1e-12
    doubled = metric_comparison(bumpy16.scaled(2.0), bumpy16)
    assert np.isclose(doubled.lambda_min, 2.0, rtol=1e-12)
    assert np.isclose(doubled.lambda_max, 2.0, rtol=1e-12)
    assert np.isclose(doubled.deviation, 1.0, rtol=1e-12)


def test_metric_comparison_shrunk_sphere(round48):
    cmp = metric_comparison(round48.scaled(0.6), round48)
    assert np.isclose(cmp.lambda_min, 0.6, rtol=1e-12)
    assert np.isclose(cmp.deviation, 0.4, rtol=1e-12)


def test_metric_comparison_rejects_model_mismatch(flat8, flat16):
    with pytest.raises(ConfigError):
        metric_comparison(flat8, flat16)


def test_degenerate_metric_rejected(flat8):
    bad = MetricField(flat8.model, flat8.data * 1e-12)
    with pytest.raises(DegenerateMetricError):
        compute_curvature(bad)


def test_flat_evolution_residual_zero(flat8):
    from ricciflow.flow import FlowState

    b = compute_curvature(flat8)
    s0 = FlowState(0.0, flat8, b)
    s1 = FlowState(0.01, flat8, b)
    res = evolution_residual(s0, s1, 1.0, 1.0)
    assert res["sup_rm_residual"] == 0.0
    assert res["sup_ric_residual"] == 0.0


def test_shrinker_reaction_ratio_is_constant():
    # On the round shrinker the curvature norm solves a pure reaction
    # equation; the measured growth over |Rm|^2 must be time independent.
    g = build_warped_sphere_metric(3, 48)
    cfg = FlowConfig(
        initial_metric=g,
        time_horizon=0.1,
        ball_radius=1.0,
        stop_on_monitor_breach=False,
        fixed_dt=1e-4,
        cadence=100,
    )
    trace = run_flow(cfg)
    states = trace.states
    ratios = []
    for sa, sb in zip(states[:-1], states[1:]):
        res = evolution_residual(sa, sb, 0.0, 0.0)
        ratios.append(res["rm_residual"].max() / sa.curvature.norm_rm.max() ** 2)
    ratios = np.array(ratios)
    # Forward differencing over the record interval biases the measured
    # growth upward by O(interval), so the window is wider than roundoff.
    expected = 2.0 / np.sqrt(3.0)
    assert np.all(np.abs(ratios - expected) < 0.1 * expected)


def test_berger_calibration_is_finite():
    g = build_su2_metric(0.25, 1.0, 1.0)
    cfg = FlowConfig(
        initial_metric=g,
        time_horizon=0.01,
        stop_on_monitor_breach=False,
        fixed_dt=1e-5,
        cadence=200,
    )
    trace = run_flow(cfg)
    cal = calibrate_reaction_constants(trace.states)
    assert np.isfinite(cal["reaction_rm"]) and cal["reaction_rm"] >= 0.0
    assert np.isfinite(cal["reaction_ric"]) and cal["reaction_ric"] >= 0.0


def test_evolution_residual_needs_increasing_times(flat8):
    from ricciflow.flow import FlowState

    b = compute_curvature(flat8)
    s = FlowState(0.0, flat8, b)
    with pytest.raises(ConfigError):
        evolution_residual(s, s, 1.0, 1.0)


@settings(max_examples=15, deadline=None)
@given(
    amplitude=st.floats(-0.3, 0.3),
    wave=st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(0, 1)),
)
def test_grid_bundle_symmetries_hold_generically(amplitude, wave):
    g = build_torus_metric(3, 8, amplitude=amplitude, wave=wave)
    errs = bundle_symmetry_errors(compute_curvature(g), g)
    assert max(errs.values()) <= 1e-10, errs
