"""Iteration schedule, sup bounds, and measured maximum principles."""

import math
from types import SimpleNamespace

import numpy as np
import pytest

from ricciflow.curvature import compute_curvature
from ricciflow.distances import ball, geodesic_distance
from ricciflow.errors import ConfigError, HypothesisError
from ricciflow.flow import FlowConfig, FlowState, run_flow
from ricciflow.moser import (
    MoserParams,
    SubsolutionPair,
    decay_envelopes,
    iteration_schedule,
    measured_coupling,
    moser_bound,
    regularize_low_p,
    stage_growth,
    stage_ratio,
    verify_max_principle,
    verify_subsolution,
)


def make_params(**overrides):
    base = dict(
        dim=3,
        hypothesis_exponent=6.0,
        lp_exponent=2.0,
        sobolev_constant=1.0,
        coupling_bound=10.0,
        ball_radius=0.25,
        eval_time=0.1,
    )
    base.update(overrides)
    return MoserParams(**base)


# ---------------------------------------------------------------------------
# Schedule recursions
# ---------------------------------------------------------------------------


def test_stage_growth_values():
    assert stage_growth(4) == 1.5
    assert np.isclose(stage_growth(3), 5.0 / 3.0, rtol=1e-15)
    with pytest.raises(ConfigError):
        stage_growth(2)


def test_stage_ratio_frozen():
    # (1 + 2/4)^(2*6/(6-4)) = 1.5^6
    assert stage_ratio(4, 6.0) == 11.390625
    with pytest.raises(ConfigError):
        stage_ratio(4, 4.0)


def test_schedule_first_stages_closed_form():
    stages = iteration_schedule(2.0, 4, 6.0, 1.0, 1.0, 3)
    p, t, r = stages[0]
    assert (p, t, r) == (2.0, 0.0, 1.0)
    p1, t1, r1 = stages[1]
    assert np.isclose(p1, 3.0, rtol=1e-15)
    assert np.isclose(t1, 19.0 / 27.0, rtol=1e-15)
    assert np.isclose(r1, 35.0 / 54.0, rtol=1e-15)
    p2, t2, r2 = stages[2]
    assert np.isclose(p2, 4.5, rtol=1e-15)
    assert np.isclose(t2, 665.0 / 729.0, rtol=1e-15)
    assert np.isclose(r2, 793.0 / 1458.0, rtol=1e-15)


def test_schedule_converges_to_limits():
    stages = iteration_schedule(2.0, 3, 6.0, 0.4, 0.3, 60)
    times = np.array([s.time_cut for s in stages])
    radii = np.array([s.radius for s in stages])
    exps = np.array([s.exponent for s in stages])
    # geometric shrink underflows to the limit well before k = 60, so the
    # tail is allowed to go flat but never reverse
    assert (np.diff(times) >= 0).all()
    assert (np.diff(radii) <= 0).all()
    assert times[1] > times[0]
    assert radii[1] < radii[0]
    assert abs(times[-1] - 0.4) < 1e-9
    assert abs(radii[-1] - 0.15) < 1e-9
    assert np.allclose(exps[1:] / exps[:-1], 5.0 / 3.0, rtol=1e-14)


@pytest.mark.parametrize(
    "args",
    [
        (0.5, 3, 6.0, 1.0, 1.0, 5),
        (2.0, 3, 6.0, 1.0, 1.0, 0),
        (2.0, 3, 3.0, 1.0, 1.0, 5),
        (2.0, 4, 4.0, 1.0, 1.0, 5),
    ],
)
def test_schedule_rejects(args):
    with pytest.raises(ConfigError):
        iteration_schedule(*args)


# ---------------------------------------------------------------------------
# The sup bound formula
# ---------------------------------------------------------------------------


def test_moser_bound_frozen_values():
    # unit everything except the rate, which becomes 1/t + 1/r^2 = 2
    p = make_params(coupling_bound=0.0, ball_radius=1.0, eval_time=1.0)
    assert np.isclose(moser_bound(p, 1.0), 2.378414230005442, rtol=1e-15)
    # growth 1 + 2^3 = 9, rate 9/1 + 2 = 11, exponent (4+2)/(2*2) = 1.5
    p2 = MoserParams(
        dim=4,
        hypothesis_exponent=6.0,
        lp_exponent=2.0,
        sobolev_constant=1.0,
        coupling_bound=2.0,
        ball_radius=2.0**-0.5,
        eval_time=1.0,
    )
    assert np.isclose(moser_bound(p2, 2.0), 72.96574538781879, rtol=1e-14)


def test_moser_bound_degenerate_inputs():
    p = make_params()
    assert moser_bound(p, 0.0) == 0.0
    with pytest.raises(ConfigError):
        moser_bound(p, -1.0)
    with pytest.raises(ConfigError):
        make_params(eval_time=0.0)
    with pytest.raises(ConfigError):
        make_params(eval_time=-0.5)


def test_moser_bound_monotone_directions():
    mus = [moser_bound(make_params(coupling_bound=m), 1.7) for m in np.linspace(0, 3, 7)]
    assert (np.diff(mus) >= 0).all()
    ts = [moser_bound(make_params(eval_time=t), 1.7) for t in np.linspace(0.05, 2.0, 8)]
    assert (np.diff(ts) <= 0).all()
    rs = [moser_bound(make_params(ball_radius=r), 1.7) for r in np.linspace(0.1, 1.0, 8)]
    assert (np.diff(rs) <= 0).all()
    sobs = [moser_bound(make_params(sobolev_constant=a), 1.7) for a in np.linspace(0.5, 4.0, 8)]
    assert (np.diff(sobs) >= 0).all()
    lps = [moser_bound(make_params(), v) for v in np.linspace(0.0, 3.0, 7)]
    assert (np.diff(lps) >= 0).all()


def test_regularization_shift():
    f = np.array([0.0, 0.5, 2.0])
    assert np.array_equal(regularize_low_p(f, 4), f + 0.25)
    with pytest.raises(ConfigError):
        regularize_low_p(f, 0)
    # the shift shrinks with j, so the implied ceiling can only drop
    p = make_params()
    bounds = [
        moser_bound(p, float(np.linalg.norm(regularize_low_p(f, j))))
        for j in (1, 2, 10)
    ]
    assert bounds[0] >= bounds[1] >= bounds[2]


# ---------------------------------------------------------------------------
# Sub-solution residuals
# ---------------------------------------------------------------------------


def quadratic_pair(metric, bundle, times, coupling_scale):
    """f = (1+t)^2, u = coupling_scale/(1+t): exact under the time stencil."""
    nn = metric.model.node_count
    times = np.asarray(times, dtype=np.float64)
    states = [FlowState(float(t), metric, bundle) for t in times]
    f = np.stack([np.full(nn, (1.0 + t) ** 2) for t in times])
    u = np.stack([np.full(nn, coupling_scale / (1.0 + t)) for t in times])
    return SubsolutionPair(times, states, f, u)


def test_constant_field_is_an_exact_subsolution(flat8):
    bundle = compute_curvature(flat8)
    times = np.array([0.0, 0.05, 0.1])
    states = [FlowState(float(t), flat8, bundle) for t in times]
    nn = flat8.model.node_count
    pair = SubsolutionPair(times, states, np.ones((3, nn)), np.zeros((3, nn)))
    report = verify_subsolution(pair, 1e-12)
    assert report.passed
    assert abs(report.max_residual) <= 1e-12
    assert abs(report.endpoint_residual) <= 1e-12


def test_quadratic_growth_saturates_equality(flat8):
    # d/dt (1+t)^2 = u * (1+t)^2 exactly when u = 2/(1+t); the quadratic
    # keeps the nonuniform second-order stencil exact
    bundle = compute_curvature(flat8)
    pair = quadratic_pair(flat8, bundle, [0.0, 0.04, 0.1, 0.13], 2.0)
    report = verify_subsolution(pair, 1e-10)
    assert report.passed
    assert abs(report.max_residual) <= 1e-10


def test_strict_subsolution_has_negative_residual(flat8):
    bundle = compute_curvature(flat8)
    pair = quadratic_pair(flat8, bundle, [0.0, 0.05, 0.1], 3.0)
    report = verify_subsolution(pair, 0.0)
    assert report.passed
    # residual is exactly -(1+t) at the interior sample
    assert np.isclose(report.max_residual, -1.05, rtol=1e-12)


def test_supersolution_fails_the_check(flat8):
    bundle = compute_curvature(flat8)
    pair = quadratic_pair(flat8, bundle, [0.0, 0.05, 0.1], 1.0)
    report = verify_subsolution(pair, 0.5)
    assert not report.passed
    assert np.isclose(report.max_residual, 1.05, rtol=1e-12)


def test_heat_eigenmode_within_consistency_bound(flat8):
    # Continuum decay rate against the lattice second difference: the
    # mismatch is the (2 pi)^4 h^2 / 12 dispersion defect, padded 5x for
    # the time stencil contribution
    bundle = compute_curvature(flat8)
    model = flat8.model
    h = model.spacing
    lam = (2.0 * np.pi) ** 2
    coords = np.indices(model.grid_shape)[0].reshape(-1) * h
    mode = 0.5 * np.sin(2.0 * np.pi * coords)
    times = np.array([0.001, 0.002, 0.003, 0.004])
    states = [FlowState(float(t), flat8, bundle) for t in times]
    # constant background plus a decaying mode: the only residual left is
    # the lattice dispersion defect, which is positive where the mode dips
    f = np.stack([1.0 + np.exp(-lam * t) * mode for t in times])
    u = np.zeros_like(f)
    tol = 5.0 * (2.0 * np.pi) ** 4 * h**2 / 12.0
    report = verify_subsolution(SubsolutionPair(times, states, f, u), tol)
    assert report.passed
    assert report.max_residual > 0.0


def test_subsolution_rejects_bad_shapes(flat8):
    bundle = compute_curvature(flat8)
    nn = flat8.model.node_count
    times = np.array([0.0, 0.05, 0.1])
    states = [FlowState(float(t), flat8, bundle) for t in times]
    with pytest.raises(ConfigError):
        SubsolutionPair(times, states[:2], np.ones((3, nn)), np.ones((3, nn)))
    with pytest.raises(ConfigError):
        SubsolutionPair(
            np.array([0.0, 0.1, 0.1]), states, np.ones((3, nn)), np.ones((3, nn))
        )
    with pytest.raises(ConfigError):
        SubsolutionPair(times, states, -np.ones((3, nn)), np.ones((3, nn)))
    pair = SubsolutionPair(times[:2], states[:2], np.ones((2, nn)), np.ones((2, nn)))
    with pytest.raises(ConfigError):
        verify_subsolution(pair, 1.0)


# ---------------------------------------------------------------------------
# Coupling integrals and the measured constant
# ---------------------------------------------------------------------------


def test_measured_coupling_zero_field(flat8):
    bundle = compute_curvature(flat8)
    times = np.array([0.05, 0.1])
    states = [FlowState(float(t), flat8, bundle) for t in times]
    nn = flat8.model.node_count
    pair = SubsolutionPair(times, states, np.ones((2, nn)), np.zeros((2, nn)))
    b = ball(geodesic_distance(flat8, 0), 0.25)
    assert measured_coupling(pair, make_params(), b) == 0.0


def test_measured_coupling_constant_field_hand_value(flat8):
    bundle = compute_curvature(flat8)
    times = np.array([0.05, 0.1, 0.15])
    states = [FlowState(float(t), flat8, bundle) for t in times]
    nn = flat8.model.node_count
    c = 0.3
    pair = SubsolutionPair(times, states, np.ones((3, nn)), np.full((3, nn), c))
    b = ball(geodesic_distance(flat8, 0), 0.25)
    vol = b.node_count * (1.0 / 8.0) ** 3
    # sup over t of sqrt(t) * c * vol^(1/3), attained at the last sample
    expected = math.sqrt(0.15) * c * vol ** (1.0 / 3.0)
    assert np.isclose(measured_coupling(pair, make_params(), b), expected, rtol=1e-12)


def test_coupling_hypothesis_violation_raises(flat8):
    bundle = compute_curvature(flat8)
    times = np.array([0.05, 0.1])
    states = [FlowState(float(t), flat8, bundle) for t in times]
    nn = flat8.model.node_count
    pair = SubsolutionPair(times, states, np.ones((2, nn)), np.full((2, nn), 50.0))
    with pytest.raises(HypothesisError):
        verify_max_principle(pair, make_params(coupling_bound=1e-6), 0)


# ---------------------------------------------------------------------------
# Measured maximum principle
# ---------------------------------------------------------------------------


def test_max_principle_zero_field(flat8):
    bundle = compute_curvature(flat8)
    times = np.array([0.05, 0.1])
    states = [FlowState(float(t), flat8, bundle) for t in times]
    nn = flat8.model.node_count
    pair = SubsolutionPair(times, states, np.zeros((2, nn)), np.zeros((2, nn)))
    out = verify_max_principle(pair, make_params(), 0)
    assert out["lhs"] == 0.0
    assert out["C_required"] == 0.0


def test_max_principle_scale_invariance(flat8):
    bundle = compute_curvature(flat8)
    base = quadratic_pair(flat8, bundle, [0.02, 0.05, 0.1, 0.15], 2.0)
    params = make_params()
    ref = verify_max_principle(base, params, 0)["C_required"]
    for c in (0.5, 2.0):
        scaled = SubsolutionPair(
            base.times, base.states, c * base.f, base.u
        )
        got = verify_max_principle(scaled, params, 0)["C_required"]
        assert abs(got - ref) <= 1e-9 * ref


def test_max_principle_earlier_eval_needs_less(flat8):
    bundle = compute_curvature(flat8)
    times = np.array([0.02, 0.05, 0.1, 0.15, 0.2])
    states = [FlowState(float(t), flat8, bundle) for t in times]
    nn = flat8.model.node_count
    pair = SubsolutionPair(
        times, states, np.ones((5, nn)), np.zeros((5, nn))
    )
    c_late = verify_max_principle(pair, make_params(eval_time=0.2), 0)["C_required"]
    c_early = verify_max_principle(pair, make_params(eval_time=0.1), 0)["C_required"]
    assert c_early < c_late


def test_max_principle_full_window_integration(flat8):
    bundle = compute_curvature(flat8)
    pair = quadratic_pair(flat8, bundle, [0.02, 0.05, 0.1, 0.15, 0.2], 2.0)
    params = make_params(eval_time=0.1)
    to_eval = verify_max_principle(pair, params, 0)
    full = verify_max_principle(pair, params, 0, integrate_to_eval=False)
    assert full["lp_norm"] > to_eval["lp_norm"]
    assert full["C_required"] < to_eval["C_required"]
    assert full["eval_time"] == to_eval["eval_time"] == 0.1


def test_max_principle_reports_are_deterministic(flat8):
    bundle = compute_curvature(flat8)
    pair = quadratic_pair(flat8, bundle, [0.02, 0.05, 0.1], 2.0)
    a = verify_max_principle(pair, make_params(), 0)
    b = verify_max_principle(pair, make_params(), 0)
    assert a == b


def test_max_principle_eval_before_samples_rejected(flat8):
    bundle = compute_curvature(flat8)
    pair = quadratic_pair(flat8, bundle, [0.5, 0.6, 0.7], 2.0)
    with pytest.raises(ConfigError):
        verify_max_principle(pair, make_params(eval_time=0.01), 0)


def test_max_principle_su2_rejected(berger):
    bundle = compute_curvature(berger)
    times = np.array([0.05, 0.1])
    states = [FlowState(float(t), berger, bundle) for t in times]
    pair = SubsolutionPair(times, states, np.ones((2, 1)), np.zeros((2, 1)))
    with pytest.raises(ConfigError):
        verify_max_principle(pair, make_params(), 0)


# ---------------------------------------------------------------------------
# Decay envelopes on recorded traces
# ---------------------------------------------------------------------------


def test_decay_envelopes_flat_trace(flat8):
    trace = run_flow(FlowConfig(flat8, time_horizon=1e-4, fixed_dt=2e-5))
    out = decay_envelopes(trace, make_params())
    assert out["f_envelope"] == 0.0
    assert out["u_envelope"] == 0.0
    assert out["smallness_ok"] is True


def test_decay_envelopes_perturbed_trace(bumpy16):
    trace = run_flow(FlowConfig(bumpy16, time_horizon=4e-5, fixed_dt=2e-5))
    out = decay_envelopes(trace, make_params())
    assert 0.0 < out["f_envelope"] < math.inf
    assert 0.0 < out["u_envelope"] < math.inf
    assert out["smallness_ok"] is True


def test_decay_envelopes_rejects_su2_and_empty(berger):
    bundle = compute_curvature(berger)
    fake = SimpleNamespace(
        series={
            "t": np.array([0.0, 0.01]),
            "sup_rm": np.array([1.0, 1.0]),
            "sup_ric": np.array([1.0, 1.0]),
            "e0": np.array([0.0, 0.0]),
        },
        states=[FlowState(0.0, berger, bundle)],
        flags={},
    )
    with pytest.raises(ConfigError):
        decay_envelopes(fake, make_params())
    empty = SimpleNamespace(series={"t": np.array([])}, states=[], flags={})
    with pytest.raises(ConfigError):
        decay_envelopes(empty, make_params())
