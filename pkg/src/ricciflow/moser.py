"""Iterative sup-bound machinery for parabolic sub-solutions.

The central object is a quantitative maximum principle: a nonnegative field
f satisfying d/dt f <= lap f + u f on geodesic balls, with the coupling
field u under an integral growth hypothesis, obeys a pointwise bound by its
space-time L^p norm times an explicit factor built from the ball Sobolev
constant. The sharp constant in front is symbolic, so the artifact never
asserts one; it measures the constant a given pair of fields would require
and checks that measurement for the scalings and monotonicities the bound
structure forces.

Everything here evaluates immutable recorded data; nothing steps a flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .curvature import scalar_laplacian
from .distances import ball, geodesic_distance
from .energies import volume_weights
from .errors import ConfigError, HypothesisError
from .manifolds import FAMILY_SU2

EXPONENT_FLOOR = 1e-12


class ScheduleStage(NamedTuple):
    """One rung of the iteration: integrability exponent, time cut, radius."""

    exponent: float
    time_cut: float
    radius: float


def stage_growth(dim: int) -> float:
    """Per-stage exponent multiplier 1 + 2/n of the iteration."""
    if dim < 3:
        raise ConfigError("iteration schedule needs dimension >= 3")
    return 1.0 + 2.0 / dim


def stage_ratio(dim: int, exponent: float) -> float:
    """Geometric ratio between successive stage bounds in the telescoping."""
    nu = stage_growth(dim)
    if exponent <= dim:
        raise ConfigError("integrability exponent must exceed the dimension")
    return nu ** (2.0 * exponent / (exponent - dim))


def iteration_schedule(
    p_start: float,
    dim: int,
    exponent: float,
    end_time: float,
    radius: float,
    k_max: int,
) -> list[ScheduleStage]:
    """Exact stage values (p_k, time cut, radius) for k = 0..k_max.

    The time cuts increase to ``end_time`` and the radii decrease to
    ``radius/2``, both geometrically; the integrability exponents grow by
    the fixed factor 1 + 2/n per stage.
    """
    if p_start < 1:
        raise ConfigError("starting exponent must be >= 1")
    if k_max < 1:
        raise ConfigError("schedule needs at least one stage")
    if exponent <= dim:
        raise ConfigError("integrability exponent must exceed the dimension")
    nu = stage_growth(dim)
    decay = nu ** (-exponent / (exponent - dim))
    stages = []
    for k in range(k_max + 1):
        shrink = decay**k
        stages.append(
            ScheduleStage(
                p_start * nu**k,
                (1.0 - shrink) * end_time,
                (1.0 + shrink) * radius / 2.0,
            )
        )
    return stages


@dataclass
class MoserParams:
    """Inputs the sup bound depends on.

    ``coupling_bound`` is the declared ceiling for the time-weighted ball
    integral of the coupling field; ``calibration`` stands in for the
    symbolic dimensional constant and defaults to one so measured values
    are reported raw.
    """

    dim: int
    hypothesis_exponent: float
    lp_exponent: float
    sobolev_constant: float
    coupling_bound: float
    ball_radius: float
    eval_time: float
    calibration: float = 1.0

    def __post_init__(self):
        if self.dim < 3:
            raise ConfigError("dimension must be >= 3")
        if self.hypothesis_exponent <= self.dim:
            raise ConfigError("hypothesis exponent must exceed the dimension")
        if self.lp_exponent <= 1:
            raise ConfigError("lp exponent must exceed 1")
        if self.sobolev_constant <= 0:
            raise ConfigError("Sobolev constant must be positive")
        if self.coupling_bound < 0:
            raise ConfigError("coupling bound must be nonnegative")
        if self.ball_radius <= 0 or self.eval_time <= 0:
            raise ConfigError("ball radius and eval time must be positive")
        if self.calibration <= 0:
            raise ConfigError("calibration constant must be positive")


def moser_bound(params: MoserParams, spacetime_lp: float) -> float:
    """Pointwise ceiling from the space-time L^p norm of the field.

    calibration * A^(n/2p) * ((1 + A^(n/(q-n)) mu^(q/(q-n)))/t + 1/r^2)^((n+2)/2p) * lp
    """
    if spacetime_lp < 0:
        raise ConfigError("space-time norm must be nonnegative")
    n = params.dim
    q = params.hypothesis_exponent
    p = params.lp_exponent
    a = params.sobolev_constant
    mu = params.coupling_bound
    growth = 1.0 + a ** (n / (q - n)) * mu ** (q / (q - n))
    rate = growth / params.eval_time + 1.0 / params.ball_radius**2
    return (
        params.calibration
        * a ** (n / (2.0 * p))
        * rate ** ((n + 2.0) / (2.0 * p))
        * spacetime_lp
    )


# ---------------------------------------------------------------------------
# Sub-solution residuals and the measured maximum principle
# ---------------------------------------------------------------------------


@dataclass
class SubsolutionPair:
    """Sampled space-time fields (f, u) on a recorded metric history.

    ``states`` holds one FlowState per time sample; ``f`` and ``u`` are
    (samples, nodes) arrays. The coupling constants are carried for
    reporting; the residual checks below measure, never assume, them.
    """

    times: np.ndarray
    states: list
    f: np.ndarray
    u: np.ndarray
    linear_coupling: float = 0.0
    quadratic_coupling: float = 0.0

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        k = self.times.size
        if len(self.states) != k or self.f.shape[0] != k or self.u.shape[0] != k:
            raise ConfigError("time axis of fields and states must agree")
        if k >= 2 and np.any(np.diff(self.times) <= 0):
            raise ConfigError("sample times must increase strictly")
        if self.f.min() < 0 or self.u.min() < 0:
            raise ConfigError("sub-solution fields must be nonnegative")


@dataclass
class ResidualReport:
    """Outcome of a sub-solution check."""

    max_residual: float
    endpoint_residual: float
    tolerance: float
    passed: bool


def _time_derivative(times: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Second-order df/dt on a possibly nonuniform sample axis."""
    k = times.size
    out = np.empty_like(f)
    for i in range(k):
        if 0 < i < k - 1:
            h1 = times[i] - times[i - 1]
            h2 = times[i + 1] - times[i]
            out[i] = (
                -h2 / (h1 * (h1 + h2)) * f[i - 1]
                + (h2 - h1) / (h1 * h2) * f[i]
                + h1 / (h2 * (h1 + h2)) * f[i + 1]
            )
        elif i == 0:
            h1 = times[1] - times[0]
            h2 = times[2] - times[1]
            out[0] = (
                -(2 * h1 + h2) / (h1 * (h1 + h2)) * f[0]
                + (h1 + h2) / (h1 * h2) * f[1]
                - h1 / (h2 * (h1 + h2)) * f[2]
            )
        else:
            h1 = times[-2] - times[-3]
            h2 = times[-1] - times[-2]
            out[-1] = (
                h2 / (h1 * (h1 + h2)) * f[-3]
                - (h1 + h2) / (h1 * h2) * f[-2]
                + (2 * h2 + h1) / (h2 * (h1 + h2)) * f[-1]
            )
    return out


def verify_subsolution(pair: SubsolutionPair, tolerance: float) -> ResidualReport:
    """Largest violation of d/dt f <= lap f + u f over the samples.

    Interior time samples use the central stencil and drive the verdict;
    the one-sided endpoint residuals are reported alongside since a single
    noisy boundary sample should not fail an otherwise clean pair.
    """
    if pair.times.size < 3:
        raise ConfigError("sub-solution check needs at least 3 time samples")
    dft = _time_derivative(pair.times, pair.f)
    worst_interior = -math.inf
    worst_ends = -math.inf
    for i, state in enumerate(pair.states):
        lap = scalar_laplacian(state.metric, state.curvature, pair.f[i])
        res = float((dft[i] - lap - pair.u[i] * pair.f[i]).max())
        if 0 < i < pair.times.size - 1:
            worst_interior = max(worst_interior, res)
        else:
            worst_ends = max(worst_ends, res)
    return ResidualReport(
        worst_interior, worst_ends, tolerance, worst_interior <= tolerance
    )


def measured_coupling(pair: SubsolutionPair, params: MoserParams, ball_obj) -> float:
    """Max over samples of t^((q-n)/q) (int_B u^(q/2) dv_t)^(2/q)."""
    q = params.hypothesis_exponent
    n = params.dim
    best = 0.0
    for i, state in enumerate(pair.states):
        t = float(pair.times[i])
        if t <= 0:
            continue
        w = volume_weights(state.metric, state.curvature)[ball_obj.nodes]
        integral = float((w * pair.u[i][ball_obj.nodes] ** (q / 2.0)).sum())
        best = max(best, t ** ((q - n) / q) * integral ** (2.0 / q))
    return best


def verify_max_principle(
    pair: SubsolutionPair,
    params: MoserParams,
    center: int,
    integrate_to_eval: bool = True,
) -> dict:
    """Measure the constant the sup bound would need on this pair.

    lhs is the field value at the center at the evaluation time; rhs is
    the bound evaluated with calibration one and the measured space-time
    L^p norm over the ball. Their ratio is the constant the inequality
    asks for; callers check its invariances, not its absolute size.

    The space-time integral runs to the evaluation time by default;
    ``integrate_to_eval=False`` integrates over the whole sample range for
    sensitivity comparisons.
    """
    times = pair.times
    if times.size < 2:
        raise ConfigError("max-principle check needs at least 2 time samples")
    base = pair.states[0].metric
    if base.model.family == FAMILY_SU2:
        raise ConfigError("max-principle check needs a ball geometry")
    dist = geodesic_distance(base, int(center))
    ball_obj = ball(dist, params.ball_radius)

    k_eval = int(np.argmin(np.abs(times - params.eval_time)))
    if k_eval == 0:
        raise ConfigError("evaluation time precedes the first positive sample")
    eval_time = float(times[k_eval])
    k_hi = k_eval if integrate_to_eval else times.size - 1

    mu_meas = measured_coupling(pair, params, ball_obj)
    if mu_meas > params.coupling_bound * (1 + 1e-9) + 1e-300:
        raise HypothesisError(
            f"measured coupling integral {mu_meas:.6g} exceeds the declared "
            f"bound {params.coupling_bound:.6g}"
        )

    p = params.lp_exponent
    space = np.empty(k_hi + 1)
    for i in range(k_hi + 1):
        state = pair.states[i]
        w = volume_weights(state.metric, state.curvature)[ball_obj.nodes]
        space[i] = float((w * pair.f[i][ball_obj.nodes] ** p).sum())
    lp_norm = float(np.trapezoid(space, times[: k_hi + 1]) ** (1.0 / p))

    eval_params = replace(params, eval_time=eval_time, calibration=1.0)
    lhs = float(pair.f[k_eval, center])
    rhs = moser_bound(eval_params, lp_norm)
    if lhs == 0.0:
        c_required = 0.0
    elif rhs == 0.0:
        c_required = math.inf
    else:
        c_required = lhs / rhs
    return {
        "lhs": lhs,
        "rhs": rhs,
        "C_required": c_required,
        "measured_coupling": mu_meas,
        "lp_norm": lp_norm,
        "eval_time": eval_time,
    }


def regularize_low_p(f: np.ndarray, j: int) -> np.ndarray:
    """Shift a field away from zero by 1/j for the p < 2 bootstrap."""
    if j < 1:
        raise ConfigError("regularization index must be >= 1")
    return f + 1.0 / j


# ---------------------------------------------------------------------------
# Derived envelopes on recorded traces
# ---------------------------------------------------------------------------


def decay_envelopes(trace, params: MoserParams, tracker=None) -> dict:
    """Fitted envelope constants for the derived curvature decay bounds.

    f_envelope: max over recorded t > 0 of t * sup|Rm|(t).
    u_envelope: max over t > 0 of t^(n/(n+2)) sup|Ric|(t) divided by
    A^(n/(n+2)) times (initial ball Ricci integral + r^(-4/(n+2)) e0(t)).
    smallness_ok echoes whether the initial ball energies sat below the
    configured threshold.
    """
    times = trace.series["t"]
    if times.size == 0:
        raise ConfigError("empty trace")
    n = params.dim
    sup_rm = trace.series["sup_rm"]
    sup_ric = trace.series["sup_ric"]
    pos = times > 0
    f_env = float((times[pos] * sup_rm[pos]).max()) if pos.any() else 0.0

    state0 = trace.states[0]
    if state0.metric.model.family == FAMILY_SU2:
        raise ConfigError("envelope check needs a ball geometry")
    center = int(np.argmax(state0.curvature.norm_rm))
    dist = geodesic_distance(state0.metric, center)
    ball_obj = ball(dist, params.ball_radius)
    w0 = volume_weights(state0.metric, state0.curvature)[ball_obj.nodes]
    ric0 = state0.curvature.norm_ric[ball_obj.nodes]
    half_exp = (n + 2.0) / 2.0
    init_term = float((w0 * ric0**half_exp).sum()) ** (2.0 / (n + 2.0))

    if tracker is not None:
        e0_series = np.maximum.accumulate(np.asarray(tracker.sup_series))
    else:
        e0_series = trace.series["e0"]
    a_factor = params.sobolev_constant ** (n / (n + 2.0))
    r_term = params.ball_radius ** (-4.0 / (n + 2.0))
    u_env = 0.0
    for i in np.flatnonzero(pos):
        scale = a_factor * (init_term + r_term * e0_series[i])
        weighted = times[i] ** (n / (n + 2.0)) * sup_ric[i]
        if weighted == 0.0:
            continue
        if scale <= EXPONENT_FLOOR:
            u_env = math.inf
            break
        u_env = max(u_env, weighted / scale)

    return {
        "f_envelope": f_env,
        "u_envelope": u_env,
        "smallness_ok": bool(trace.flags.get("initial_energy_ok", False)),
    }
