"""Post-run estimate checks: fitted constants, exponent fits, monitors.

Every check measures a constant (always a max over recorded samples, so
enlarging the window can only increase it) and passes or fails against a
structural condition: finiteness for the fitted-constant estimates, fixed
numeric ceilings for the monitors, a caller-supplied threshold for the
flatness product. The decay estimates carry a secondary log-log slope
sanity check on the tail of the decaying part of the series; it is
one-sided because the estimates are upper envelopes, and it goes vacuous
when the series has no usable decaying tail (fewer than 8 positive
samples past the peak).

Check display ids are fixed short strings kept stable for report
consumers; internal names say what each check does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .flow import MONITOR_GUARD, FlowTrace

CHECK_DISPLAY = {
    "deviation_growth": "(1.4)",
    "curvature_decay": "(1.5)",
    "ricci_decay": "(1.6)",
    "metric_equivalence": "(3.8)",
    "sobolev_drift": "(3.9)",
    "energy_doubling": "(3.10)",
    "diameter_drift": "(4.1)",
    "almost_flat_product": "(4.2)",
}

SLOPE_TOLERANCE = 0.15
MIN_SLOPE_SAMPLES = 8
MIN_SMOOTHING_SAMPLES = 20


@dataclass
class CheckResult:
    name: str
    display: str
    fitted_constant: float
    worst_margin: float
    passed: bool


@dataclass
class ExponentFit:
    series: str
    slope: float
    target: float
    stderr: float
    sample_count: int


@dataclass
class EstimateReport:
    """All checks and exponent fits for one trace, plus a config echo."""

    checks: list = field(default_factory=list)
    exponent_fits: list = field(default_factory=list)
    config_echo: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def fit_exponent(times: np.ndarray, values: np.ndarray, window) -> dict:
    """Least-squares slope of log(value) against log(t) inside a window.

    ``window`` is an inclusive (t_lo, t_hi) time range. Returns the slope
    and its standard error; rejects windows with nonpositive values or
    fewer than 8 samples, since a two-point fit proves nothing.
    """
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    t_lo, t_hi = window
    pick = (times >= t_lo) & (times <= t_hi) & (times > 0)
    if pick.sum() < MIN_SLOPE_SAMPLES:
        raise ConfigError(
            f"exponent fit needs >= {MIN_SLOPE_SAMPLES} positive-time samples"
        )
    v = values[pick]
    if v.min() <= 0:
        raise ConfigError("exponent fit window contains nonpositive values")
    x = np.log(times[pick])
    y = np.log(v)
    coeffs, residuals, *_ = np.polyfit(x, y, 1, full=True)
    slope = float(coeffs[0])
    dof = x.size - 2
    if dof > 0 and residuals.size:
        var = float(residuals[0]) / dof
        denom = float(((x - x.mean()) ** 2).sum())
        stderr = math.sqrt(var / denom) if denom > 0 else math.inf
    else:
        stderr = 0.0
    return {"slope": slope, "stderr": stderr, "count": int(x.size)}


def _decaying_tail(times: np.ndarray, values: np.ndarray):
    """Trailing half of the strictly-post-peak part of a positive series.

    The estimates bound the tail behavior; samples before the series peak
    say nothing about decay, and the early post-peak shoulder of a
    converging flow flattens the fit, so only the trailing half by index
    enters.
    """
    pos = (times > 0) & (values > 0)
    if pos.sum() == 0:
        return None
    t = times[pos]
    v = values[pos]
    peak = int(np.argmax(v))
    tail_t = t[peak + 1 :]
    tail_v = v[peak + 1 :]
    if tail_t.size < 2 * MIN_SLOPE_SAMPLES:
        return None
    half = tail_t.size // 2
    return tail_t[half:], tail_v[half:]


def _slope_check(times, values, series_name, target):
    """One-sided slope sanity on the decaying tail; None when vacuous."""
    tail = _decaying_tail(times, values)
    if tail is None:
        return None
    fit = fit_exponent(tail[0], tail[1], (tail[0][0], tail[0][-1]))
    return ExponentFit(series_name, fit["slope"], target, fit["stderr"], fit["count"])


def check_smoothing_estimates(trace: FlowTrace):
    """Fitted constants for deviation growth and the two curvature decays.

    Each constant is the max over positive-time samples of the series
    value scaled by the display's power of t; the decay checks also pass
    their slope sanity when a usable tail exists.
    """
    times = trace.series["t"]
    pos = times > 0
    if pos.sum() < MIN_SMOOTHING_SAMPLES:
        raise ConfigError(
            f"smoothing checks need >= {MIN_SMOOTHING_SAMPLES} positive-time samples"
        )
    n = trace.states[0].metric.model.dim if trace.states else trace.config.initial_metric.model.dim
    t = times[pos]
    checks = []
    fits = []

    dev_const = float((trace.series["dev"][pos] / t ** (2.0 / (n + 2.0))).max())
    checks.append(
        CheckResult(
            "deviation_growth",
            CHECK_DISPLAY["deviation_growth"],
            dev_const,
            math.inf,
            bool(np.isfinite(dev_const)),
        )
    )

    for name, key, power, target in (
        ("curvature_decay", "sup_rm", 1.0, -1.0),
        ("ricci_decay", "sup_ric", n / (n + 2.0), -n / (n + 2.0)),
    ):
        const = float((trace.series[key][pos] * t**power).max())
        fit = _slope_check(times, trace.series[key], key, target)
        margin = math.inf
        passed = bool(np.isfinite(const))
        if fit is not None:
            fits.append(fit)
            margin = (fit.target + SLOPE_TOLERANCE) - fit.slope
            passed = passed and margin >= 0
        checks.append(
            CheckResult(name, CHECK_DISPLAY[name], const, margin, passed)
        )
    return checks, fits


def check_monitors(trace: FlowTrace):
    """Window versions of the three run monitors, from the series alone."""
    lam_lo = float(trace.series["lambda_min"].min())
    lam_hi = float(trace.series["lambda_max"].max())
    margin_eq = min(lam_lo - (0.5 - MONITOR_GUARD), (2.0 + MONITOR_GUARD) - lam_hi)
    checks = [
        CheckResult(
            "metric_equivalence",
            CHECK_DISPLAY["metric_equivalence"],
            max(lam_hi, 1.0 / lam_lo if lam_lo > 0 else math.inf),
            margin_eq,
            bool(margin_eq >= 0),
        )
    ]

    sob = trace.series["sobolev"]
    if sob.size and np.isfinite(sob[0]):
        ceiling = 4.0 * sob[0] * (1 + MONITOR_GUARD)
        worst = float(np.nanmax(sob))
        margin = ceiling - worst
        checks.append(
            CheckResult(
                "sobolev_drift",
                CHECK_DISPLAY["sobolev_drift"],
                float(worst / sob[0]) if sob[0] > 0 else math.inf,
                margin,
                bool(margin >= 0),
            )
        )
    else:
        checks.append(
            CheckResult(
                "sobolev_drift",
                CHECK_DISPLAY["sobolev_drift"],
                float("nan"),
                math.inf,
                True,
            )
        )

    e0 = trace.series["e0"]
    if e0.size and np.isfinite(e0[0]):
        # e0 is a running max, so its last value is its max; comparing the
        # envelope against 2x the initial sup is equivalent to comparing
        # every instantaneous sup.
        ceiling = 2.0 * e0[0] * (1 + MONITOR_GUARD)
        worst = float(np.nanmax(e0))
        margin = ceiling - worst
        checks.append(
            CheckResult(
                "energy_doubling",
                CHECK_DISPLAY["energy_doubling"],
                float(worst / e0[0]) if e0[0] > 0 else (math.inf if worst > 0 else 1.0),
                margin,
                bool(margin >= 0 or (e0[0] == 0.0 and worst == 0.0)),
            )
        )
    else:
        checks.append(
            CheckResult(
                "energy_doubling",
                CHECK_DISPLAY["energy_doubling"],
                float("nan"),
                math.inf,
                True,
            )
        )
    return checks


def check_diameter(trace: FlowTrace) -> CheckResult:
    """Fitted constant for the diameter drift envelope."""
    times = trace.series["t"]
    diam = trace.series["diam"]
    if diam.size == 0 or not np.isfinite(diam[0]):
        return CheckResult(
            "diameter_drift",
            CHECK_DISPLAY["diameter_drift"],
            float("nan"),
            math.inf,
            True,
        )
    n = trace.states[0].metric.model.dim if trace.states else trace.config.initial_metric.model.dim
    pos = times > 0
    if not pos.any():
        const = 0.0
    else:
        ratio = diam[pos] / diam[0]
        const = float(
            (np.abs(np.log(ratio)) / times[pos] ** (2.0 / (n + 2.0))).max()
        )
    return CheckResult(
        "diameter_drift",
        CHECK_DISPLAY["diameter_drift"],
        const,
        math.inf,
        bool(np.isfinite(const)),
    )


def check_almost_flat(trace: FlowTrace, t0: float, eps0: float) -> CheckResult:
    """Curvature-times-squared-diameter product at a chosen time."""
    times = trace.series["t"]
    if times.size == 0 or t0 < times[0] - 1e-12 or t0 > times[-1] + 1e-12:
        raise ConfigError(f"t0={t0:g} outside the recorded range")
    if eps0 <= 0:
        raise ConfigError("eps0 must be positive")
    k = int(np.argmin(np.abs(times - t0)))
    product = float(trace.series["sup_rm"][k] * trace.series["diam"][k] ** 2)
    return CheckResult(
        "almost_flat_product",
        CHECK_DISPLAY["almost_flat_product"],
        product,
        eps0 - product,
        product <= eps0,
    )


def build_report(
    trace: FlowTrace,
    flatness_time: float | None = None,
    flatness_threshold: float = 1.0,
    include_smoothing: bool = True,
) -> EstimateReport:
    """Assemble the full report for a trace.

    The smoothing checks need 20 positive-time samples; short traces can
    skip them (include_smoothing=False) and still get monitors, diameter,
    and the flatness product. The flatness time defaults to the final
    recorded time.
    """
    report = EstimateReport()
    if include_smoothing:
        checks, fits = check_smoothing_estimates(trace)
        report.checks.extend(checks)
        report.exponent_fits.extend(fits)
    report.checks.extend(check_monitors(trace))
    report.checks.append(check_diameter(trace))
    diam = trace.series["diam"]
    if diam.size and np.isfinite(diam).all():
        t0 = flatness_time if flatness_time is not None else float(trace.series["t"][-1])
        report.checks.append(check_almost_flat(trace, t0, flatness_threshold))
    cfg = trace.config
    if cfg is not None:
        model = cfg.initial_metric.model
        report.config_echo = {
            "family": model.family,
            "dim": model.dim,
            "resolution": model.resolution,
            "time_horizon": cfg.time_horizon,
            "ball_radius": cfg.ball_radius,
            "ricci_bound": cfg.ricci_bound,
            "energy_threshold": cfg.energy_threshold,
            "seed": cfg.seed,
            "termination": trace.termination.kind,
            "termination_t": trace.termination.t,
        }
        if trace.termination.monitor:
            report.config_echo["termination_monitor"] = trace.termination.monitor
    return report
