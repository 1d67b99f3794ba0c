"""Command line interface: run, oracle, sweep, verify.

Exit codes are a contract for CI: 0 all enabled checks passed, 1 a check
failed, 2 the configuration was rejected, 3 the simulation failed
numerically (blowup or step underflow). Traces are written even for
failed runs so the failure can be inspected.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from .config import SWEEP_PARAMETERS, ScenarioConfig, load_scenario, scenario_from_mapping
from .curvature import compute_curvature, metric_comparison
from .errors import ConfigError, RicciflowError
from .flow import (
    TERMINATION_BLOWUP,
    TERMINATION_UNDERFLOW,
    FlowConfig,
    FlowState,
    FlowTrace,
    exact_solution_oracle,
    run_flow,
)
from .manifolds import (
    build_su2_metric,
    build_torus_metric,
    build_warped_sphere_metric,
    node_coordinates,
)
from .moser import SubsolutionPair, iteration_schedule, verify_subsolution
from .traceio import read_trace_csv, render_report, write_report, write_trace_csv
from .verifier import build_report

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

ORACLE_CASES = ("einstein", "flat", "berger", "heat-eigenmode", "moser-schedule")


def _apply_overrides(scenario: ScenarioConfig, args) -> ScenarioConfig:
    if getattr(args, "seed", None) is not None:
        scenario.seed = args.seed
        scenario.flow.seed = args.seed
    if getattr(args, "cadence", None) is not None:
        scenario.flow.cadence = args.cadence
    if getattr(args, "dense_centers", False):
        scenario.flow.dense_centers = True
    if getattr(args, "out", None):
        scenario.output_dir = args.out
    return scenario


def _numerical_failure(trace: FlowTrace) -> bool:
    return trace.termination.kind in (TERMINATION_BLOWUP, TERMINATION_UNDERFLOW)


def _positive_samples(trace: FlowTrace) -> int:
    return int((trace.series["t"] > 0).sum())


def _execute(scenario: ScenarioConfig, tag: str = "") -> tuple[int, FlowTrace, object]:
    """Run one scenario, write its artifacts, and return (code, trace, report)."""
    trace = run_flow(scenario.flow)
    os.makedirs(scenario.output_dir, exist_ok=True)
    stem = scenario.prefix + (f"_{tag}" if tag else "")
    csv_path = os.path.join(scenario.output_dir, f"{stem}_trace.csv")
    write_trace_csv(trace, csv_path)
    term = trace.termination
    line = f"termination: {term.kind} at t={term.t:.6g}"
    if term.monitor:
        line += f" monitor={term.monitor}"
    if term.detail:
        line += f" ({term.detail})"
    print(line)
    print(f"trace: {csv_path}")
    if _numerical_failure(trace):
        return EXIT_NUMERICAL, trace, None
    if not scenario.checks.enabled:
        return EXIT_OK, trace, None
    include = scenario.checks.include_smoothing and _positive_samples(trace) >= 20
    report = build_report(
        trace,
        flatness_time=scenario.checks.flatness_time,
        flatness_threshold=scenario.checks.flatness_threshold,
        include_smoothing=include,
    )
    report_path = os.path.join(scenario.output_dir, f"{stem}_report.txt")
    write_report(report, report_path)
    sys.stdout.write(render_report(report))
    print(f"report: {report_path}")
    return (EXIT_OK if report.passed else EXIT_CHECK_FAILED), trace, report


def cmd_run(args) -> int:
    scenario = _apply_overrides(load_scenario(args.config), args)
    code, _, _ = _execute(scenario)
    return code


# ---------------------------------------------------------------------------
# Oracle cases
# ---------------------------------------------------------------------------


def _oracle_einstein() -> tuple[float, float, str]:
    initial = build_warped_sphere_metric(3, 40)
    cfg = FlowConfig(
        initial_metric=initial,
        time_horizon=0.2,
        ball_radius=1.0,
        fixed_dt=1e-4,
        stop_on_monitor_breach=False,
        cadence=1000,
    )
    trace = run_flow(cfg)
    exact = exact_solution_oracle(initial, "einstein_shrinker", trace.termination.t)
    dev = metric_comparison(trace.states[-1].metric, exact).deviation
    return dev, 1e-6, "round shrinking sphere vs homothety at t=0.2, dt=1e-4"


def _oracle_flat() -> tuple[float, float, str]:
    initial = build_torus_metric(3, 8)
    cfg = FlowConfig(
        initial_metric=initial,
        time_horizon=0.1,
        ball_radius=0.25,
        fixed_dt=1e-4,
        cadence=250,
    )
    trace = run_flow(cfg)
    dev = float(np.abs(trace.series["dev"]).max())
    dev = max(dev, float(np.abs(trace.series["sup_rm"]).max()))
    return dev, 1e-15, "flat torus stationarity over 1000 steps"


def _oracle_berger() -> tuple[float, float, str]:
    finals = []
    for dt in (2e-3, 1e-3):
        cfg = FlowConfig(
            initial_metric=build_su2_metric(0.25, 1.0, 1.0),
            time_horizon=0.05,
            fixed_dt=dt,
            stop_on_monitor_breach=False,
            cadence=5,
        )
        trace = run_flow(cfg)
        finals.append(trace.states[-1].metric)
    dev = metric_comparison(finals[0], finals[1]).deviation
    return dev, 1e-8, "step-halving agreement for the (0.25, 1, 1) frame flow"


def _oracle_heat_eigenmode() -> tuple[float, float, str]:
    res = 16
    metric = build_torus_metric(3, res)
    bundle = compute_curvature(metric)
    x1 = node_coordinates(metric.model)[:, 0]
    rate = 4.0 * math.pi**2
    times = np.arange(5) * 1e-4
    states, fs = [], []
    for t in times:
        states.append(FlowState(float(t), metric, bundle))
        fs.append(1.0 + math.exp(-rate * t) * np.cos(2.0 * math.pi * x1))
    f = np.stack(fs)
    pair = SubsolutionPair(times, states, f, np.zeros_like(f))
    h = metric.model.spacing
    tol = 5.0 * (2.0 * math.pi) ** 4 * h**2 / 12.0
    report = verify_subsolution(pair, tol)
    return report.max_residual, tol, "decaying lattice eigenmode heat residual"


def _oracle_moser_schedule() -> tuple[float, float, str]:
    stages = iteration_schedule(2.0, 4, 6.0, 1.0, 1.0, 1)
    dev = max(
        abs(stages[1].exponent - 3.0),
        abs(stages[1].time_cut - 0.703704),
        abs(stages[1].radius - 0.648148),
    )
    return dev, 1e-6, "stage-1 schedule values for p0=2, n=4, q=6"


def cmd_oracle(args) -> int:
    runners = {
        "einstein": _oracle_einstein,
        "flat": _oracle_flat,
        "berger": _oracle_berger,
        "heat-eigenmode": _oracle_heat_eigenmode,
        "moser-schedule": _oracle_moser_schedule,
    }
    dev, tol, label = runners[args.case]()
    ok = dev <= tol
    print(
        f"oracle {args.case}: {label}\n"
        f"max_deviation: {dev:.6e} tolerance: {tol:.6e} "
        f"{'PASS' if ok else 'FAIL'}"
    )
    return EXIT_OK if ok else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# Sweep and verify
# ---------------------------------------------------------------------------


def _parse_values(raw: str, parameter: str) -> list:
    caster = SWEEP_PARAMETERS[parameter][2]
    vals = [v.strip() for v in raw.split(",") if v.strip()]
    if not vals:
        raise ConfigError("sweep needs a nonempty value list")
    try:
        return [caster(v) for v in vals]
    except ValueError:
        raise ConfigError(f"sweep values for {parameter} must be {caster.__name__}s") from None


def cmd_sweep(args) -> int:
    from .config import apply_sweep_value

    base = load_scenario(args.config)
    if args.parameter not in SWEEP_PARAMETERS:
        raise ConfigError(
            f"sweep parameter must be one of {sorted(SWEEP_PARAMETERS)}, "
            f"got {args.parameter!r}"
        )
    values = _parse_values(args.values, args.parameter)
    rows = []
    worst = EXIT_OK
    for value in values:
        raw = apply_sweep_value(base.raw, args.parameter, value)
        scenario = _apply_overrides(scenario_from_mapping(raw), args)
        tag = f"{args.parameter}_{value}"
        code, trace, report = _execute(scenario, tag=tag)
        fitted = {}
        if report is not None:
            fitted = {c.name: c.fitted_constant for c in report.checks}
        rows.append((value, code, fitted))
        if code == EXIT_NUMERICAL:
            return EXIT_NUMERICAL
        worst = max(worst, code)

    names = sorted({k for _, _, fitted in rows for k in fitted})
    header = ["value", "exit"] + names
    lines = ["\t".join(header)]
    for value, code, fitted in rows:
        cells = [str(value), str(code)]
        cells += [f"{fitted[k]:.17g}" if k in fitted else "nan" for k in names]
        lines.append("\t".join(cells))
    table = "\n".join(lines) + "\n"
    os.makedirs(base.output_dir if not args.out else args.out, exist_ok=True)
    summary_path = os.path.join(
        args.out or base.output_dir, f"{base.prefix}_sweep_{args.parameter}.tsv"
    )
    with open(summary_path, "w", encoding="ascii") as fh:
        fh.write(table)
    sys.stdout.write(table)
    print(f"summary: {summary_path}")

    assert_cfg = base.checks.sweep_assert
    if assert_cfg is not None:
        name = assert_cfg["quantity"]
        seq = [fitted.get(name, float("nan")) for _, _, fitted in rows]
        if any(math.isnan(v) for v in seq):
            raise ConfigError(f"sweep_assert quantity {name!r} missing from reports")
        diffs = np.diff(seq)
        ok = (
            bool((diffs >= -1e-12).all())
            if assert_cfg["direction"] == "nondecreasing"
            else bool((diffs <= 1e-12).all())
        )
        print(f"sweep_assert {name} {assert_cfg['direction']}: {'PASS' if ok else 'FAIL'}")
        if not ok:
            worst = max(worst, EXIT_CHECK_FAILED)
    return worst


def cmd_verify(args) -> int:
    scenario = load_scenario(args.config)
    trace = read_trace_csv(args.trace)
    trace.config = scenario.flow
    include = scenario.checks.include_smoothing and _positive_samples(trace) >= 20
    report = build_report(
        trace,
        flatness_time=scenario.checks.flatness_time,
        flatness_threshold=scenario.checks.flatness_threshold,
        include_smoothing=include,
    )
    sys.stdout.write(render_report(report))
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ricciflow",
        description="Evolve closed-manifold metrics by curvature flow and "
        "check quantitative smoothing estimates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one scenario config")
    p_run.add_argument("--config", required=True, help="scenario YAML path")
    p_run.add_argument("--out", default=None, help="output directory override")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--cadence", type=int, default=None)
    p_run.add_argument("--dense-centers", action="store_true")

    p_oracle = sub.add_parser("oracle", help="run a closed-form regression case")
    p_oracle.add_argument("case", choices=ORACLE_CASES)

    p_sweep = sub.add_parser("sweep", help="run a scenario across parameter values")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--parameter", required=True)
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--cadence", type=int, default=None)
    p_sweep.add_argument("--dense-centers", action="store_true")

    p_verify = sub.add_parser("verify", help="re-run checks on an existing trace CSV")
    p_verify.add_argument("--config", required=True)
    p_verify.add_argument("--trace", required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": cmd_run,
        "oracle": cmd_oracle,
        "sweep": cmd_sweep,
        "verify": cmd_verify,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RicciflowError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
