"""Trace and report serialization.

CSV schema is fixed: one header row, nine columns, every value printed
with 17 significant digits so a rerun with the same config and seed is
byte-identical. Reports render as an indented key-value tree in a stable
order for the same reason. Nothing here is locale- or platform-dependent.
"""

from __future__ import annotations

import io
import math

import numpy as np

from .errors import ConfigError
from .flow import SERIES_KEYS, FlowTrace, Termination
from .verifier import EstimateReport

CSV_HEADER = "t,sup_rm,sup_ric,dev,lambda_min,lambda_max,diam,e0,sobolev"


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.17g}"
    return str(value)


def trace_to_csv(trace: FlowTrace) -> str:
    series = trace.series
    rows = [CSV_HEADER]
    count = len(series["t"])
    for i in range(count):
        rows.append(",".join(_fmt(float(series[k][i])) for k in SERIES_KEYS))
    return "\n".join(rows) + "\n"


def write_trace_csv(trace: FlowTrace, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(trace_to_csv(trace))


def read_trace_csv(path) -> FlowTrace:
    """Rebuild a series-only trace from a CSV written by write_trace_csv.

    States and termination details are not serialized in the CSV; the
    returned trace carries empty states and a placeholder termination, and
    is suitable for re-running the series-level checks.
    """
    try:
        with open(path, "r", encoding="ascii") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except FileNotFoundError:
        raise ConfigError(f"trace file not found: {path}") from None
    if not lines or lines[0] != CSV_HEADER:
        raise ConfigError(f"{path}: not a trace CSV (bad header)")
    series = {k: [] for k in SERIES_KEYS}
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(SERIES_KEYS):
            raise ConfigError(f"{path}: row with {len(parts)} columns")
        for key, raw in zip(SERIES_KEYS, parts):
            series[key].append(float(raw))
    series = {k: np.asarray(v, dtype=np.float64) for k, v in series.items()}
    t_last = float(series["t"][-1]) if series["t"].size else 0.0
    return FlowTrace(
        states=[],
        series=series,
        termination=Termination("Recorded", t_last, detail="read back from CSV"),
        flags={},
        config=None,
    )


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------


def render_report(report: EstimateReport) -> str:
    out = io.StringIO()
    out.write("report:\n")
    out.write(f"  passed: {_fmt(report.passed)}\n")
    out.write("  checks:\n")
    for c in report.checks:
        out.write(f"    {c.name}:\n")
        out.write(f"      display: {c.display}\n")
        out.write(f"      fitted_constant: {_fmt(c.fitted_constant)}\n")
        out.write(f"      worst_margin: {_fmt(c.worst_margin)}\n")
        out.write(f"      passed: {_fmt(c.passed)}\n")
    if report.exponent_fits:
        out.write("  exponent_fits:\n")
        for f in report.exponent_fits:
            out.write(f"    {f.series}:\n")
            out.write(f"      slope: {_fmt(f.slope)}\n")
            out.write(f"      target: {_fmt(f.target)}\n")
            out.write(f"      stderr: {_fmt(f.stderr)}\n")
            out.write(f"      samples: {_fmt(f.sample_count)}\n")
    if report.config_echo:
        out.write("  config:\n")
        for k, v in report.config_echo.items():
            out.write(f"    {k}: {_fmt(v)}\n")
    return out.getvalue()


def write_report(report: EstimateReport, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(render_report(report))
