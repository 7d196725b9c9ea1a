"""Readers and writers for every file format the package uses.

CSV schemas (header row required, columns in any order, extra columns
ignored):

* curve: ``soc,ocv_v``
* trace: ``time_s,current_a[,ocv_v]``
* plot data: ``series,x,y,x_unit,y_unit``
* manifest: ``cycle_id,trace_path,actual_capacity_ah``
* evaluation report: ``cycle_id,estimated_ah,actual_ah,are_percent``

Scenario configs and result documents are JSON objects. Floats are written
with 17 significant digits so they read back bit-exact.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .coulomb import DischargeTrace
from .curve import OCVCurve, build_curve, enforce_monotone
from .errors import OcvAlignError, ParseError, ValidationError
from .estimator import EstimationProblem, EstimationResult
from .metrics import EvaluationReport, format_percent
from .synth import AgingScenario, reference_nominal_curve


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _read_rows(path, required, optional=(), numeric=None):
    """Parse a headed CSV into ``{column: list}``; ``numeric`` columns become floats."""
    numeric = set(required) | set(optional) if numeric is None else set(numeric)
    path = Path(path)
    try:
        handle = open(path, newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise ParseError(f"cannot open: {exc.strerror}", path=path) from exc
    with handle:
        reader = csv.reader(handle)
        header = None
        for row in reader:
            if row and any(cell.strip() for cell in row):
                header = [cell.strip() for cell in row]
                break
        if header is None:
            raise ParseError("empty file, expected a header row", line=1, path=path)
        missing = [c for c in required if c not in header]
        if missing:
            raise ParseError(
                f"missing column(s) {', '.join(missing)}; header is {','.join(header)}",
                line=reader.line_num,
                column=missing[0],
                path=path,
            )
        wanted = [c for c in (*required, *optional) if c in header]
        pos = {c: header.index(c) for c in wanted}
        data = {c: [] for c in wanted}
        for row in reader:
            if not row or not any(cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=reader.line_num, path=path)
            for c in wanted:
                cell = row[pos[c]].strip()
                if c in numeric:
                    try:
                        value = float(cell)
                    except ValueError:
                        raise ParseError(f"not a number: {cell!r}", line=reader.line_num, column=c, path=path) from None
                    if not math.isfinite(value):
                        raise ParseError(f"non-finite value {cell!r}", line=reader.line_num, column=c, path=path)
                    data[c].append(value)
                else:
                    data[c].append(cell)
    return data


def _write_rows(path, header, rows):
    if hasattr(path, "write"):
        writer = csv.writer(path, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return
    with open(path, "w", newline="", encoding="utf-8") as handle:
        _write_rows(handle, header, rows)


def read_curve_csv(path, repair: bool = False, label: Optional[str] = None) -> OCVCurve:
    """Load an OCV-SOC curve; ``repair`` runs isotonic repair on noisy OCV first."""
    data = _read_rows(path, ("soc", "ocv_v"))
    soc, ocv = np.array(data["soc"]), np.array(data["ocv_v"])
    label = Path(path).stem if label is None else label
    try:
        if repair:
            order = np.argsort(soc, kind="stable")
            soc, ocv = enforce_monotone(soc[order], ocv[order])
        return build_curve(soc, ocv, label)
    except OcvAlignError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def write_curve_csv(curve: OCVCurve, path) -> None:
    _write_rows(path, ("soc", "ocv_v"), ((fmt(z), fmt(v)) for z, v in zip(curve.soc, curve.ocv)))


def read_trace_csv(path) -> DischargeTrace:
    """Load a trace and integrate discharge capacity from the current."""
    data = _read_rows(path, ("time_s", "current_a"), ("ocv_v",))
    if len(data["time_s"]) < 2:
        raise ValidationError(f"{path}: a trace needs at least 2 samples")
    return DischargeTrace.from_current(data["time_s"], data["current_a"], data.get("ocv_v"))


def write_trace_csv(trace: DischargeTrace, path) -> None:
    if trace.v_oc is None:
        rows = ((fmt(t), fmt(i)) for t, i in zip(trace.t, trace.i_b))
        _write_rows(path, ("time_s", "current_a"), rows)
    else:
        rows = ((fmt(t), fmt(i), fmt(v)) for t, i, v in zip(trace.t, trace.i_b, trace.v_oc))
        _write_rows(path, ("time_s", "current_a", "ocv_v"), rows)


# Scenario config keys (JSON object):
#   true_capacity_ah    float, required
#   true_z0             float, required
#   discharge_current_a float, or list of [duration_s, current_a] steps
#   ocv_noise_sigma_v   float, default 0
#   sample_period_s     float, default 300
#   seed                int, default 0
#   soc_stop            float, default 0
#   nominal_curve       path to a curve CSV (relative to the config file);
#                       the built-in reference curve when absent
SCENARIO_KEYS = {
    "true_capacity_ah": "true_capacity",
    "true_z0": "true_z0",
    "discharge_current_a": "discharge_current",
    "ocv_noise_sigma_v": "ocv_noise_sigma",
    "sample_period_s": "sample_period",
    "seed": "seed",
    "soc_stop": "soc_stop",
}


def read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8-sig") as handle:
            doc = json.load(handle)
    except OSError as exc:
        raise ParseError(f"cannot open: {exc.strerror}", path=path) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, path=path) from exc
    if not isinstance(doc, dict):
        raise ParseError("expected a JSON object", line=1, path=path)
    return doc


def scenario_from_dict(doc: dict, base_dir=None, nominal: Optional[OCVCurve] = None) -> AgingScenario:
    unknown = set(doc) - set(SCENARIO_KEYS) - {"nominal_curve"}
    if unknown:
        raise ValidationError(f"unknown scenario key(s): {', '.join(sorted(unknown))}")
    if nominal is None:
        curve_path = doc.get("nominal_curve")
        if curve_path is None:
            nominal = reference_nominal_curve()
        else:
            curve_path = Path(curve_path)
            if base_dir is not None and not curve_path.is_absolute():
                curve_path = Path(base_dir) / curve_path
            nominal = read_curve_csv(curve_path)
    kwargs = {SCENARIO_KEYS[k]: v for k, v in doc.items() if k in SCENARIO_KEYS}
    if isinstance(kwargs.get("discharge_current"), list):
        kwargs["discharge_current"] = [tuple(step) for step in kwargs["discharge_current"]]
    try:
        return AgingScenario(nominal=nominal, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"invalid scenario: {exc}") from exc


def read_scenario(path, nominal: Optional[OCVCurve] = None) -> AgingScenario:
    return scenario_from_dict(read_json(path), base_dir=Path(path).parent, nominal=nominal)


def result_document(result: EstimationResult, **extra) -> dict:
    doc = result.to_dict()
    doc.update(extra)
    return doc


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def write_json(doc: dict, path) -> None:
    Path(path).write_text(dumps(doc), encoding="utf-8")


@dataclass(frozen=True)
class PlotSeries:
    name: str
    x: np.ndarray
    y: np.ndarray
    x_unit: str
    y_unit: str

    def __post_init__(self):
        if len(self.x) != len(self.y):
            raise ValueError("x and y must have equal length")
        if not (self.x_unit and self.y_unit):
            raise ValueError("unit labels must be nonempty")


def alignment_series(result: EstimationResult, problem: EstimationProblem) -> list[PlotSeries]:
    """Nominal curve knots and the aged OCV against its calibrated SOC."""
    nominal = problem.nominal
    aged_soc = result.transform(_uncalibrated(problem))
    return [
        PlotSeries("nominal", nominal.soc.copy(), nominal.ocv.copy(), "soc", "V"),
        PlotSeries("aged_transformed", np.asarray(aged_soc), problem.v_oc.copy(), "soc", "V"),
    ]


def _uncalibrated(problem: EstimationProblem):
    return 1.0 - problem.q_dc / problem.nominal_capacity


def write_plot_data(series, path) -> None:
    rows = []
    for s in series:
        rows.extend((s.name, fmt(x), fmt(y), s.x_unit, s.y_unit) for x, y in zip(s.x, s.y))
    try:
        _write_rows(path, ("series", "x", "y", "x_unit", "y_unit"), rows)
    except OSError as exc:
        raise OcvAlignError(f"cannot write {path}: {exc.strerror}") from exc


def write_alignment_plot_data(result: EstimationResult, problem: EstimationProblem, path) -> None:
    """Write a two-series CSV for an overlay of aged vs nominal OCV-SOC."""
    write_plot_data(alignment_series(result, problem), path)


def read_plot_data(path) -> list[PlotSeries]:
    data = _read_rows(path, ("series", "x", "y", "x_unit", "y_unit"), numeric=("x", "y"))
    out: dict[str, list] = {}
    for name, x, y, xu, yu in zip(data["series"], data["x"], data["y"], data["x_unit"], data["y_unit"]):
        out.setdefault(name, [[], [], xu, yu])
        out[name][0].append(x)
        out[name][1].append(y)
    return [PlotSeries(name, np.array(x), np.array(y), xu, yu) for name, (x, y, xu, yu) in out.items()]


def read_manifest(path) -> list[tuple[str, Path, float]]:
    """Rows of ``(cycle_id, trace path, actual capacity)``; paths resolve against the manifest."""
    data = _read_rows(path, ("cycle_id", "trace_path", "actual_capacity_ah"), numeric=("actual_capacity_ah",))
    base = Path(path).parent
    rows = []
    for cid, trace_path, actual in zip(data["cycle_id"], data["trace_path"], data["actual_capacity_ah"]):
        p = Path(trace_path)
        rows.append((cid, p if p.is_absolute() else base / p, actual))
    return rows


def write_report_csv(report: EvaluationReport, path) -> None:
    rows = (
        (r.cycle_id, fmt(r.estimated_ah), fmt(r.actual_ah), format_percent(r.are_percent)) for r in report.per_cycle
    )
    _write_rows(path, ("cycle_id", "estimated_ah", "actual_ah", "are_percent"), rows)
