"""Error metrics for capacity estimates and OCV curve alignment."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curve import OCVCurve
from .errors import EmptyInput, LengthMismatch, NoIncludedPoints, NonPositiveActual


def absolute_relative_error(estimated: float, actual: float) -> float:
    """Absolute relative error in percent."""
    if not actual > 0:
        raise NonPositiveActual(f"actual capacity must be positive, got {actual!r}")
    return 100.0 * abs(estimated - actual) / actual


def curve_alignment_rmse(nominal: OCVCurve, transformed_soc, v_oc) -> tuple[float, int]:
    """RMS gap between measured OCV and the nominal curve at the given SOCs.

    Points whose SOC falls outside the curve are left out. Returns
    ``(rmse_v, n_excluded)``.
    """
    z = np.asarray(transformed_soc, dtype=float).ravel()
    v = np.asarray(v_oc, dtype=float).ravel()
    if z.shape != v.shape:
        raise LengthMismatch(f"{z.size} SOC values vs {v.size} OCV values")
    inside = nominal.soc_range.contains(z)
    if not inside.any():
        raise NoIncludedPoints("no SOC value falls inside the nominal curve")
    zi = np.clip(z[inside], nominal.soc_range.lo, nominal.soc_range.hi)
    r = v[inside] - np.interp(zi, nominal.soc, nominal.ocv)
    return math.sqrt(float(np.mean(r * r))), int((~inside).sum())


@dataclass(frozen=True)
class CycleError:
    cycle_id: str
    estimated_ah: float
    actual_ah: float
    are_percent: float


@dataclass(frozen=True)
class EvaluationReport:
    per_cycle: list[CycleError]
    rmse_ah: float
    mae_ah: float
    mean_are_percent: float

    def to_dict(self) -> dict:
        return {
            "rmse_ah": self.rmse_ah,
            "mae_ah": self.mae_ah,
            "mean_are_percent": self.mean_are_percent,
            "n_cycles": len(self.per_cycle),
            "per_cycle": [
                {
                    "cycle_id": row.cycle_id,
                    "estimated_ah": row.estimated_ah,
                    "actual_ah": row.actual_ah,
                    "are_percent": row.are_percent,
                }
                for row in self.per_cycle
            ],
        }


def aggregate(rows) -> EvaluationReport:
    """Build a report from ``(cycle_id, estimated_ah, actual_ah)`` rows."""
    rows = list(rows)
    if not rows:
        raise EmptyInput("no cycles to aggregate")
    per_cycle = [
        CycleError(str(cid), float(est), float(act), absolute_relative_error(est, act)) for cid, est, act in rows
    ]
    diff = np.array([r.estimated_ah - r.actual_ah for r in per_cycle])
    return EvaluationReport(
        per_cycle=per_cycle,
        rmse_ah=math.sqrt(float(np.mean(diff**2))),
        mae_ah=float(np.mean(np.abs(diff))),
        mean_are_percent=float(np.mean([r.are_percent for r in per_cycle])),
    )


def format_percent(value: float) -> str:
    """Percent with 4 decimals, as in published capacity tables."""
    return f"{value:.4f}"
