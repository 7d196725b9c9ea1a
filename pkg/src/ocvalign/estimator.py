"""Capacity and initial-SOC estimation by OCV alignment.

The aged battery's OCV samples are re-indexed to calibrated SOC,
``z_k = z0 - q_k / C``, and ``(C, z0)`` is chosen so that the nominal curve
evaluated at ``z_k`` matches the measured OCV in the least-squares sense.
Candidates whose SOC leaves the nominal curve are infeasible and score
``inf``; the curve is never extrapolated.

The minimizer is a coarse grid scan followed by Nelder-Mead refinement.
:func:`grid_oracle` is an exhaustive scan kept separate from
:func:`estimate` so one can certify the other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .coulomb import DischargeTrace
from .curve import RANGE_SLACK, OCVCurve
from .errors import (
    DegenerateData,
    LengthMismatch,
    MissingOCV,
    NoFeasiblePoint,
    NonPositiveCapacity,
    WindowTooSmall,
)
from .simplex import nelder_mead

DEGENERATE_SPAN_V = 1e-3
FLATNESS_WARNING = 1e-6
CERTIFICATE_SLACK = 1e-12


@dataclass(frozen=True)
class SocTransform:
    """Affine map from uncalibrated 1-initialized SOC to calibrated SOC.

    ``k`` rescales by ``C_n / C_a``; ``b = z0 - k`` puts the start of the
    trace back at ``z0``.
    """

    k: float
    b: float

    @classmethod
    def from_estimate(cls, nominal_capacity: float, capacity: float, z0: float) -> "SocTransform":
        if not capacity > 0:
            raise NonPositiveCapacity(f"capacity must be positive, got {capacity!r}")
        k = nominal_capacity / capacity
        return cls(k=k, b=z0 - k)

    def __call__(self, z_tilde):
        return apply_transform(self, z_tilde)


def apply_transform(transform: SocTransform, z_tilde):
    z = transform.k * np.asarray(z_tilde, dtype=float) + transform.b
    return float(z) if z.ndim == 0 else z


def uncalibrated_soc(q_dc, nominal_capacity: float):
    """SOC counted from 1 with the nominal capacity: ``1 - q / C_n``."""
    if not nominal_capacity > 0:
        raise NonPositiveCapacity(f"nominal capacity must be positive, got {nominal_capacity!r}")
    z = 1.0 - np.asarray(q_dc, dtype=float) / nominal_capacity
    return float(z) if z.ndim == 0 else z


@dataclass(frozen=True)
class SolverSettings:
    grid_capacity: int = 64
    grid_z0: int = 64
    # The coarse scan uses at most this many (evenly strided) residuals.
    grid_max_residuals: int = 512
    max_iter: int = 500
    ftol: float = 1e-14
    xtol: float = 1e-13
    jacobian_step: float = 1e-6


@dataclass(frozen=True, eq=False)
class EstimationProblem:
    """Aged OCV samples against a nominal curve, with search bounds.

    ``capacity_bounds`` defaults to ``[0.3, 1.5] * nominal_capacity`` and
    ``z0_bounds`` to ``[0, 1]``.
    """

    nominal: OCVCurve
    q_dc: np.ndarray
    v_oc: np.ndarray
    nominal_capacity: float
    capacity_bounds: Optional[tuple[float, float]] = None
    z0_bounds: tuple[float, float] = (0.0, 1.0)
    settings: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        q = np.array(self.q_dc, dtype=float).ravel()
        v = np.array(self.v_oc, dtype=float).ravel()
        if q.shape != v.shape:
            raise LengthMismatch(f"{q.size} capacity samples vs {v.size} OCV samples")
        if q.size < 3:
            raise LengthMismatch("at least 3 samples are needed to fit 2 parameters")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(v))):
            raise ValueError("samples must be finite")
        if q[0] != 0.0:
            raise ValueError("q_dc must start at zero")
        if not self.nominal_capacity > 0:
            raise NonPositiveCapacity("nominal capacity must be positive")
        q.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "q_dc", q)
        object.__setattr__(self, "v_oc", v)

        cap = self.capacity_bounds
        if cap is None:
            cap = (0.3 * self.nominal_capacity, 1.5 * self.nominal_capacity)
        cap = (float(cap[0]), float(cap[1]))
        z0b = (float(self.z0_bounds[0]), float(self.z0_bounds[1]))
        if not (0 < cap[0] < cap[1]):
            raise ValueError(f"invalid capacity bounds {cap}")
        if not (0.0 <= z0b[0] < z0b[1] <= 1.0):
            raise ValueError(f"invalid z0 bounds {z0b}")
        object.__setattr__(self, "capacity_bounds", cap)
        object.__setattr__(self, "z0_bounds", z0b)

    @classmethod
    def from_trace(cls, nominal: OCVCurve, trace: DischargeTrace, nominal_capacity: float, **kwargs):
        if trace.v_oc is None:
            raise MissingOCV("trace has no OCV samples")
        return cls(nominal, trace.q_dc, trace.v_oc, nominal_capacity, **kwargs)

    @property
    def n_residuals(self) -> int:
        return self.q_dc.size

    def subset(self, start: int, end: int) -> "EstimationProblem":
        """Samples ``[start, end)`` with capacity re-based to the first one."""
        q = self.q_dc[start:end]
        return replace(self, q_dc=q - q[0], v_oc=self.v_oc[start:end])


@dataclass(frozen=True)
class EstimationResult:
    capacity: float
    z0: float
    rmse: float
    objective: float
    transform: SocTransform
    n_residuals: int
    flatness_indicator: float
    converged: bool
    n_iter: int = 0
    window: Optional[tuple[int, int]] = None

    @property
    def well_conditioned(self) -> bool:
        return self.flatness_indicator >= FLATNESS_WARNING

    def calibrated_soc(self, q_dc):
        return self.z0 - np.asarray(q_dc, dtype=float) / self.capacity

    def to_dict(self) -> dict:
        return {
            "capacity_ah": self.capacity,
            "z0": self.z0,
            "rmse_v": self.rmse,
            "objective_v2": self.objective,
            "k": self.transform.k,
            "b": self.transform.b,
            "n_residuals": self.n_residuals,
            "flatness_indicator": self.flatness_indicator,
            "flat_warning": not self.well_conditioned,
            "converged": self.converged,
            "window": None if self.window is None else list(self.window),
        }


def _soc(q, capacity, z0):
    return z0 - q / capacity


def _residuals(problem: EstimationProblem, capacity: float, z0: float):
    """Measured minus nominal OCV, or ``None`` if any SOC is off the curve."""
    z = _soc(problem.q_dc, capacity, z0)
    rng = problem.nominal.soc_range
    zmin, zmax = z.min(), z.max()
    if zmin < rng.lo - RANGE_SLACK or zmax > rng.hi + RANGE_SLACK:
        return None
    z = np.clip(z, rng.lo, rng.hi)
    return problem.v_oc - np.interp(z, problem.nominal.soc, problem.nominal.ocv)


def objective(problem: EstimationProblem, capacity: float, z0: float) -> float:
    """Sum of squared OCV residuals at ``(capacity, z0)``; ``inf`` if infeasible."""
    if not capacity > 0:
        raise NonPositiveCapacity(f"capacity must be positive, got {capacity!r}")
    r = _residuals(problem, capacity, z0)
    if r is None:
        return math.inf
    return float(r @ r)


def _grid_values(nominal: OCVCurve, q, v, capacities, z0s) -> np.ndarray:
    """Objective on the outer product ``capacities x z0s`` (inf where infeasible)."""
    rng = nominal.soc_range
    qmin, qmax = q.min(), q.max()
    out = np.full((capacities.size, z0s.size), math.inf)
    for i, c in enumerate(capacities):
        ok = (z0s - qmax / c >= rng.lo - RANGE_SLACK) & (z0s - qmin / c <= rng.hi + RANGE_SLACK)
        if not ok.any():
            continue
        z = z0s[ok, None] - q[None, :] / c
        np.clip(z, rng.lo, rng.hi, out=z)
        r = v[None, :] - np.interp(z, nominal.soc, nominal.ocv)
        out[i, ok] = np.einsum("ij,ij->i", r, r)
    return out


def _grid_argmin(values: np.ndarray) -> tuple[int, int]:
    # np.argmin returns the first minimum: smallest capacity, then smallest z0.
    flat = int(np.argmin(values))
    return np.unravel_index(flat, values.shape)


def grid_oracle(problem: EstimationProblem, n_capacity: int, n_z0: int) -> tuple[float, float, float]:
    """Exhaustive uniform-grid minimizer over the bound box (all residuals)."""
    if n_capacity < 2 or n_z0 < 2:
        raise ValueError("grid needs at least 2 points per axis")
    caps = np.linspace(*problem.capacity_bounds, n_capacity)
    z0s = np.linspace(*problem.z0_bounds, n_z0)
    values = _grid_values(problem.nominal, problem.q_dc, problem.v_oc, caps, z0s)
    if not np.isfinite(values).any():
        raise NoFeasiblePoint("no grid cell keeps SOC inside the nominal curve")
    i, j = _grid_argmin(values)
    c, z = float(caps[i]), float(z0s[j])
    return c, z, objective(problem, c, z)


def _extended_residuals(problem: EstimationProblem, capacity: float, z0: float) -> np.ndarray:
    # End segments extended linearly; only used for derivatives taken a
    # tiny step away from a solution that touches the curve range.
    soc, ocv = problem.nominal.soc, problem.nominal.ocv
    z = _soc(problem.q_dc, capacity, z0)
    v = np.interp(z, soc, ocv)
    below, above = z < soc[0], z > soc[-1]
    v[below] = ocv[0] + (z[below] - soc[0]) * (ocv[1] - ocv[0]) / (soc[1] - soc[0])
    v[above] = ocv[-1] + (z[above] - soc[-1]) * (ocv[-1] - ocv[-2]) / (soc[-1] - soc[-2])
    return problem.v_oc - v


def _flatness(problem: EstimationProblem, capacity: float, z0: float, h: float) -> float:
    """Smallest/largest eigenvalue of the Gauss-Newton matrix in box-scaled units."""
    widths = np.array([problem.capacity_bounds[1] - problem.capacity_bounds[0], problem.z0_bounds[1] - problem.z0_bounds[0]])
    x = np.array([capacity, z0])
    columns = []
    for j in range(2):
        dx = np.zeros(2)
        dx[j] = h * widths[j]
        plus = _extended_residuals(problem, *(x + dx))
        minus = _extended_residuals(problem, *(x - dx))
        columns.append((plus - minus) / (2 * h))
    jac = np.column_stack(columns)
    eig = np.linalg.eigvalsh(jac.T @ jac)
    if not eig[-1] > 0:
        return 0.0
    return float(max(eig[0], 0.0) / eig[-1])


def _make_result(problem, capacity, z0, converged, n_iter, window=None) -> EstimationResult:
    obj = objective(problem, capacity, z0)
    return EstimationResult(
        capacity=capacity,
        z0=z0,
        rmse=math.sqrt(obj / problem.n_residuals),
        objective=obj,
        transform=SocTransform.from_estimate(problem.nominal_capacity, capacity, z0),
        n_residuals=problem.n_residuals,
        flatness_indicator=_flatness(problem, capacity, z0, problem.settings.jacobian_step),
        converged=converged,
        n_iter=n_iter,
        window=window,
    )


def estimate(problem: EstimationProblem) -> EstimationResult:
    """Fit calibrated capacity and initial SOC.

    Raises
    ------
    DegenerateData
        The OCV samples span less than 1 mV.
    NoFeasiblePoint
        No coarse-grid candidate keeps every SOC on the nominal curve.
    """
    v = problem.v_oc
    if np.ptp(v) < DEGENERATE_SPAN_V:
        raise DegenerateData(f"OCV span {np.ptp(v) * 1e3:.3g} mV is below {DEGENERATE_SPAN_V * 1e3:g} mV")
    if np.ptp(problem.q_dc) <= 0:
        raise DegenerateData("discharge capacity does not change over the samples")
    s = problem.settings
    (c_lo, c_hi), (z_lo, z_hi) = problem.capacity_bounds, problem.z0_bounds

    # Stage 1: coarse scan, on a strided subset when the trace is long.
    n = problem.n_residuals
    stride = max(1, math.ceil(n / s.grid_max_residuals))
    index = np.arange(0, n, stride)
    if index[-1] != n - 1:
        index = np.append(index, n - 1)
    caps = np.linspace(c_lo, c_hi, s.grid_capacity)
    z0s = np.linspace(z_lo, z_hi, s.grid_z0)
    values = _grid_values(problem.nominal, problem.q_dc[index], v[index], caps, z0s)
    if not np.isfinite(values).any():
        raise NoFeasiblePoint("no candidate keeps SOC inside the nominal curve; check curve range and bounds")
    i, j = _grid_argmin(values)
    c0, z0_start = float(caps[i]), float(z0s[j])
    grid_best = objective(problem, c0, z0_start)

    # Stage 2: simplex refinement over the SOC at the top and bottom of the
    # trace. The curve-range constraints are an axis-aligned box in these
    # coordinates, which the simplex handles far better than the diagonal
    # feasibility edge in (capacity, z0).
    q = problem.q_dc
    q_lo, q_hi = float(q.min()), float(q.max())
    dq = q_hi - q_lo
    lo, hi = problem.nominal.soc_range.lo, problem.nominal.soc_range.hi
    span = hi - lo

    def params(u):
        top, bottom = lo + span * u
        if top <= bottom:
            return None
        c = dq / (top - bottom)
        return c, top + q_lo / c

    def f(u):
        p = params(u)
        if p is None:
            return math.inf
        c, z = p
        if not (c_lo <= c <= c_hi and z_lo <= z <= z_hi):
            return math.inf
        return objective(problem, c, z)

    box = (np.zeros(2), np.ones(2))
    u0 = (np.array([z0_start - q_lo / c0, z0_start - q_hi / c0]) - lo) / span
    cell = np.full(2, 1.0 / (max(s.grid_capacity, s.grid_z0) - 1))
    res = nelder_mead(f, u0, cell, lower=box[0], upper=box[1], ftol=s.ftol, xtol=s.xtol, max_iter=s.max_iter)
    n_iter = res.n_iter

    # Stage 3: keep the refinement only if it does not lose to the grid.
    refined = params(res.x)
    if refined is not None and res.fun <= grid_best:
        c, z = float(refined[0]), float(refined[1])
    else:
        c, z = c0, z0_start
    return _make_result(problem, c, z, res.converged, n_iter)


def estimate_window(problem: EstimationProblem, window: tuple[int, int]) -> EstimationResult:
    """Estimate from samples ``window = (start, end)``, end exclusive.

    The reported ``z0`` is the SOC at the first sample of the window.
    """
    start, end = window
    n = problem.n_residuals
    start, end, _ = slice(start, end).indices(n)
    if end - start < 3:
        raise WindowTooSmall(f"window {window} selects {max(end - start, 0)} samples, need >= 3")
    result = estimate(problem.subset(start, end))
    return replace(result, window=(start, end))


def fraction_window(n: int, start: float, end: float) -> tuple[int, int]:
    """Index window covering the fractional span ``[start, end)`` of ``n`` samples."""
    if not (0.0 <= start < end <= 1.0):
        raise ValueError(f"window fractions must satisfy 0 <= start < end <= 1, got {start}, {end}")
    return int(round(start * n)), int(round(end * n))


def thirds(n: int) -> dict[str, tuple[int, int]]:
    """Beginning, middle and end thirds of ``n`` samples."""
    a, b = n // 3, (2 * n) // 3
    return {"beginning": (0, a), "middle": (a, b), "end": (b, n)}


def certify(problem: EstimationProblem, result: EstimationResult, n_capacity=200, n_z0=200) -> tuple[bool, float]:
    """Check ``result`` is no worse than the grid oracle; returns (ok, oracle objective)."""
    _, _, best = grid_oracle(problem, n_capacity, n_z0)
    return result.objective <= best + CERTIFICATE_SLACK, best
