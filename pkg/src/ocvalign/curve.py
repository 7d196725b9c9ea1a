"""Monotone OCV-SOC curves: construction, linear interpolation and inversion.

Curves are piecewise linear between knots and never extrapolate. Queries
outside the knot range raise :class:`~ocvalign.errors.OutOfRange`, except for
values within ``RANGE_SLACK`` of an endpoint, which are snapped onto it so
that round-off in ``z0 - q/C`` does not turn an exact endpoint into a miss.

A curve holds one branch only (charge *or* discharge OCV); mixing branches
in one table breaks the bijectivity the estimator relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import LengthMismatch, NonFinite, NonMonotonic, OutOfRange

RANGE_SLACK = 1e-12
TIE_STEP_V = 1e-9


@dataclass(frozen=True)
class SocRange:
    lo: float
    hi: float

    def __post_init__(self):
        if not (0.0 <= self.lo < self.hi <= 1.0):
            raise ValueError(f"invalid SOC range [{self.lo}, {self.hi}]")

    def contains(self, z, slack=RANGE_SLACK):
        return (z >= self.lo - slack) & (z <= self.hi + slack)


@dataclass(frozen=True, eq=False)
class OCVCurve:
    """Strictly increasing (SOC, OCV) knot table.

    Build instances with :func:`build_curve`; the constructor only stores
    arrays that are already validated.
    """

    soc: np.ndarray
    ocv: np.ndarray
    label: str = ""
    soc_range: SocRange = field(init=False, repr=False)

    def __post_init__(self):
        soc = np.array(self.soc, dtype=float)
        ocv = np.array(self.ocv, dtype=float)
        soc.setflags(write=False)
        ocv.setflags(write=False)
        object.__setattr__(self, "soc", soc)
        object.__setattr__(self, "ocv", ocv)
        object.__setattr__(self, "soc_range", SocRange(float(soc[0]), float(soc[-1])))

    def __len__(self):
        return len(self.soc)

    def __eq__(self, other):
        if not isinstance(other, OCVCurve):
            return NotImplemented
        return (
            np.array_equal(self.soc, other.soc)
            and np.array_equal(self.ocv, other.ocv)
            and self.label == other.label
        )

    @property
    def ocv_range(self) -> tuple[float, float]:
        return float(self.ocv[0]), float(self.ocv[-1])

    def __call__(self, z):
        return interp_ocv(self, z)

    def inverse(self, v):
        return interp_soc(self, v)


def _strictly_increasing(a: np.ndarray) -> bool:
    return bool(np.all(np.diff(a) > 0))


def build_curve(soc_samples, ocv_samples, label: str = "") -> OCVCurve:
    """Validate samples and return an :class:`OCVCurve` sorted by SOC.

    Raises
    ------
    LengthMismatch
        Different lengths, or fewer than two samples.
    NonFinite
        NaN/inf anywhere, or a non-positive voltage.
    NonMonotonic
        Duplicate SOC knots, or OCV not strictly increasing after sorting.
    """
    soc = np.asarray(soc_samples, dtype=float).ravel()
    ocv = np.asarray(ocv_samples, dtype=float).ravel()
    if soc.shape != ocv.shape:
        raise LengthMismatch(f"{soc.size} SOC samples vs {ocv.size} OCV samples")
    if soc.size < 2:
        raise LengthMismatch("a curve needs at least 2 samples")
    if not (np.all(np.isfinite(soc)) and np.all(np.isfinite(ocv))):
        raise NonFinite("curve samples must be finite")
    if np.any(ocv <= 0):
        raise NonFinite("OCV samples must be positive")
    if soc.min() < 0.0 or soc.max() > 1.0:
        raise OutOfRange(float(soc.min() if soc.min() < 0 else soc.max()), 0.0, 1.0)

    order = np.argsort(soc, kind="stable")
    soc, ocv = soc[order], ocv[order]
    if not _strictly_increasing(soc):
        raise NonMonotonic("SOC knots must be distinct")
    if not _strictly_increasing(ocv):
        raise NonMonotonic("OCV must be strictly increasing in SOC")
    return OCVCurve(soc, ocv, label)


def _check_range(x, lo, hi):
    x = np.asarray(x, dtype=float)
    bad = ~((x >= lo - RANGE_SLACK) & (x <= hi + RANGE_SLACK))
    if np.any(bad):
        first = x[bad].flat[0] if x.ndim else float(x)
        raise OutOfRange(float(first), lo, hi)
    return np.clip(x, lo, hi)


def interp_ocv(curve: OCVCurve, z):
    """OCV at SOC ``z`` (scalar or array) by linear interpolation."""
    zc = _check_range(z, curve.soc_range.lo, curve.soc_range.hi)
    out = np.interp(zc, curve.soc, curve.ocv)
    return float(out) if out.ndim == 0 else out


def interp_soc(curve: OCVCurve, v):
    """SOC giving OCV ``v`` (scalar or array); inverse of :func:`interp_ocv`."""
    lo, hi = curve.ocv_range
    vc = _check_range(v, lo, hi)
    out = np.interp(vc, curve.ocv, curve.soc)
    return float(out) if out.ndim == 0 else out


def _pool_adjacent_violators(y: np.ndarray) -> np.ndarray:
    # Each block is (sum, count); merge while the previous mean exceeds the new one.
    sums: list[float] = []
    counts: list[int] = []
    for value in y:
        sums.append(float(value))
        counts.append(1)
        while len(sums) > 1 and sums[-2] * counts[-1] > sums[-1] * counts[-2]:
            s, c = sums.pop(), counts.pop()
            sums[-1] += s
            counts[-1] += c
    return np.repeat(np.array(sums) / np.array(counts), counts)


def enforce_monotone(soc_samples, ocv_samples):
    """Repair noisy OCV samples into a strictly increasing sequence.

    Least-squares isotonic fit (pool adjacent violators), then equal values
    are pulled apart by ``TIE_STEP_V`` so the result is strictly increasing.
    SOC is returned unchanged. Input must already be sorted by SOC.
    """
    soc = np.asarray(soc_samples, dtype=float).copy()
    ocv = np.asarray(ocv_samples, dtype=float)
    if soc.shape != ocv.shape:
        raise LengthMismatch(f"{soc.size} SOC samples vs {ocv.size} OCV samples")
    if ocv.size < 2 or _strictly_increasing(ocv):
        return soc, ocv.copy()

    fitted = _pool_adjacent_violators(ocv)
    out = fitted.copy()
    for i in range(1, out.size):
        if out[i] <= out[i - 1]:
            out[i] = out[i - 1] + TIE_STEP_V
    return soc, out
