"""Coulomb counting and the discharge-capacity / SOC conversions.

Sign convention: battery current is positive while charging, so discharge
capacity grows under negative current. SOC is handled as a fraction; percent
only appears when formatting output.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import LengthMismatch, NonMonotonicTime, NonPositiveCapacity

SECONDS_PER_HOUR = 3600.0


def integrate_discharge(t, i_b) -> np.ndarray:
    """Cumulative discharge capacity in Ah, trapezoidal rule, ``q[0] = 0``."""
    t = np.asarray(t, dtype=float).ravel()
    i_b = np.asarray(i_b, dtype=float).ravel()
    if t.shape != i_b.shape:
        raise LengthMismatch(f"{t.size} time samples vs {i_b.size} current samples")
    if t.size == 0:
        raise LengthMismatch("empty trace")
    dt = np.diff(t)
    if np.any(~(dt > 0)):
        k = int(np.argmax(~(dt > 0))) + 1
        raise NonMonotonicTime(f"time not strictly increasing at sample {k}")
    increments = 0.5 * (i_b[1:] + i_b[:-1]) * dt
    q = np.empty_like(t)
    q[0] = 0.0
    np.cumsum(-increments / SECONDS_PER_HOUR, out=q[1:])
    return q


def soc_from_qdc(q_dc, z0, capacity):
    """SOC after withdrawing ``q_dc`` Ah from ``z0`` with total ``capacity``.

    Not clamped to [0, 1]; callers decide what an out-of-range SOC means.
    """
    if not capacity > 0:
        raise NonPositiveCapacity(f"capacity must be positive, got {capacity!r}")
    z = z0 - np.asarray(q_dc, dtype=float) / capacity
    return float(z) if z.ndim == 0 else z


@dataclass(frozen=True, eq=False)
class DischargeTrace:
    """Time-stamped current with optional paired OCV samples.

    ``q_dc`` is the discharge capacity at each sample. Use
    :meth:`from_current` to derive it from the current by Coulomb counting.
    """

    t: np.ndarray
    i_b: np.ndarray
    q_dc: np.ndarray
    v_oc: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("t", "i_b", "q_dc", "v_oc"):
            value = getattr(self, name)
            if value is None:
                continue
            arr = np.array(value, dtype=float).ravel()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.t.size
        sizes = {self.i_b.size, self.q_dc.size} | ({self.v_oc.size} if self.v_oc is not None else set())
        if sizes != {n}:
            raise LengthMismatch("trace arrays must have equal length")
        if n and self.q_dc[0] != 0.0:
            raise ValueError("q_dc must start at zero")
        if np.any(~(np.diff(self.t) > 0)):
            raise NonMonotonicTime("time not strictly increasing")

    @classmethod
    def from_current(cls, t, i_b, v_oc=None) -> "DischargeTrace":
        return cls(t=t, i_b=i_b, q_dc=integrate_discharge(t, i_b), v_oc=v_oc)

    def __len__(self):
        return self.t.size

    @property
    def has_ocv(self) -> bool:
        return self.v_oc is not None

    def take(self, index) -> "DischargeTrace":
        """Sub-trace at ``index`` with capacity re-based to its first sample."""
        q = self.q_dc[index]
        return DischargeTrace(
            t=self.t[index],
            i_b=self.i_b[index],
            q_dc=q - q[0],
            v_oc=None if self.v_oc is None else self.v_oc[index],
        )


def resample_trace(trace: DischargeTrace, stride: int) -> DischargeTrace:
    """Keep every ``stride``-th sample plus the last one.

    Capacity values are taken from the full-resolution integration, so they
    are unchanged at the kept indices.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    n = len(trace)
    index = np.arange(0, n, stride)
    if index[-1] != n - 1:
        index = np.append(index, n - 1)
    return DischargeTrace(
        t=trace.t[index],
        i_b=trace.i_b[index],
        q_dc=trace.q_dc[index],
        v_oc=None if trace.v_oc is None else trace.v_oc[index],
    )
