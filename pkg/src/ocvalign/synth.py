"""Synthetic aged-battery OCV tests with known capacity and initial SOC.

The generator runs the estimator's forward model in reverse: discharge
capacity is integrated from a piecewise-constant current program, converted
to calibrated SOC with the true capacity, and mapped through the nominal
curve. Noise is additive Gaussian on the OCV only.

Random draws use ``numpy.random.default_rng(seed)`` (PCG64) and
``standard_normal``; see ``RNG_ALGORITHM``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .coulomb import SECONDS_PER_HOUR, DischargeTrace
from .curve import RANGE_SLACK, OCVCurve, build_curve, interp_ocv
from .errors import RangeExceeded

RNG_ALGORITHM = "numpy.random.PCG64+standard_normal"
NOMINAL_CAPACITY_AH = 4.85

# 41 knots, SOC step 0.025. Smooth sigmoid-plus-linear NMC-like profile:
# steep knee below 10 % SOC, low-slope region around 30-60 % SOC
# (~0.41 V per unit SOC), a second rise near 80 % SOC. Endpoints sit at the
# 2.5 V / 4.2 V cut-offs. Values rounded to 0.1 mV and fixed here.
REFERENCE_SOC = tuple(round(0.025 * k, 3) for k in range(41))
REFERENCE_OCV = (
    2.5000, 2.8505, 3.0673, 3.2033, 3.2911, 3.3510, 3.3967, 3.4370, 3.4756, 3.5101,
    3.5372, 3.5573, 3.5726, 3.5853, 3.5967, 3.6075, 3.6179, 3.6283, 3.6386, 3.6489,
    3.6594, 3.6700, 3.6811, 3.6926, 3.7051, 3.7192, 3.7355, 3.7554, 3.7805, 3.8125,
    3.8525, 3.9001, 3.9526, 4.0050, 4.0527, 4.0927, 4.1246, 4.1497, 4.1696, 4.1860,
    4.2000,
)  # fmt: skip


def reference_nominal_curve() -> OCVCurve:
    """Built-in 41-knot NMC-like nominal curve spanning 2.5-4.2 V."""
    return build_curve(REFERENCE_SOC, REFERENCE_OCV, label="reference NMC-like")


CurrentProgram = Union[float, Sequence[tuple[float, float]]]


@dataclass(frozen=True)
class AgingScenario:
    """Ground truth for one synthetic OCV discharge.

    ``discharge_current`` is either a constant current in A (negative for
    discharge) or a list of ``(duration_s, current_a)`` steps; the last
    step's current holds until the stop SOC is reached.
    """

    nominal: OCVCurve = field(repr=False)
    true_capacity: float
    true_z0: float
    discharge_current: CurrentProgram = -NOMINAL_CAPACITY_AH / 20
    ocv_noise_sigma: float = 0.0
    sample_period: float = 300.0
    seed: int = 0
    soc_stop: float = 0.0

    def __post_init__(self):
        if not self.true_capacity > 0:
            raise ValueError("true_capacity must be positive")
        if not (0.0 <= self.soc_stop < self.true_z0 <= 1.0):
            raise ValueError("need 0 <= soc_stop < true_z0 <= 1")
        if self.ocv_noise_sigma < 0:
            raise ValueError("ocv_noise_sigma must be >= 0")
        if not self.sample_period > 0:
            raise ValueError("sample_period must be positive")
        steps = self.steps
        if any(d <= 0 for d, _ in steps[:-1]):
            raise ValueError("program step durations must be positive")

    @property
    def steps(self) -> list[tuple[float, float]]:
        if np.isscalar(self.discharge_current):
            return [(np.inf, float(self.discharge_current))]
        steps = [(float(d), float(i)) for d, i in self.discharge_current]
        if not steps:
            raise ValueError("empty current program")
        return steps


def _segments(steps):
    """(start time, start q, current) per step; the last step is open-ended."""
    out = []
    t0 = q0 = 0.0
    for k, (duration, current) in enumerate(steps):
        out.append((t0, q0, current))
        if k == len(steps) - 1:
            break
        t0 += duration
        q0 -= current * duration / SECONDS_PER_HOUR
    return out


def _stop_time(segments, q_stop, q_max_allowed_neg):
    """First time q reaches ``q_stop``; checks charging never overshoots the curve top."""
    for k, (t0, q0, current) in enumerate(segments):
        last = k == len(segments) - 1
        t1 = np.inf if last else segments[k + 1][0]
        q1 = None if last else segments[k + 1][1]
        if current < 0:
            t_hit = t0 + (q_stop - q0) * SECONDS_PER_HOUR / -current
            if t_hit <= t1:
                return t_hit
        elif q1 is not None and q1 < q_max_allowed_neg:
            raise RangeExceeded("charging pushes SOC above the nominal curve range")
        if last:
            raise ValueError("current program never reaches the stop SOC")
    raise AssertionError("unreachable")


def generate(scenario: AgingScenario) -> DischargeTrace:
    """Simulate the scenario and return a trace with OCV samples.

    Raises
    ------
    RangeExceeded
        The curve does not cover ``[soc_stop, true_z0]``, or the program
        charges the cell above the top of the curve.
    """
    s = scenario
    rng_soc = s.nominal.soc_range
    if s.soc_stop < rng_soc.lo - RANGE_SLACK or s.true_z0 > rng_soc.hi + RANGE_SLACK:
        raise RangeExceeded(
            f"curve covers SOC [{rng_soc.lo}, {rng_soc.hi}], scenario needs [{s.soc_stop}, {s.true_z0}]"
        )
    q_stop = (s.true_z0 - s.soc_stop) * s.true_capacity
    # SOC <= hi  <=>  q >= (z0 - hi) * C
    q_floor = (s.true_z0 - rng_soc.hi) * s.true_capacity
    segments = _segments(s.steps)
    t_stop = _stop_time(segments, q_stop, q_floor)

    n_full = int(np.floor(t_stop / s.sample_period))
    t = np.arange(n_full + 1) * s.sample_period
    if t_stop - t[-1] > 1e-9 * s.sample_period:
        t = np.append(t, t_stop)
    else:
        t[-1] = t_stop

    starts = np.array([seg[0] for seg in segments])
    idx = np.searchsorted(starts, t, side="right") - 1
    # The stop sample belongs to the step still in progress.
    idx[-1] = np.searchsorted(starts, t_stop, side="left") - 1 if t_stop > 0 else 0
    idx = np.maximum(idx, 0)
    seg_t0 = starts[idx]
    seg_q0 = np.array([seg[1] for seg in segments])[idx]
    current = np.array([seg[2] for seg in segments])[idx]
    q = seg_q0 - current * (t - seg_t0) / SECONDS_PER_HOUR
    q[0] = 0.0
    q[-1] = q_stop

    z = s.true_z0 - q / s.true_capacity
    v = interp_ocv(s.nominal, z)
    if s.ocv_noise_sigma > 0:
        gen = np.random.default_rng(s.seed)
        v = v + s.ocv_noise_sigma * gen.standard_normal(v.size)
    return DischargeTrace(t=t, i_b=current, q_dc=q, v_oc=v)
