"""Battery capacity estimation by aligning aged OCV data to a nominal OCV-SOC curve."""

from .coulomb import DischargeTrace, integrate_discharge, resample_trace, soc_from_qdc
from .curve import OCVCurve, SocRange, build_curve, enforce_monotone, interp_ocv, interp_soc
from .errors import *  # noqa: F401,F403
from .estimator import (
    EstimationProblem,
    EstimationResult,
    SocTransform,
    SolverSettings,
    apply_transform,
    estimate,
    estimate_window,
    grid_oracle,
    objective,
    uncalibrated_soc,
)
from .metrics import EvaluationReport, absolute_relative_error, aggregate, curve_alignment_rmse
from .synth import NOMINAL_CAPACITY_AH, AgingScenario, generate, reference_nominal_curve

__version__ = "0.1.0"
