"""
The nominal OCV-SOC curve
=========================

Builds the reference curve, looks values up in both directions and repairs
a noisy measured curve so it becomes strictly increasing.
"""

import numpy as np

from ocvalign import build_curve, enforce_monotone, interp_ocv, interp_soc, reference_nominal_curve

curve = reference_nominal_curve()
print(curve.label, len(curve.soc), "knots")
print("SOC range", curve.soc_range, " OCV range", curve.ocv_range)

# forward and inverse lookups are exact inverses on the knots and in between
z = np.linspace(0.0, 1.0, 11)
v = interp_ocv(curve, z)
print(np.column_stack([z, v, interp_soc(curve, v)]))

# slope per unit SOC: the flat middle is where alignment has least to work with
slope = np.diff(curve.ocv) / np.diff(curve.soc)
print("min slope %.3f V at SOC %.3f" % (slope.min(), curve.soc[slope.argmin()]))

# a densely sampled measurement with 3 mV noise is not monotone in the flat
# middle; isotonic repair fixes it
rng = np.random.default_rng(0)
soc = np.linspace(0.0, 1.0, 401)
noisy = interp_ocv(curve, soc) + 0.003 * rng.standard_normal(soc.size)
print("noisy curve monotone:", bool(np.all(np.diff(noisy) > 0)))
soc, ocv = enforce_monotone(soc, noisy)
repaired = build_curve(soc, ocv, label="repaired")
print("repaired max change %.4f V" % np.max(np.abs(repaired.ocv - noisy)))
print("error vs the clean curve %.4f V" % np.max(np.abs(repaired.ocv - interp_ocv(curve, soc))))
