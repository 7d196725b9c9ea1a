from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import CN
from ocvalign import AgingScenario, generate
from ocvalign.errors import EmptyInput, NoIncludedPoints, NonPositiveActual
from ocvalign.estimator import SocTransform, uncalibrated_soc
from ocvalign.metrics import absolute_relative_error, aggregate, curve_alignment_rmse, format_percent


def _are_exact(est, act):
    return float(100 * abs(Fraction(est) - Fraction(act)) / Fraction(act))


def test_are_table_entries():
    # Recomputed from the rounded table values; the published column used unrounded inputs.
    assert absolute_relative_error(4.6280, 4.6285) == pytest.approx(_are_exact("4.6280", "4.6285"), rel=1e-12)
    assert format_percent(absolute_relative_error(4.6280, 4.6285)) == "0.0108"
    assert absolute_relative_error(4.4706, 4.4505) == pytest.approx(_are_exact("4.4706", "4.4505"), rel=1e-12)
    assert format_percent(absolute_relative_error(4.4706, 4.4505)) == "0.4516"


def test_are_zero_and_errors():
    assert absolute_relative_error(3.3, 3.3) == 0
    with pytest.raises(NonPositiveActual):
        absolute_relative_error(1.0, 0.0)


@given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.01, 100))
def test_are_scale_invariant(est, act, alpha):
    assert absolute_relative_error(alpha * est, alpha * act) == pytest.approx(absolute_relative_error(est, act), rel=1e-9, abs=1e-12)


def test_alignment_rmse_zero_with_true_transform(nominal):
    trace = generate(AgingScenario(nominal, 0.87 * CN, 0.93))
    t = SocTransform.from_estimate(CN, 0.87 * CN, 0.93)
    rmse, excluded = curve_alignment_rmse(nominal, t(uncalibrated_soc(trace.q_dc, CN)), trace.v_oc)
    assert rmse < 1e-12 and excluded == 0


def test_alignment_rmse_tracks_noise_floor(nominal):
    values = []
    t = SocTransform.from_estimate(CN, 0.9 * CN, 0.95)
    for seed in range(20):
        trace = generate(AgingScenario(nominal, 0.9 * CN, 0.95, ocv_noise_sigma=0.005, seed=seed))
        values.append(curve_alignment_rmse(nominal, t(uncalibrated_soc(trace.q_dc, CN)), trace.v_oc)[0])
    assert np.all(np.abs(np.array(values) - 0.005) <= 0.3 * 0.005)


def test_alignment_rmse_excludes_out_of_range(nominal):
    z = np.array([-0.1, 0.5, 1.0, 1.2])
    v = np.interp(np.clip(z, 0, 1), nominal.soc, nominal.ocv) + np.array([9, 0.003, -0.004, 9])
    rmse, excluded = curve_alignment_rmse(nominal, z, v)
    assert excluded == 2
    assert rmse == pytest.approx(np.sqrt((0.003**2 + 0.004**2) / 2), rel=1e-9)
    with pytest.raises(NoIncludedPoints):
        curve_alignment_rmse(nominal, [-1, 2], [3, 3])


def test_aggregate_single_row():
    rep = aggregate([("159", 4.6280, 4.6285)])
    assert rep.rmse_ah == pytest.approx(0.0005, rel=1e-9)
    assert rep.mae_ah == pytest.approx(0.0005, rel=1e-9)
    assert rep.mean_are_percent == pytest.approx(_are_exact("4.6280", "4.6285"), rel=1e-12)


def test_aggregate_symmetric_errors():
    rep = aggregate([("a", 4.1, 4.0), ("b", 3.9, 4.0)])
    assert rep.mae_ah == pytest.approx(0.1, rel=1e-12)
    assert rep.rmse_ah == pytest.approx(0.1, rel=1e-12)


def test_aggregate_empty():
    with pytest.raises(EmptyInput):
        aggregate([])


@given(st.lists(st.tuples(st.floats(1, 6), st.floats(1, 6)), min_size=1, max_size=20))
def test_rmse_at_least_mae(pairs):
    rows = [(str(i), e, a) for i, (e, a) in enumerate(pairs)]
    rep = aggregate(rows)
    assert rep.rmse_ah >= rep.mae_ah - 1e-12
    ares = [absolute_relative_error(e, a) for e, a in pairs]
    assert rep.mean_are_percent == pytest.approx(np.mean(ares), rel=1e-12, abs=1e-12)
    assert [r.are_percent for r in rep.per_cycle] == ares


def test_report_dict_shape():
    d = aggregate([("1", 4.0, 4.1), ("2", 4.2, 4.1)]).to_dict()
    assert d["n_cycles"] == 2
    assert set(d["per_cycle"][0]) == {"cycle_id", "estimated_ah", "actual_ah", "are_percent"}
