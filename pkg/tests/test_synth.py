import numpy as np
import pytest

from conftest import CN
from ocvalign import AgingScenario, EstimationProblem, estimate, generate, reference_nominal_curve
from ocvalign.curve import build_curve, interp_ocv
from ocvalign.errors import RangeExceeded
from ocvalign.metrics import absolute_relative_error


def test_reference_curve_shape(nominal):
    assert len(nominal) == 41
    assert (nominal.soc[0], nominal.ocv[0]) == (0.0, 2.5)
    assert (nominal.soc[-1], nominal.ocv[-1]) == (1.0, 4.2)
    assert np.all(np.diff(nominal.ocv) > 0)
    np.testing.assert_allclose(np.diff(nominal.soc), 0.025, atol=1e-12)


def test_reference_curve_mid_soc_slope(nominal):
    mid = (nominal.soc[:-1] >= 0.3 - 1e-12) & (nominal.soc[1:] <= 0.7 + 1e-12)
    slopes = np.diff(nominal.ocv)[mid] / np.diff(nominal.soc)[mid]
    assert slopes.min() > 0.2
    assert slopes.min() == pytest.approx(0.412, abs=1e-9)  # computed once from the fixed table


def test_identity_aging_samples_the_curve(nominal):
    trace = generate(AgingScenario(nominal, CN, 1.0))
    # C/20 current and 300 s sampling step SOC by 1/240
    z = 1.0 - np.arange(len(trace)) / 240
    assert len(trace) == 241
    np.testing.assert_allclose(trace.v_oc, np.interp(np.clip(z, 0, 1), nominal.soc, nominal.ocv), atol=1e-12)
    np.testing.assert_allclose(trace.i_b, -CN / 20)


def test_termination_capacity_exact(nominal):
    sc = AgingScenario(nominal, 4.1, 0.93, soc_stop=0.07, sample_period=123.0)
    trace = generate(sc)
    assert trace.q_dc[-1] == (0.93 - 0.07) * 4.1
    assert np.all(np.diff(trace.q_dc) > 0)
    assert trace.q_dc[0] == 0


def test_same_seed_bit_identical(nominal):
    sc = AgingScenario(nominal, 4.3, 0.9, ocv_noise_sigma=0.005, seed=11)
    a, b = generate(sc), generate(sc)
    assert a.v_oc.tobytes() == b.v_oc.tobytes()
    c = generate(AgingScenario(nominal, 4.3, 0.9, ocv_noise_sigma=0.005, seed=12))
    assert not np.array_equal(a.v_oc, c.v_oc)


def test_noise_is_additive_on_ocv(nominal):
    clean = generate(AgingScenario(nominal, 4.3, 0.9))
    noisy = generate(AgingScenario(nominal, 4.3, 0.9, ocv_noise_sigma=0.005, seed=3))
    np.testing.assert_array_equal(clean.q_dc, noisy.q_dc)
    expected = 0.005 * np.random.default_rng(3).standard_normal(len(clean))
    np.testing.assert_allclose(noisy.v_oc - clean.v_oc, expected, atol=1e-12)


def test_curve_must_cover_scenario():
    partial = build_curve([0.2, 0.6, 1.0], [3.4, 3.7, 4.2])
    with pytest.raises(RangeExceeded):
        generate(AgingScenario(partial, 4.0, 0.9, soc_stop=0.1))
    generate(AgingScenario(partial, 4.0, 0.9, soc_stop=0.2))


def test_step_program(nominal):
    program = [(3600.0, -1.0), (1800.0, 0.0), (7200.0, 0.5), (1e9, -2.0)]
    sc = AgingScenario(nominal, 4.0, 0.8, discharge_current=program, sample_period=600.0, soc_stop=0.3)
    trace = generate(sc)

    def q_exact(t):
        # hand-integrated piecewise-constant current
        if t <= 3600:
            return t / 3600
        if t <= 5400:
            return 1.0
        if t <= 12600:
            return 1.0 - 0.5 * (t - 5400) / 3600
        return 0.0 + 2.0 * (t - 12600) / 3600

    np.testing.assert_allclose(trace.q_dc, [q_exact(t) for t in trace.t], atol=1e-12)
    assert trace.q_dc[-1] == pytest.approx((0.8 - 0.3) * 4.0, abs=1e-15)
    np.testing.assert_allclose(trace.v_oc, interp_ocv(nominal, 0.8 - trace.q_dc / 4.0), atol=1e-15)
    assert trace.i_b[0] == -1.0 and trace.i_b[-1] == -2.0


def test_charging_above_curve_top(nominal):
    with pytest.raises(RangeExceeded):
        generate(AgingScenario(nominal, 4.0, 0.95, discharge_current=[(3600.0, 2.0), (1e9, -1.0)]))


def test_scenario_validation(nominal):
    with pytest.raises(ValueError):
        AgingScenario(nominal, 4.0, 0.5, soc_stop=0.6)
    with pytest.raises(ValueError):
        AgingScenario(nominal, -1.0, 0.5)
    with pytest.raises(ValueError):
        AgingScenario(nominal, 4.0, 0.5, ocv_noise_sigma=-1)


@pytest.mark.parametrize("fraction,z0,stop", [(0.82, 0.97, 0.05), (1.1, 0.75, 0.1), (0.6, 0.9, 0.2)])
def test_round_trip_zero_noise(nominal, fraction, z0, stop):
    trace = generate(AgingScenario(nominal, fraction * CN, z0, soc_stop=stop))
    r = estimate(EstimationProblem.from_trace(nominal, trace, CN))
    assert absolute_relative_error(r.capacity, fraction * CN) < 0.1
    assert r.z0 == pytest.approx(z0, abs=1e-3)


def test_median_error_grows_with_noise(nominal):
    medians = []
    for sigma in (0.0, 0.001, 0.005, 0.010):
        ares = []
        for seed in range(20):
            trace = generate(AgingScenario(nominal, 0.9 * CN, 0.9, ocv_noise_sigma=sigma, seed=seed, soc_stop=0.1))
            r = estimate(EstimationProblem.from_trace(nominal, trace, CN))
            ares.append(absolute_relative_error(r.capacity, 0.9 * CN))
        medians.append(np.median(ares))
    assert all(a <= b for a, b in zip(medians, medians[1:])), medians
