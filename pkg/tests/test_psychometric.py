import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srtkit.psychometric import (
    PsychometricFunction,
    fit_line,
    invert_nh_logistic,
    line_to_srt,
)

from oracles import ols_fit


def test_evaluate_midpoint_is_half_of_max():
    fn = PsychometricFunction(srt=60.0, slope=4.5, wrs_max=100.0)
    assert fn.evaluate(60.0) == pytest.approx(50.0)
    scaled = PsychometricFunction(srt=72.0, slope=3.0, wrs_max=70.0)
    assert scaled.evaluate(72.0) == pytest.approx(35.0)


def test_evaluate_ten_db_above_midpoint():
    fn = PsychometricFunction(srt=60.0, slope=4.5, wrs_max=100.0)
    expected = 100.0 / (1.0 + math.exp(-1.8))
    assert fn.evaluate(70.0) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(85.8, abs=0.05)


def test_evaluate_saturates_at_wrs_max():
    fn = PsychometricFunction(srt=60.0, slope=4.5, wrs_max=85.0)
    assert fn.evaluate(500.0) == pytest.approx(85.0, abs=1e-9)
    assert fn.evaluate(-500.0) == pytest.approx(0.0, abs=1e-9)


def test_invalid_parameters_rejected():
    with pytest.raises(ValueError):
        PsychometricFunction(srt=60.0, slope=0.0, wrs_max=100.0)
    with pytest.raises(ValueError):
        PsychometricFunction(srt=60.0, slope=4.5, wrs_max=0.0)
    with pytest.raises(ValueError):
        PsychometricFunction(srt=60.0, slope=4.5, wrs_max=101.0)


@given(
    srt=st.floats(20.0, 110.0),
    slope=st.floats(0.5, 8.0),
    wrs_max=st.floats(10.0, 100.0),
)
@settings(max_examples=60)
def test_midpoint_derivative_matches_scaled_slope(srt, slope, wrs_max):
    """Central finite difference at the midpoint equals slope * wrs_max / 100."""
    fn = PsychometricFunction(srt=srt, slope=slope, wrs_max=wrs_max)
    h = 1e-3
    derivative = (fn.evaluate(srt + h) - fn.evaluate(srt - h)) / (2.0 * h)
    assert derivative == pytest.approx(slope * wrs_max / 100.0, abs=1e-6)


@given(
    srt=st.floats(20.0, 110.0),
    slope=st.floats(0.5, 8.0),
    lo=st.floats(-20.0, 130.0),
    delta=st.floats(0.01, 40.0),
)
@settings(max_examples=60)
def test_evaluate_strictly_increasing(srt, slope, lo, delta):
    fn = PsychometricFunction(srt=srt, slope=slope, wrs_max=100.0)
    assert fn.evaluate(lo + delta) > fn.evaluate(lo)


def test_level_at_inverts_evaluate():
    fn = PsychometricFunction(srt=65.0, slope=2.5, wrs_max=80.0)
    for wrs in (5.0, 40.0, 75.0):
        assert fn.evaluate(fn.level_at(wrs)) == pytest.approx(wrs, abs=1e-9)
    with pytest.raises(ValueError):
        fn.level_at(80.0)


def test_fit_line_two_points():
    slope, intercept = fit_line([(60.0, 30.0), (80.0, 70.0)])
    assert slope == pytest.approx(2.0)
    assert intercept == pytest.approx(-90.0)
    slope, _ = fit_line([(60.0, 50.0), (80.0, 90.0)])
    assert slope == pytest.approx(2.0)


def test_fit_line_duplicate_levels_rejected():
    with pytest.raises(ValueError):
        fit_line([(60.0, 30.0), (60.0, 70.0)])
    with pytest.raises(ValueError):
        fit_line([(60.0, 30.0)])


def test_fit_line_three_points_matches_normal_equations():
    points = [(60.0, 25.0), (80.0, 70.0), (100.0, 90.0)]
    slope, intercept = fit_line(points)
    beta, _ = ols_fit([[p[0]] for p in points], [p[1] for p in points])
    assert intercept == pytest.approx(beta[0], abs=1e-9)
    assert slope == pytest.approx(beta[1], abs=1e-9)


def test_fit_line_symmetric_in_point_order():
    forward = fit_line([(60.0, 30.0), (80.0, 70.0)])
    backward = fit_line([(80.0, 70.0), (60.0, 30.0)])
    assert forward == pytest.approx(backward)


def test_line_to_srt_examples():
    assert line_to_srt(*fit_line([(60.0, 30.0), (80.0, 70.0)])) == pytest.approx(70.0)
    assert line_to_srt(2.0, 50.0 - 2.0 * 60.0) == pytest.approx(60.0)
    # slope 4.5 through (80, 70): 50% sits 20/4.5 dB below the point
    intercept = 70.0 - 4.5 * 80.0
    assert line_to_srt(4.5, intercept) == pytest.approx(80.0 - 20.0 / 4.5)


def test_line_to_srt_rejects_non_positive_slope():
    with pytest.raises(ValueError):
        line_to_srt(0.0, 10.0)
    with pytest.raises(ValueError):
        line_to_srt(-1.0, 10.0)


def test_invert_nh_logistic_fifty_percent_point():
    assert invert_nh_logistic(60.0, 50.0) == pytest.approx(60.0)


def test_invert_nh_logistic_matches_forward_curve():
    fn = PsychometricFunction(srt=50.0, slope=4.5, wrs_max=100.0)
    wrs = fn.evaluate(60.0)
    assert invert_nh_logistic(60.0, wrs) == pytest.approx(50.0, abs=1e-9)


def test_invert_nh_logistic_clamps_saturated_scores():
    # 100% is treated as 97.5%, half a word inside the scale end
    expected = 60.0 + math.log(100.0 / 97.5 - 1.0) / 0.18
    assert invert_nh_logistic(60.0, 100.0) == pytest.approx(expected)
    assert expected == pytest.approx(39.6, abs=0.05)
    # 0% mirrors to 2.5%
    mirrored = 60.0 + math.log(100.0 / 2.5 - 1.0) / 0.18
    assert invert_nh_logistic(60.0, 0.0) == pytest.approx(mirrored)


# Inside the clamp bounds (2.5% either side) the inversion is exact.
@given(wrs=st.floats(2.5, 97.5), srt=st.floats(0.0, 120.0))
@settings(max_examples=60)
def test_invert_nh_logistic_round_trip(wrs, srt):
    fn = PsychometricFunction(srt=srt, slope=4.5, wrs_max=100.0)
    level = fn.level_at(wrs)
    assert invert_nh_logistic(level, wrs) == pytest.approx(srt, abs=1e-9)


@given(shift=st.floats(-30.0, 30.0))
@settings(max_examples=40)
def test_line_fit_is_level_shift_equivariant(shift):
    points = [(60.0, 30.0), (80.0, 70.0)]
    shifted = [(level + shift, wrs) for level, wrs in points]
    base = line_to_srt(*fit_line(points))
    moved = line_to_srt(*fit_line(shifted))
    assert moved == pytest.approx(base + shift, abs=1e-9)
