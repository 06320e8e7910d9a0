"""Valve design equations, the open/close state machine, and calibration curves."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vinesim import units
from vinesim.errors import ConfigError, InfeasibleBendError
from vinesim.pneumatics import (
    PAPER_VALVE,
    CSV_HEADER,
    CalibrationCurve,
    ValveParams,
    ValveState,
    bend_from_pressure,
    default_calibration,
    load_calibration_csv,
    max_pouch_force,
    pressure_from_bend,
    required_magnet_force,
    required_pretension,
    save_calibration_csv_si,
    valve_step,
)

D_BALL = 2.5e-3
P_MAX = 40e3
K = 928.0  # 0.928 N/mm


# --- design equations ---------------------------------------------------------

def test_max_pouch_force_value():
    # half the ball's surface area times the design pressure
    assert max_pouch_force(D_BALL, P_MAX) == pytest.approx(0.3927, abs=1e-4)


def test_required_pretension_bench_value():
    x0 = required_pretension(K, D_BALL, P_MAX)
    assert x0 * 1e3 == pytest.approx(0.424, abs=0.002)


def test_required_pretension_zero_pressure():
    assert required_pretension(K, D_BALL, 0.0) == 0.0


def test_required_pretension_rejects_bad_stiffness():
    with pytest.raises(ValueError):
        required_pretension(0.0, D_BALL, P_MAX)


def test_required_magnet_force_value():
    assert required_magnet_force(D_BALL, P_MAX) == pytest.approx(0.785, abs=1e-3)


def test_required_magnet_force_zero_pressure():
    assert required_magnet_force(D_BALL, 0.0) == 0.0


def test_required_magnet_force_scales_with_ball_area():
    assert required_magnet_force(2 * D_BALL, P_MAX) == pytest.approx(
        4 * required_magnet_force(D_BALL, P_MAX), rel=1e-12
    )


def test_paper_valve_satisfies_design_inequalities():
    v = PAPER_VALVE
    assert v.k_spring * v.x0 >= max_pouch_force(v.d_ball, v.p_max)
    assert v.f_magnet >= required_magnet_force(v.d_ball, v.p_max)


def test_valve_params_reject_weak_spring():
    with pytest.raises(ConfigError, match="closed-when-unmagnetized"):
        ValveParams(k_spring=K, x0=0.3e-3, d_ball=D_BALL, p_max=P_MAX, f_magnet=1.0)


def test_valve_params_reject_weak_magnet():
    with pytest.raises(ConfigError, match="open-when-magnetized"):
        ValveParams(k_spring=K, x0=0.5e-3, d_ball=D_BALL, p_max=P_MAX, f_magnet=0.5)


def test_valve_params_reject_positive_vacuum_floor():
    with pytest.raises(ConfigError, match="vacuum"):
        ValveParams(k_spring=K, x0=0.5e-3, d_ball=D_BALL, p_max=P_MAX, f_magnet=1.0, p_vacuum=5e3)


# --- valve state machine -------------------------------------------------------

def test_closed_valve_holds_pressure():
    state = ValveState(is_open=False, held_pressure=30e3)
    after = valve_step(state, magnet_present=False, p_supply=0.0, params=PAPER_VALVE)
    assert after.is_open is False
    assert after.held_pressure == 30e3


def test_magnet_opens_and_equalizes():
    state = ValveState(is_open=False, held_pressure=30e3)
    after = valve_step(state, magnet_present=True, p_supply=40e3, params=PAPER_VALVE)
    assert after.is_open is True
    assert after.held_pressure == 40e3


def test_vacuum_deflates_open_valve():
    state = ValveState(is_open=False, held_pressure=20e3)
    after = valve_step(state, magnet_present=True, p_supply=-10e3, params=PAPER_VALVE)
    assert after.is_open is True
    assert after.held_pressure == -10e3


def test_out_of_range_supply_rejected():
    state = ValveState(is_open=False, held_pressure=20e3)
    with pytest.raises(ConfigError):
        valve_step(state, magnet_present=True, p_supply=60e3, params=PAPER_VALVE)
    with pytest.raises(ConfigError):
        valve_step(state, magnet_present=True, p_supply=-30e3, params=PAPER_VALVE)
    assert state.held_pressure == 20e3


def test_closed_hold_is_bit_stable_over_random_sequences():
    rng = random.Random(7)
    state = ValveState(is_open=False, held_pressure=17.3e3)
    for _ in range(1000):
        supply = rng.uniform(PAPER_VALVE.p_vacuum, PAPER_VALVE.p_max)
        state = valve_step(state, magnet_present=False, p_supply=supply, params=PAPER_VALVE)
        assert state.held_pressure == 17.3e3
        assert state.is_open is False


@given(supplies=st.lists(st.floats(-20e3, 40e3), min_size=1, max_size=50))
@settings(max_examples=50, deadline=None)
def test_open_valve_tracks_supply(supplies):
    state = ValveState()
    for p in supplies:
        state = valve_step(state, magnet_present=True, p_supply=p, params=PAPER_VALVE)
        assert state.held_pressure == p


# --- calibration curve ----------------------------------------------------------

def test_curve_requires_origin_anchor():
    with pytest.raises(ConfigError, match=r"\(0, 0\)"):
        CalibrationCurve([(10e3, 1.0)])


def test_curve_requires_increasing_pressures():
    with pytest.raises(ConfigError, match="strictly increasing"):
        CalibrationCurve([(0.0, 0.0), (10e3, 1.0), (10e3, 2.0)])


def test_curve_requires_monotone_bends():
    with pytest.raises(ConfigError, match="non-decreasing"):
        CalibrationCurve([(0.0, 0.0), (10e3, 2.0), (20e3, 1.0)])


def test_default_curve_anchors():
    c = default_calibration()
    assert bend_from_pressure(c, 0.0) == 0.0
    assert units.rad_per_m_to_deg_per_mm(bend_from_pressure(c, 40e3)) == pytest.approx(0.185)


def test_bend_midpoint_interpolation():
    c = default_calibration()
    assert units.rad_per_m_to_deg_per_mm(bend_from_pressure(c, 20e3)) == pytest.approx(0.0925)


def test_bend_saturates_above_table():
    c = default_calibration()
    assert bend_from_pressure(c, 55e3) == bend_from_pressure(c, 40e3)


def test_bend_negative_pressure_is_zero():
    c = default_calibration()
    assert bend_from_pressure(c, -10e3) == 0.0


@given(p=st.floats(0.0, 80e3))
@settings(max_examples=200, deadline=None)
def test_bend_is_monotone_and_bounded(p):
    c = CalibrationCurve([(0.0, 0.0), (10e3, 0.5), (20e3, 0.5), (40e3, 3.2)])
    b = bend_from_pressure(c, p)
    assert 0.0 <= b <= c.max_bend
    assert bend_from_pressure(c, p + 1e3) >= b


def test_inverse_trivial_and_max():
    c = default_calibration()
    assert pressure_from_bend(c, 0.0) == 0.0
    assert pressure_from_bend(c, c.max_bend) == 40e3


def test_inverse_rejects_overshoot():
    c = default_calibration()
    with pytest.raises(InfeasibleBendError):
        pressure_from_bend(c, c.max_bend * 1.01)


def test_inverse_plateau_returns_smallest_pressure():
    c = CalibrationCurve([(0.0, 0.0), (10e3, 0.5), (20e3, 0.5), (40e3, 3.2)])
    assert pressure_from_bend(c, 0.5) == 10e3


def test_round_trip_over_all_table_nodes():
    c = CalibrationCurve([(0.0, 0.0), (5e3, 0.2), (10e3, 0.9), (25e3, 2.0), (40e3, 3.2)])
    for p, _ in c.points:
        assert pressure_from_bend(c, bend_from_pressure(c, p)) == p


@given(bend=st.floats(0.0, 3.2))
@settings(max_examples=200, deadline=None)
def test_inverse_consistency_on_strictly_increasing_curve(bend):
    c = CalibrationCurve([(0.0, 0.0), (5e3, 0.2), (10e3, 0.9), (25e3, 2.0), (40e3, 3.2)])
    p = pressure_from_bend(c, bend)
    assert bend_from_pressure(c, p) == pytest.approx(bend, abs=1e-12)


# --- CSV ------------------------------------------------------------------------

def test_calibration_csv_round_trip(tmp_path):
    path = tmp_path / "table.csv"
    path.write_text(
        "pressure_kpa,bend_deg_per_mm\n0,0\n10,0.05\n20,0.0925\n40,0.185\n"
    )
    c = load_calibration_csv(path)
    assert len(c.points) == 4
    assert c.max_pressure == 40e3
    assert units.rad_per_m_to_deg_per_mm(c.max_bend) == pytest.approx(0.185)

    out = tmp_path / "si.csv"
    save_calibration_csv_si(c, out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "pressure_pa,bend_rad_per_m"
    assert len(lines) == 5


def test_calibration_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "table.csv"
    path.write_text("kpa,bend\n0,0\n")
    with pytest.raises(ConfigError, match=",".join(CSV_HEADER)):
        load_calibration_csv(path)


def test_calibration_csv_rejects_nonmonotone(tmp_path):
    path = tmp_path / "table.csv"
    path.write_text("pressure_kpa,bend_deg_per_mm\n0,0\n20,0.1\n10,0.2\n")
    with pytest.raises(ConfigError):
        load_calibration_csv(path)
