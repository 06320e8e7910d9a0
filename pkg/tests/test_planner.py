"""Forward prediction, path scoring and the inverse pressure planner."""

import math
import random

import numpy as np
import pytest

from vinesim.errors import ConfigError
from vinesim.growth import TipMountConfig, VineState, initial_state, shape
from vinesim.kinematics import LEFT, PAPER_GEOMETRY, RIGHT, sample_backbone
from vinesim.planner import (
    PathScore,
    PressureSchedule,
    ScheduleEntry,
    TargetPath,
    format_score,
    plan_pressures,
    predict_path,
    read_schedule_csv,
    read_target_csv,
    score_path,
    write_schedule_csv,
)
from vinesim.pneumatics import PAPER_VALVE, ValveState, default_calibration

GEOM = PAPER_GEOMETRY
CAL = default_calibration()
DEG = math.pi / 180.0


def one_sided(side: str, pressures) -> PressureSchedule:
    entries = []
    for g, p in enumerate(pressures, start=1):
        entries.append(ScheduleEntry(g, LEFT, p if side == LEFT else 0.0))
        entries.append(ScheduleEntry(g, RIGHT, p if side == RIGHT else 0.0))
    return PressureSchedule(tuple(entries))


def random_schedule(rng: random.Random) -> PressureSchedule:
    entries = []
    for g in range(1, GEOM.n_groups + 1):
        side = rng.choice([LEFT, RIGHT])
        p = rng.uniform(0.0, PAPER_VALVE.p_max)
        entries.append(ScheduleEntry(g, LEFT, p if side == LEFT else 0.0))
        entries.append(ScheduleEntry(g, RIGHT, p if side == RIGHT else 0.0))
    return PressureSchedule(tuple(entries))


# --- schedule / target types ----------------------------------------------------

def test_schedule_rejects_duplicates_and_bad_entries():
    with pytest.raises(ConfigError):
        PressureSchedule((ScheduleEntry(1, LEFT, 0.0), ScheduleEntry(1, LEFT, 1.0)))
    with pytest.raises(ConfigError):
        PressureSchedule((ScheduleEntry(0, LEFT, 0.0),))
    with pytest.raises(ConfigError):
        PressureSchedule((ScheduleEntry(1, "up", 0.0),))
    with pytest.raises(ConfigError):
        PressureSchedule((ScheduleEntry(1, LEFT, -5e3),))


def test_target_path_invariants():
    with pytest.raises(ConfigError):
        TargetPath(((0.0, 0.0),))
    with pytest.raises(ConfigError):
        TargetPath(((0.0, 0.0), (0.0, 0.0)))


# --- forward model ----------------------------------------------------------------

def test_predict_zero_schedule_is_straight():
    bb = predict_path(one_sided(LEFT, [0.0] * 4), GEOM, CAL)
    assert bb.tip.theta == 0.0
    assert bb.tip.y == 0.0
    assert bb.tip.x == pytest.approx(GEOM.total_length, abs=1e-12)


def test_predict_matches_growth_shape_exactly():
    schedule = one_sided(LEFT, [40e3] * 4)
    predicted = predict_path(schedule, GEOM, CAL)
    assert predicted.tip.theta / DEG == pytest.approx(59.2, abs=1e-9)

    state = initial_state(GEOM, TipMountConfig())
    valves = dict(state.valves)
    for g in range(1, 5):
        valves[(LEFT, g)] = ValveState(held_pressure=40e3)
    state = VineState(everted_length=GEOM.total_length, valves=valves)
    simulated = shape(state, GEOM, CAL)
    assert predicted == simulated  # same bend construction, bit-identical


def test_predict_mixed_schedule_matches_growth_shape_exactly():
    rng = random.Random(5)
    schedule = random_schedule(rng)
    predicted = predict_path(schedule, GEOM, CAL)
    state = initial_state(GEOM, TipMountConfig())
    valves = dict(state.valves)
    for e in schedule.entries:
        valves[(e.side, e.group)] = ValveState(held_pressure=e.pressure)
    simulated = shape(VineState(everted_length=GEOM.total_length, valves=valves), GEOM, CAL)
    assert predicted == simulated


def test_predict_increasing_schedule_has_increasing_bends():
    bb = predict_path(one_sided(LEFT, [10e3, 20e3, 30e3, 40e3]), GEOM, CAL)
    qs = [bend.q for bend, _ in bb.segments]
    group_qs = qs[::2]  # one value per group (two equal cells each)
    assert all(a == b for a, b in zip(qs[::2], qs[1::2]))
    assert all(b > a for a, b in zip(group_qs, group_qs[1:]))


# --- scoring ----------------------------------------------------------------------

def test_score_identical_backbones_is_zero():
    bb = predict_path(one_sided(LEFT, [40e3] * 4), GEOM, CAL)
    s = score_path(bb, bb)
    assert s.mean_error == 0.0
    assert s.max_error == 0.0
    assert s.tip_error == 0.0


def test_score_transverse_offset_equals_offset():
    bb = predict_path(one_sided(LEFT, [0.0] * 4), GEOM, CAL)
    d = 0.005
    pts = sample_backbone(bb, 16)
    shifted = TargetPath(tuple((x, y + d) for x, y in pts))
    s = score_path(bb, shifted)
    assert s.mean_error == pytest.approx(d, rel=1e-12)
    assert s.max_error == pytest.approx(d, rel=1e-12)
    assert s.tip_error == pytest.approx(d, rel=1e-12)


def test_score_invariant_mean_le_max():
    with pytest.raises(ValueError):
        PathScore(mean_error=2.0, max_error=1.0, tip_error=0.0)


def test_format_score_in_mm():
    line = format_score(PathScore(mean_error=0.0025, max_error=0.0109, tip_error=0.0047))
    assert line == "score mean_mm=2.500 max_mm=10.900 tip_mm=4.700"


# --- planner ----------------------------------------------------------------------

def test_plan_straight_target_is_exactly_zero():
    res = plan_pressures(TargetPath(((0.0, 0.0), (0.32, 0.0))), GEOM, CAL)
    assert {e.pressure for e in res.schedule.entries} == {0.0}
    assert res.score.tip_error == pytest.approx(0.0, abs=1e-12)
    assert not res.clamped


def test_plan_round_trip_recovers_schedule():
    rng = random.Random(3)
    for _ in range(3):
        schedule = random_schedule(rng)
        bb = predict_path(schedule, GEOM, CAL)
        target = TargetPath(tuple(map(tuple, sample_backbone(bb, 16))))
        res = plan_pressures(target, GEOM, CAL)
        round_trip = score_path(predict_path(res.schedule, GEOM, CAL), target)
        assert round_trip.mean_error < 1e-3


def test_plan_saturation_arc_hits_p_max_exactly():
    target_bb = predict_path(one_sided(LEFT, [40e3] * 4), GEOM, CAL)
    target = TargetPath(tuple(map(tuple, sample_backbone(target_bb, 16))))
    res = plan_pressures(target, GEOM, CAL)
    for g in range(1, 5):
        assert res.schedule.pressure(g, LEFT) == 40e3
        assert res.schedule.pressure(g, RIGHT) == 0.0
    assert res.saturated_groups == (1, 2, 3, 4)
    assert not res.clamped


def test_plan_beyond_saturation_is_clamped_with_diagnostic():
    from vinesim.planner import _dense_cell_samples

    q_max = CAL.max_bend * GEOM.l_cpam
    cells = np.full(GEOM.cells_per_side, 1.4 * q_max)
    target = TargetPath(
        tuple(map(tuple, _dense_cell_samples(cells, GEOM.l_cpam, GEOM.d_vine, 16)))
    )
    res = plan_pressures(target, GEOM, CAL)
    assert res.clamped
    assert res.saturated_groups == (1, 2, 3, 4)
    for g in range(1, 5):
        assert res.schedule.pressure(g, LEFT) == 40e3


def test_plan_objective_trace_non_increasing():
    rng = random.Random(9)
    schedule = random_schedule(rng)
    bb = predict_path(schedule, GEOM, CAL)
    target = TargetPath(tuple(map(tuple, sample_backbone(bb, 16))))
    res = plan_pressures(target, GEOM, CAL)
    assert all(b <= a for a, b in zip(res.objective_trace, res.objective_trace[1:]))


def test_plan_pressures_within_bounds_and_antagonistic():
    rng = random.Random(12)
    schedule = random_schedule(rng)
    bb = predict_path(schedule, GEOM, CAL)
    target = TargetPath(tuple(map(tuple, sample_backbone(bb, 16))))
    res = plan_pressures(target, GEOM, CAL)
    for g in range(1, GEOM.n_groups + 1):
        left = res.schedule.pressure(g, LEFT)
        right = res.schedule.pressure(g, RIGHT)
        assert 0.0 <= left <= PAPER_VALVE.p_max
        assert 0.0 <= right <= PAPER_VALVE.p_max
        assert left == 0.0 or right == 0.0


def test_plan_beats_zero_and_random_schedules():
    rng = random.Random(77)
    reference = random_schedule(rng)
    bb = predict_path(reference, GEOM, CAL)
    target = TargetPath(tuple(map(tuple, sample_backbone(bb, 16))))
    res = plan_pressures(target, GEOM, CAL)

    zero_score = score_path(predict_path(one_sided(LEFT, [0.0] * 4), GEOM, CAL), target)
    assert res.score.mean_error <= zero_score.mean_error
    for _ in range(100):
        other = random_schedule(rng)
        other_score = score_path(predict_path(other, GEOM, CAL), target)
        assert res.score.mean_error <= other_score.mean_error


def test_plan_length_correction_shortens_model():
    bb = predict_path(one_sided(LEFT, [0.0] * 4), GEOM, CAL, length_correction=0.95)
    assert bb.tip.x == pytest.approx(0.95 * GEOM.total_length, rel=1e-12)


# --- file formats -------------------------------------------------------------------

def test_schedule_csv_round_trip(tmp_path):
    schedule = one_sided(LEFT, [10e3, 20e3, 30e3, 40e3])
    path = tmp_path / "schedule.csv"
    write_schedule_csv(schedule, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "group_id,side,pressure_kpa"
    back = read_schedule_csv(path)
    for e in schedule.entries:
        assert back.pressure(e.group, e.side) == pytest.approx(e.pressure, abs=1e-6)


def test_target_csv_units(tmp_path):
    path = tmp_path / "target.csv"
    path.write_text("x_mm,y_mm\n0,0\n160,0\n320,40\n")
    target = read_target_csv(path)
    assert target.waypoints == ((0.0, 0.0), (0.160, 0.0), (0.320, 0.040))


def test_target_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "target.csv"
    path.write_text("x,y\n0,0\n1,1\n")
    with pytest.raises(ConfigError):
        read_target_csv(path)
