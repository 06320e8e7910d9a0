"""Configuration and scenario documents.

JSON at this boundary uses bench units (mm, kPa, deg, mm/s); everything is
converted to SI here and validated against the domain invariants, which are
reported by name.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

from . import units
from .errors import CommandError, ConfigError
from .growth import MODES, LogRecord, TipMountConfig, valve_position
from .kinematics import PAPER_GEOMETRY, RobotGeometry
from .pneumatics import (
    PAPER_VALVE,
    CalibrationCurve,
    ValveParams,
    default_calibration,
    load_calibration_csv,
)
from .planner import PressureSchedule, ScheduleEntry


@dataclass(frozen=True)
class SimConfig:
    """Everything a simulation session needs."""

    geometry: RobotGeometry = PAPER_GEOMETRY
    valve: ValveParams = PAPER_VALVE
    tip: TipMountConfig = TipMountConfig()
    calibration: CalibrationCurve = field(default_factory=default_calibration)
    dt: float = 0.010  # s
    frame_rate: float = 30.0  # Hz
    points_per_segment: int = 8  # frame backbone sampling density

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ConfigError("config: dt must be positive")
        if self.frame_rate <= 0:
            raise ConfigError("config: frame_rate must be positive")
        if self.points_per_segment < 1:
            raise ConfigError("config: backbone sampling needs >= 1 point per segment")
        try:
            self.tip.validate(self.geometry)
        except CommandError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def ticks_per_frame(self) -> int:
        return max(1, round(1.0 / (self.frame_rate * self.dt)))


def _get(doc: dict, key: str, default: Any) -> Any:
    value = doc.get(key, default)
    return default if value is None else value


def _parse_geometry(doc: dict) -> RobotGeometry:
    g = PAPER_GEOMETRY
    return RobotGeometry(
        d_vine=units.mm_to_m(_get(doc, "d_vine_mm", units.m_to_mm(g.d_vine))),
        l_cpam=units.mm_to_m(_get(doc, "l_cpam_mm", units.m_to_mm(g.l_cpam))),
        w_cpam=units.mm_to_m(_get(doc, "w_cpam_mm", units.m_to_mm(g.w_cpam))),
        f_cpam=units.mm_to_m(_get(doc, "f_cpam_mm", units.m_to_mm(g.f_cpam))),
        cells_per_side=int(_get(doc, "cells_per_side", g.cells_per_side)),
        cpams_per_valve=int(_get(doc, "cpams_per_valve", g.cpams_per_valve)),
    )


def _parse_valve(doc: dict) -> ValveParams:
    v = PAPER_VALVE
    return ValveParams(
        k_spring=_get(doc, "k_spring_n_per_mm", v.k_spring * 1e-3) * 1e3,
        x0=units.mm_to_m(_get(doc, "pretension_mm", units.m_to_mm(v.x0))),
        d_ball=units.mm_to_m(_get(doc, "d_ball_mm", units.m_to_mm(v.d_ball))),
        p_max=units.kpa_to_pa(_get(doc, "p_max_kpa", units.pa_to_kpa(v.p_max))),
        f_magnet=_get(doc, "f_magnet_n", v.f_magnet),
        p_vacuum=units.kpa_to_pa(_get(doc, "p_vacuum_kpa", units.pa_to_kpa(v.p_vacuum))),
    )


def _parse_tip(doc: dict, geometry: RobotGeometry) -> TipMountConfig:
    default_window = 0.5 * geometry.l_cpam
    return TipMountConfig(
        eversion_speed=_get(doc, "speed_mm_s", 10.0) * 1e-3,
        magnet_window=units.mm_to_m(_get(doc, "magnet_window_mm", units.m_to_mm(default_window))),
        body_pressure=units.kpa_to_pa(_get(doc, "body_pressure_kpa", 3.7)),
    )


def _parse_calibration(doc: dict, base_dir: Optional[Path]) -> CalibrationCurve:
    if "calibration_csv" in doc and doc["calibration_csv"] is not None:
        path = Path(doc["calibration_csv"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return load_calibration_csv(path)
    table = doc.get("calibration")
    if table is None:
        return default_calibration()
    points = [
        (units.kpa_to_pa(float(p)), units.deg_per_mm_to_rad_per_m(float(b)))
        for p, b in table
    ]
    return CalibrationCurve(points)


def parse_config(doc: dict, base_dir: Optional[Path] = None) -> SimConfig:
    """Build a validated SimConfig from a (possibly partial) JSON document."""
    if not isinstance(doc, dict):
        raise ConfigError("config: document must be a JSON object")
    geometry = _parse_geometry(doc.get("geometry") or {})
    return SimConfig(
        geometry=geometry,
        valve=_parse_valve(doc.get("valve") or {}),
        tip=_parse_tip(doc.get("tip") or {}, geometry),
        calibration=_parse_calibration(doc, base_dir),
        dt=_get(doc, "dt_ms", 10.0) * 1e-3,
        frame_rate=float(_get(doc, "frame_rate_hz", 30.0)),
        points_per_segment=int(_get(doc, "backbone_points_per_segment", 8)),
    )


def load_config(path: Union[str, Path]) -> SimConfig:
    path = Path(path)
    with open(path) as fh:
        doc = json.load(fh)
    return parse_config(doc, base_dir=path.parent)


@dataclass(frozen=True)
class Scenario:
    """A batch run: one config plus exactly one of {command log, pressure schedule}."""

    name: str
    config: SimConfig
    records: tuple[LogRecord, ...]
    duration: float  # s
    schedule: Optional[PressureSchedule] = None  # kept for reporting when schedule-driven


def compile_schedule(schedule: PressureSchedule, config: SimConfig) -> list[LogRecord]:
    """Turn a per-group pressure schedule into a grow command log.

    The robot everts at the configured speed; supplies switch to each
    group's pressures at the arc midpoint between consecutive valve
    positions, safely outside both magnet windows.
    """
    geom = config.geometry
    tip = config.tip
    if tip.eversion_speed <= 0:
        raise ConfigError("scenario: schedule-driven runs need a positive eversion speed")
    if tip.magnet_window >= geom.group_span:
        raise ConfigError(
            "scenario: magnet window must be smaller than a valve group span "
            "to apply one pressure per group"
        )
    records = []
    for g in range(1, geom.n_groups + 1):
        if g == 1:
            t = 0.0
        else:
            arc = valve_position(g, geom) - 0.5 * geom.group_span
            t = arc / tip.eversion_speed
        records.append(
            LogRecord(
                t=t,
                mode="grow",
                supply_left=schedule.pressure(g, "left"),
                supply_right=schedule.pressure(g, "right"),
                speed=tip.eversion_speed,
            )
        )
    return records


def _parse_inline_log(rows: list) -> list[LogRecord]:
    records = []
    for row in rows:
        if len(row) != 5:
            raise ConfigError(f"scenario: command log rows need 5 fields, got {row!r}")
        t, mode, left_kpa, right_kpa, speed_mm_s = row
        if mode not in MODES:
            raise ConfigError(f"scenario: unknown mode {mode!r}")
        records.append(
            LogRecord(
                t=float(t),
                mode=mode,
                supply_left=units.kpa_to_pa(float(left_kpa)),
                supply_right=units.kpa_to_pa(float(right_kpa)),
                speed=float(speed_mm_s) * 1e-3,
            )
        )
    return records


def parse_scenario(doc: dict, base_dir: Optional[Path] = None) -> Scenario:
    from .growth import read_command_log  # local import to avoid cycle noise

    if not isinstance(doc, dict):
        raise ConfigError("scenario: document must be a JSON object")
    config = parse_config(doc.get("config") or {}, base_dir)
    has_log = "command_log" in doc and doc["command_log"] is not None
    has_schedule = "schedule" in doc and doc["schedule"] is not None
    if has_log == has_schedule:
        raise ConfigError("scenario: exactly one of command_log or schedule must be present")

    schedule = None
    if has_schedule:
        entries = tuple(
            ScheduleEntry(
                group=int(e["group"]),
                side=str(e["side"]),
                pressure=units.kpa_to_pa(float(e["kpa"])),
            )
            for e in doc["schedule"]
        )
        schedule = PressureSchedule(entries=entries)
        for e in schedule.entries:
            if e.pressure > config.valve.p_max:
                raise ConfigError(
                    f"scenario: schedule pressure {units.pa_to_kpa(e.pressure)} kPa "
                    f"exceeds p_max {units.pa_to_kpa(config.valve.p_max)} kPa"
                )
            if e.group > config.geometry.n_groups:
                raise ConfigError(
                    f"scenario: schedule group {e.group} exceeds the robot's "
                    f"{config.geometry.n_groups} valve groups"
                )
        records = compile_schedule(schedule, config)
        default_duration = config.geometry.total_length / config.tip.eversion_speed
    else:
        log = doc["command_log"]
        if isinstance(log, str):
            path = Path(log)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            records = read_command_log(path)
        else:
            records = _parse_inline_log(log)
        default_duration = records[-1].t if records else 0.0

    duration = float(_get(doc, "duration_s", default_duration))
    if duration < 0:
        raise ConfigError("scenario: duration_s must be >= 0")
    return Scenario(
        name=str(doc.get("name", "scenario")),
        config=config,
        records=tuple(records),
        duration=duration,
        schedule=schedule,
    )


def load_scenario(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    with open(path) as fh:
        doc = json.load(fh)
    return parse_scenario(doc, base_dir=path.parent)
