"""Time-stepped eversion engine.

The tip mount everts (or retracts) the body at the commanded speed and
carries the permanent magnets: any valve whose arc position falls inside
the magnet window around the tip is open and its pouch group tracks the
side's supply pressure; everything else stays closed and holds.  A valve
sits at the end of its group's span, so it only ever opens once all of its
pouches have everted past the tip.

The engine is deterministic: one step is a pure function of (state, dt,
command, config), and replaying a recorded command log reproduces every
intermediate state bit for bit.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from .errors import CommandError
from .kinematics import (
    LEFT,
    RIGHT,
    Backbone,
    RobotGeometry,
    SegmentBend,
    chain_pose,
)
from .pneumatics import CalibrationCurve, ValveParams, ValveState, bend_from_pressure, valve_step

GROW = "grow"
RETRACT = "retract"
HOLD = "hold"
MODES = (GROW, RETRACT, HOLD)

#: Valve key: (side, 1-based group id)
ValveKey = tuple[str, int]


@dataclass(frozen=True)
class Cell:
    """One pouch slot along the body; left and right pouches share the slot."""

    index: int  # 0-based
    arc_start: float  # distance along the unactuated backbone from the base (m)
    valve_group_left: int
    valve_group_right: int


def build_cells(geometry: RobotGeometry) -> tuple[Cell, ...]:
    cells = []
    for i in range(geometry.cells_per_side):
        group = i // geometry.cpams_per_valve + 1
        cells.append(
            Cell(
                index=i,
                arc_start=i * geometry.l_cpam,
                valve_group_left=group,
                valve_group_right=group,
            )
        )
    return tuple(cells)


def valve_position(group: int, geometry: RobotGeometry) -> float:
    """Arc position of a valve group: the end of its span, so the valve passes
    the tip only after every pouch it feeds has everted."""
    return group * geometry.group_span


@dataclass(frozen=True)
class TipMountConfig:
    eversion_speed: float = 0.010  # m/s
    magnet_window: float = 0.020  # arc-length span centered at the tip (m)
    body_pressure: float = 3.7e3  # vine body pressure (Pa), informational

    def validate(self, geometry: RobotGeometry) -> None:
        if self.eversion_speed < 0:
            raise CommandError("tip mount: eversion speed must be >= 0")
        if not 0.0 < self.magnet_window <= geometry.l_cpam:
            raise CommandError(
                f"tip mount: magnet window must lie in (0, l_cpam] "
                f"(got {self.magnet_window}, l_cpam {geometry.l_cpam})"
            )


@dataclass(frozen=True)
class Command:
    """Operator input: any subset of mode, supplies and eversion speed."""

    set_mode: Optional[str] = None
    set_supply_left: Optional[float] = None  # Pa gauge
    set_supply_right: Optional[float] = None  # Pa gauge
    set_speed: Optional[float] = None  # m/s

    def validate(self, valve: ValveParams) -> None:
        if self.set_mode is not None and self.set_mode not in MODES:
            raise CommandError(f"unknown mode {self.set_mode!r}")
        for name, p in (("supply_left", self.set_supply_left), ("supply_right", self.set_supply_right)):
            if p is not None and not valve.p_vacuum <= p <= valve.p_max:
                raise CommandError(
                    f"{name} {p:.4g} Pa outside [{valve.p_vacuum:.4g}, {valve.p_max:.4g}] Pa"
                )
        if self.set_speed is not None and self.set_speed < 0:
            raise CommandError(f"speed must be >= 0, got {self.set_speed}")


NO_COMMAND = Command()


@dataclass(frozen=True)
class VineState:
    """Full dynamic simulation state.

    ``speed`` persists the last commanded eversion speed and ``warnings``
    carries the diagnostics raised by the step that produced this state
    (skipped valves); both are needed to replay and report faithfully.
    """

    everted_length: float = 0.0
    mode: str = HOLD
    valves: Mapping[ValveKey, ValveState] = field(default_factory=dict)
    supply_left: float = 0.0
    supply_right: float = 0.0
    speed: float = 0.0
    time: float = 0.0
    warnings: tuple[str, ...] = ()


def initial_state(geometry: RobotGeometry, tip: TipMountConfig) -> VineState:
    valves = {}
    for side in (LEFT, RIGHT):
        for group in range(1, geometry.n_groups + 1):
            valves[(side, group)] = ValveState()
    return VineState(valves=valves, speed=tip.eversion_speed)


def _magnet_present(pos: float, tip_arc: float, window: float) -> bool:
    return abs(pos - tip_arc) <= 0.5 * window


def step(
    state: VineState,
    dt: float,
    cmd: Command,
    geometry: RobotGeometry,
    valve: ValveParams,
    tip: TipMountConfig,
) -> VineState:
    """Advance the simulation by one fixed step.

    Applies the command atomically, moves the tip, opens every valve inside
    the magnet window (equalize to supply, then close as it leaves), and
    deflates any pouch group that has been drawn back past the tip.
    Identical inputs yield identical outputs.
    """
    if dt <= 0:
        raise CommandError(f"dt must be positive, got {dt}")
    cmd.validate(valve)
    tip.validate(geometry)

    mode = cmd.set_mode if cmd.set_mode is not None else state.mode
    supply_left = cmd.set_supply_left if cmd.set_supply_left is not None else state.supply_left
    supply_right = cmd.set_supply_right if cmd.set_supply_right is not None else state.supply_right
    speed = cmd.set_speed if cmd.set_speed is not None else state.speed

    old_tip = state.everted_length
    if mode == GROW:
        new_tip = min(geometry.total_length, old_tip + speed * dt)
    elif mode == RETRACT:
        new_tip = max(0.0, old_tip - speed * dt)
    else:
        new_tip = old_tip

    warnings: list[str] = []
    half = 0.5 * tip.magnet_window
    lo, hi = min(old_tip, new_tip), max(old_tip, new_tip)

    cells = build_cells(geometry)
    valves: dict[ValveKey, ValveState] = {}
    for (side, group), vstate in state.valves.items():
        pos = valve_position(group, geometry)
        present = _magnet_present(pos, new_tip, tip.magnet_window)
        # a valve that crossed the whole window between two ticks is skipped
        if not present and lo + half < pos < hi - half:
            warnings.append(f"skipped_valve {side}:{group}")
        supply = supply_left if side == LEFT else supply_right
        new_vstate = valve_step(vstate, present, supply, valve)
        # a pouch drawn back past the tip cannot keep positive pressure
        last_cell_arc = pos - geometry.l_cpam
        if new_tip <= last_cell_arc and new_vstate.held_pressure > 0.0:
            new_vstate = ValveState(is_open=new_vstate.is_open, held_pressure=0.0)
        valves[(side, group)] = new_vstate

    return VineState(
        everted_length=new_tip,
        mode=mode,
        valves=valves,
        supply_left=supply_left,
        supply_right=supply_right,
        speed=speed,
        time=state.time + dt,
        warnings=tuple(warnings),
    )


def cell_bends(
    left_pressures: Mapping[int, float],
    right_pressures: Mapping[int, float],
    geometry: RobotGeometry,
    calibration: CalibrationCurve,
    n_cells: int,
) -> list[tuple[SegmentBend, str]]:
    """Per-cell signed bends from per-group gauge pressures.

    Shared by the growth shape and the planner's forward model so both
    produce bit-identical backbones for the same pressures.
    """
    bends = []
    for i in range(n_cells):
        group = i // geometry.cpams_per_valve + 1
        # deflated (negative) pressures contribute no bend
        q_per_len = bend_from_pressure(
            calibration, left_pressures.get(group, 0.0)
        ) - bend_from_pressure(calibration, right_pressures.get(group, 0.0))
        q = q_per_len * geometry.l_cpam
        side = LEFT if q >= 0.0 else RIGHT
        bends.append((SegmentBend(q=q, l=geometry.l_cpam), side))
    return bends


def shape(
    state: VineState,
    geometry: RobotGeometry,
    calibration: CalibrationCurve,
) -> Backbone:
    """Current backbone: one constant-curvature piece per fully everted cell,
    plus a straight piece for the everted fraction of the frontmost cell."""
    tip_arc = state.everted_length
    # the cell-fraction tolerance absorbs float drift from long accumulations
    # (sub-angstrom at bench scale, far below any physical effect)
    n_full = min(geometry.cells_per_side, int(math.floor(tip_arc / geometry.l_cpam + 1e-9)))
    left = {g: state.valves[(LEFT, g)].held_pressure for g in range(1, geometry.n_groups + 1)}
    right = {g: state.valves[(RIGHT, g)].held_pressure for g in range(1, geometry.n_groups + 1)}
    bends = cell_bends(left, right, geometry, calibration, n_full)
    partial = tip_arc - n_full * geometry.l_cpam
    if partial > 0.0:
        bends.append((SegmentBend(q=0.0, l=partial), LEFT))
    return chain_pose(bends, geometry)


@dataclass(frozen=True)
class RetractionRisk:
    """A pouch still pressurized behind the tip while retracting."""

    cell_index: int
    side: str
    group: int
    held_pressure: float  # Pa gauge


def check_retraction_risk(
    state: VineState,
    geometry: RobotGeometry,
    threshold: float = 5e3,
) -> tuple[RetractionRisk, ...]:
    """Advisory report of un-deflated pouches that would resist retraction.

    Only applies while retracting; never alters simulation state.
    """
    if state.mode != RETRACT:
        return ()
    flags = []
    for cell in build_cells(geometry):
        if cell.arc_start >= state.everted_length:
            continue
        for side, group in ((LEFT, cell.valve_group_left), (RIGHT, cell.valve_group_right)):
            held = state.valves[(side, group)].held_pressure
            if held > threshold:
                flags.append(
                    RetractionRisk(cell_index=cell.index, side=side, group=group, held_pressure=held)
                )
    return tuple(flags)


# --- command log: newline-delimited full-state records ----------------------

LOG_HEADER = ("t_s", "mode", "supply_left_kpa", "supply_right_kpa", "speed_mm_s")


@dataclass(frozen=True)
class LogRecord:
    t: float  # s
    mode: str
    supply_left: float  # Pa
    supply_right: float  # Pa
    speed: float  # m/s

    def command(self) -> Command:
        return Command(
            set_mode=self.mode,
            set_supply_left=self.supply_left,
            set_supply_right=self.supply_right,
            set_speed=self.speed,
        )


def write_command_log(records: Iterable[LogRecord], target: Union[str, Path, io.TextIOBase]) -> None:
    own = isinstance(target, (str, Path))
    fh = open(target, "w", newline="") if own else target
    try:
        writer = csv.writer(fh)
        writer.writerow(LOG_HEADER)
        for rec in records:
            writer.writerow(
                (
                    f"{rec.t:.6f}",
                    rec.mode,
                    f"{rec.supply_left * 1e-3:.6f}",
                    f"{rec.supply_right * 1e-3:.6f}",
                    f"{rec.speed * 1e3:.6f}",
                )
            )
    finally:
        if own:
            fh.close()


def read_command_log(source: Union[str, Path, io.TextIOBase]) -> list[LogRecord]:
    own = isinstance(source, (str, Path))
    fh = open(source, newline="") if own else source
    try:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != LOG_HEADER:
            raise CommandError(f"command log: expected header {','.join(LOG_HEADER)}")
        records = []
        for row in reader:
            if not row:
                continue
            t, mode, left_kpa, right_kpa, speed_mm_s = row
            if mode not in MODES:
                raise CommandError(f"command log: unknown mode {mode!r}")
            records.append(
                LogRecord(
                    t=float(t),
                    mode=mode,
                    supply_left=float(left_kpa) * 1e3,
                    supply_right=float(right_kpa) * 1e3,
                    speed=float(speed_mm_s) * 1e-3,
                )
            )
        for a, b in zip(records, records[1:]):
            if b.t < a.t:
                raise CommandError("command log: records must be time-ordered")
        return records
    finally:
        if own:
            fh.close()


def replay(
    records: Sequence[LogRecord],
    duration: float,
    dt: float,
    geometry: RobotGeometry,
    valve: ValveParams,
    tip: TipMountConfig,
) -> list[VineState]:
    """Run a command log from the initial state; returns every state, initial first.

    A record applies at the first tick whose start time has reached it
    (half-tick tolerance absorbs float accumulation).
    """
    state = initial_state(geometry, tip)
    states = [state]
    n_steps = int(round(duration / dt))
    next_rec = 0
    for _ in range(n_steps):
        cmd = NO_COMMAND
        while next_rec < len(records) and records[next_rec].t <= state.time + 0.5 * dt:
            cmd = records[next_rec].command()  # later records win within a tick
            next_rec += 1
        state = step(state, dt, cmd, geometry, valve, tip)
        states.append(state)
    return states
