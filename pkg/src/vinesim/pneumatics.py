"""Magnetic valve physics and the pressure-to-bend calibration curve.

The ball valve is normally closed: a pretensioned spring must beat the
worst-case pouch-side pressure force, and the external magnet must beat
spring plus supply-side force to guarantee opening.  At runtime the valve
is a two-state machine: open valves equalize the pouch to the supply line
within one step, closed valves trap their pressure indefinitely.
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

from . import units
from .errors import ConfigError, InfeasibleBendError


def max_pouch_force(d_ball: float, p_max: float) -> float:
    """Worst-case pouch-side force on the ball: half its surface area times p_max."""
    return 0.5 * 4.0 * math.pi * (0.5 * d_ball) ** 2 * p_max


def required_pretension(k_spring: float, d_ball: float, p_max: float) -> float:
    """Minimum spring pretension displacement keeping the valve closed without a magnet."""
    if k_spring <= 0:
        raise ValueError(f"spring stiffness must be positive, got {k_spring}")
    return max_pouch_force(d_ball, p_max) / k_spring


def required_magnet_force(d_ball: float, p_max: float) -> float:
    """Minimum magnet pull that opens the valve against spring plus supply force."""
    return math.pi * d_ball**2 * p_max


@dataclass(frozen=True)
class ValveParams:
    """Physical valve constants; both design inequalities are asserted at construction."""

    k_spring: float  # N/m
    x0: float  # pretension displacement (m)
    d_ball: float  # magnetic ball diameter (m)
    p_max: float  # system design maximum pressure (Pa gauge)
    f_magnet: float  # magnet pull at the valve when the tip mount is adjacent (N)
    p_vacuum: float = -20e3  # supply vacuum floor (Pa gauge)

    def __post_init__(self) -> None:
        if self.k_spring <= 0 or self.d_ball <= 0 or self.p_max < 0:
            raise ConfigError("valve: k_spring and d_ball must be positive, p_max >= 0")
        if self.p_vacuum > 0:
            raise ConfigError("valve: vacuum floor must be <= 0 Pa gauge")
        f_spring = self.k_spring * self.x0
        f_pouch = max_pouch_force(self.d_ball, self.p_max)
        if f_spring < f_pouch:
            raise ConfigError(
                "valve: closed-when-unmagnetized condition violated: "
                f"k*x0 = {f_spring:.4g} N < max pouch force {f_pouch:.4g} N"
            )
        f_open = required_magnet_force(self.d_ball, self.p_max)
        if self.f_magnet < f_open:
            raise ConfigError(
                "valve: open-when-magnetized condition violated: "
                f"f_magnet = {self.f_magnet:.4g} N < {f_open:.4g} N"
            )


#: Bench valve: 2.5 mm ball, 40 kPa system maximum.  The spring constant is
#: read as 0.928 N/mm (= 928 N/m); the pretension below only balances the
#: closed-valve inequality under that reading.  The magnet pull is not
#: characterized numerically on the bench, so a value above the opening
#: threshold (0.785 N) is used.
PAPER_VALVE = ValveParams(
    k_spring=928.0,
    x0=0.424e-3,
    d_ball=2.5e-3,
    p_max=40e3,
    f_magnet=1.0,
)


@dataclass(frozen=True)
class ValveState:
    """Open/closed flag plus the pouch-side pressure trapped when closed."""

    is_open: bool = False
    held_pressure: float = 0.0  # Pa gauge


def valve_step(
    state: ValveState,
    magnet_present: bool,
    p_supply: float,
    params: ValveParams,
) -> ValveState:
    """Advance the valve one step.

    With a magnet adjacent the valve opens and the pouch equalizes to the
    supply line (quasi-static); without one it closes and traps whatever
    pressure it holds.
    """
    if not params.p_vacuum <= p_supply <= params.p_max:
        raise ConfigError(
            f"supply pressure {p_supply:.4g} Pa outside "
            f"[{params.p_vacuum:.4g}, {params.p_max:.4g}] Pa"
        )
    if magnet_present:
        return ValveState(is_open=True, held_pressure=p_supply)
    return ValveState(is_open=False, held_pressure=state.held_pressure)


class CalibrationCurve:
    """Monotone piecewise-linear map from gauge pressure to bend per length.

    Anchored at (0, 0); pressures strictly increasing, bends non-decreasing.
    Above the last table pressure the bend saturates at the last value.
    """

    def __init__(self, points: Iterable[tuple[float, float]]):
        pts = [(float(p), float(b)) for p, b in points]
        if not pts:
            raise ConfigError("calibration: curve needs at least one point")
        if pts[0] != (0.0, 0.0):
            raise ConfigError("calibration: first point must be (0, 0)")
        for (p0, b0), (p1, b1) in zip(pts, pts[1:]):
            if p1 <= p0:
                raise ConfigError("calibration: pressures must be strictly increasing")
            if b1 < b0:
                raise ConfigError("calibration: bend per length must be non-decreasing")
        self.points = tuple(pts)
        self._pressures = [p for p, _ in pts]
        self._bends = [b for _, b in pts]

    def __repr__(self) -> str:
        return f"CalibrationCurve({list(self.points)!r})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CalibrationCurve):
            return NotImplemented
        return self.points == other.points

    @property
    def max_pressure(self) -> float:
        return self._pressures[-1]

    @property
    def max_bend(self) -> float:
        return self._bends[-1]


def default_calibration() -> CalibrationCurve:
    """Two-anchor bench curve: zero and the measured 0.185 deg/mm maximum at 40 kPa."""
    return CalibrationCurve(
        [(0.0, 0.0), (40e3, units.deg_per_mm_to_rad_per_m(0.185))]
    )


def bend_from_pressure(curve: CalibrationCurve, p: float) -> float:
    """Bend per length (rad/m) at gauge pressure p; deflated pouches (p < 0) bend nothing."""
    if p <= 0.0:
        return 0.0
    ps, bs = curve._pressures, curve._bends
    if p >= ps[-1]:
        return bs[-1]
    i = bisect_right(ps, p)
    # ps[i-1] <= p < ps[i]; exact node hits return the node value
    if p == ps[i - 1]:
        return bs[i - 1]
    frac = (p - ps[i - 1]) / (ps[i] - ps[i - 1])
    return bs[i - 1] + frac * (bs[i] - bs[i - 1])


def pressure_from_bend(curve: CalibrationCurve, bend: float) -> float:
    """Smallest gauge pressure producing the given bend per length (rad/m)."""
    if bend < 0.0:
        raise ValueError(f"bend must be non-negative, got {bend}")
    if bend > curve.max_bend:
        raise InfeasibleBendError(
            f"bend {bend:.6g} rad/m exceeds curve maximum {curve.max_bend:.6g} rad/m"
        )
    if bend == 0.0:
        return 0.0
    ps, bs = curve._pressures, curve._bends
    # first index whose bend reaches the request: smallest pressure on plateaus
    lo, hi = 0, len(bs) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if bs[mid] >= bend:
            hi = mid
        else:
            lo = mid + 1
    if bs[lo] == bend:
        return ps[lo]
    frac = (bend - bs[lo - 1]) / (bs[lo] - bs[lo - 1])
    return ps[lo - 1] + frac * (ps[lo] - ps[lo - 1])


CSV_HEADER = ("pressure_kpa", "bend_deg_per_mm")


def load_calibration_csv(path: Union[str, Path]) -> CalibrationCurve:
    """Read a two-column calibration table (kPa, deg/mm) into an SI curve."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise ConfigError(
                f"calibration csv: expected header {','.join(CSV_HEADER)}"
            )
        points = []
        for row in reader:
            if not row:
                continue
            try:
                p_kpa, b_dpm = float(row[0]), float(row[1])
            except (ValueError, IndexError) as exc:
                raise ConfigError(f"calibration csv: bad row {row!r}") from exc
            points.append(
                (units.kpa_to_pa(p_kpa), units.deg_per_mm_to_rad_per_m(b_dpm))
            )
    return CalibrationCurve(points)


def save_calibration_csv_si(curve: CalibrationCurve, path: Union[str, Path]) -> None:
    """Write the curve as a normalized SI table (Pa, rad/m)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("pressure_pa", "bend_rad_per_m"))
        for p, b in curve.points:
            writer.writerow((f"{p:.6f}", f"{b:.9f}"))
