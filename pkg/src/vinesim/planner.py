"""Forward path prediction and inverse pressure planning.

The inverse problem is solved as a constrained least-squares fit over one
signed bend per valve group (sign picks the actuated side, so the two
sides of a group are never pressurized together): projected coordinate
descent, each coordinate minimized by a bounded line search with the
interval endpoints checked explicitly, re-evaluating the densely sampled
backbone against the target polyline.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConfigError
from .growth import cell_bends
from .kinematics import LEFT, RIGHT, Backbone, RobotGeometry, chain_pose, sample_backbone
from .pneumatics import CalibrationCurve, pressure_from_bend

DEFAULT_POINTS_PER_SEGMENT = 16

# line-search resolution (rad); sweeps stop when a full sweep improves the
# objective by less than the tolerance; hard cap on coordinate iterations
_LINE_SEARCH_XATOL = 1e-9
_OBJECTIVE_TOL = 1e-6
_MAX_COORD_ITERS = 10_000
# outward objective slope (m^2/rad) below which a bound-riding group is
# reported as genuinely clamped rather than sitting at an exact optimum
_CLAMP_SLOPE_TOL = -1e-4


@dataclass(frozen=True)
class ScheduleEntry:
    group: int  # 1-based valve group id
    side: str
    pressure: float  # Pa gauge


@dataclass(frozen=True)
class PressureSchedule:
    """Commanded supply pressure per valve group and side."""

    entries: tuple[ScheduleEntry, ...]

    def __post_init__(self) -> None:
        seen = set()
        for e in self.entries:
            if e.side not in (LEFT, RIGHT):
                raise ConfigError(f"schedule: side must be left or right, got {e.side!r}")
            if e.group < 1:
                raise ConfigError(f"schedule: group ids are 1-based, got {e.group}")
            if e.pressure < 0:
                raise ConfigError(f"schedule: pressures must be >= 0 Pa, got {e.pressure}")
            key = (e.group, e.side)
            if key in seen:
                raise ConfigError(f"schedule: duplicate entry for group {e.group} {e.side}")
            seen.add(key)

    def pressure(self, group: int, side: str) -> float:
        for e in self.entries:
            if e.group == group and e.side == side:
                return e.pressure
        return 0.0

    def side_pressures(self, side: str) -> dict[int, float]:
        return {e.group: e.pressure for e in self.entries if e.side == side}

    @property
    def n_groups(self) -> int:
        return max((e.group for e in self.entries), default=0)


@dataclass(frozen=True)
class TargetPath:
    """Waypoints the tip should grow along, with an acceptance distance."""

    waypoints: tuple[tuple[float, float], ...]
    tolerance: float = 1e-3  # m

    def __post_init__(self) -> None:
        if len(self.waypoints) < 2:
            raise ConfigError("target: need at least two waypoints")
        for (x0, y0), (x1, y1) in zip(self.waypoints, self.waypoints[1:]):
            if x0 == x1 and y0 == y1:
                raise ConfigError("target: consecutive waypoints must be distinct")


@dataclass(frozen=True)
class PathScore:
    mean_error: float  # m
    max_error: float  # m
    tip_error: float  # m

    def __post_init__(self) -> None:
        if not 0.0 <= self.mean_error <= self.max_error:
            raise ValueError("path score must satisfy 0 <= mean <= max")


@dataclass(frozen=True)
class PlanResult:
    schedule: PressureSchedule
    score: PathScore
    saturated_groups: tuple[int, ...]
    clamped: bool  # true when a saturated group would keep improving past the bound
    objective_trace: tuple[float, ...]

    @property
    def feasible(self) -> bool:
        return not self.clamped


def _effective_geometry(geometry: RobotGeometry, length_correction: float) -> RobotGeometry:
    if length_correction == 1.0:
        return geometry
    if length_correction <= 0:
        raise ConfigError("length correction must be positive")
    return replace(geometry, l_cpam=geometry.l_cpam * length_correction)


def predict_path(
    schedule: PressureSchedule,
    geometry: RobotGeometry,
    calibration: CalibrationCurve,
    n_groups: Optional[int] = None,
    length_correction: float = 1.0,
) -> Backbone:
    """Backbone the robot grows into under a schedule applied at full eversion.

    Uses the same per-cell bend construction as the growth engine, so the
    result matches the simulated shape exactly.
    """
    geom = _effective_geometry(geometry, length_correction)
    groups = geom.n_groups if n_groups is None else n_groups
    bends = cell_bends(
        schedule.side_pressures(LEFT),
        schedule.side_pressures(RIGHT),
        geom,
        calibration,
        n_cells=groups * geom.cpams_per_valve,
    )
    return chain_pose(bends, geom)


def _as_polyline(reference: Union[Backbone, TargetPath], points_per_segment: int) -> np.ndarray:
    if isinstance(reference, TargetPath):
        return np.asarray(reference.waypoints, dtype=float)
    if reference.samples is not None:
        return np.asarray(reference.samples, dtype=float)
    if not reference.segments:
        return np.array([[p.x, p.y] for p in reference.poses])
    return sample_backbone(reference, points_per_segment)


def _min_dist2(points: np.ndarray, polyline: np.ndarray) -> np.ndarray:
    """Squared distance from each point to the nearest polyline segment."""
    if len(polyline) == 1:
        off = points - polyline[0]
        return (off * off).sum(axis=1)
    a = polyline[:-1]
    d = polyline[1:] - a
    len2 = (d * d).sum(axis=1)
    rel = points[:, None, :] - a[None, :, :]
    t = np.clip((rel * d[None, :, :]).sum(axis=2) / len2[None, :], 0.0, 1.0)
    off = rel - t[:, :, None] * d[None, :, :]
    return (off * off).sum(axis=2).min(axis=1)


def score_path(
    predicted: Backbone,
    reference: Union[Backbone, TargetPath],
    points_per_segment: int = DEFAULT_POINTS_PER_SEGMENT,
) -> PathScore:
    """Mean/max point-to-polyline distance of the predicted backbone, plus tip error."""
    pred_pts = (
        np.asarray(predicted.samples, dtype=float)
        if predicted.samples is not None
        else sample_backbone(predicted, points_per_segment)
        if predicted.segments
        else np.array([[p.x, p.y] for p in predicted.poses])
    )
    ref_poly = _as_polyline(reference, points_per_segment)
    dists = np.sqrt(_min_dist2(pred_pts, ref_poly))
    tip = np.hypot(pred_pts[-1, 0] - ref_poly[-1, 0], pred_pts[-1, 1] - ref_poly[-1, 1])
    max_error = float(dists.max())
    return PathScore(
        mean_error=min(float(dists.mean()), max_error),
        max_error=max_error,
        tip_error=float(tip),
    )


def _line_minimum(f, lo: float, hi: float):
    """Bounded 1-D minimization; returns (best_x, best_f).

    Both interval endpoints are evaluated explicitly, so optima sitting
    exactly on a bound (saturated groups) are recovered exactly.
    """
    res = minimize_scalar(
        f, bounds=(lo, hi), method="bounded",
        options={"xatol": _LINE_SEARCH_XATOL, "maxiter": 200},
    )
    best_x, best_f = float(res.x), float(res.fun)
    for x in (lo, hi):
        fx = f(x)
        if fx < best_f:
            best_x, best_f = x, fx
    return best_x, best_f


class _PolylineDistance:
    """Reusable squared point-to-polyline distance against a fixed polyline.

    Works on split x/y components to keep the broadcast temporaries small;
    this sits in the planner's innermost loop.
    """

    def __init__(self, polyline: np.ndarray):
        self.polyline = polyline
        if len(polyline) > 1:
            a = polyline[:-1]
            d = polyline[1:] - a
            self.ax, self.ay = a[:, 0], a[:, 1]
            self.dx, self.dy = d[:, 0], d[:, 1]
            self.inv_len2 = 1.0 / (self.dx * self.dx + self.dy * self.dy)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        if len(self.polyline) == 1:
            off = points - self.polyline[0]
            return (off * off).sum(axis=1)
        relx = points[:, 0, None] - self.ax[None, :]
        rely = points[:, 1, None] - self.ay[None, :]
        t = (relx * self.dx[None, :] + rely * self.dy[None, :]) * self.inv_len2[None, :]
        np.clip(t, 0.0, 1.0, out=t)
        offx = relx - t * self.dx[None, :]
        offy = rely - t * self.dy[None, :]
        return (offx * offx + offy * offy).min(axis=1)


def _dense_cell_samples(q: np.ndarray, l: float, d: float, pps: int) -> np.ndarray:
    """Vectorized equivalent of chain_pose + sample_backbone for the solver loop."""
    n = len(q)
    t = np.arange(1, pps + 1) / pps
    angles = q[:, None] * t[None, :]
    lengths = l * t
    tiny = np.abs(angles) < 1e-9
    safe = np.where(tiny, 1.0, angles)
    ax = np.where(tiny, lengths[None, :], lengths[None, :] / safe * np.sin(angles))
    ay = np.where(tiny, 0.0, lengths[None, :] / safe * (1.0 - np.cos(angles)))
    # lateral offset conjugation; straight segments carry no offset at all
    h = np.where(np.abs(q) < 1e-9, 0.0, np.where(q >= 0.0, 0.5 * d, -0.5 * d))[:, None]
    tx = ax + h * np.sin(angles)
    ty = h + ay - h * np.cos(angles)
    theta0 = np.concatenate(([0.0], np.cumsum(q)[:-1]))
    c, s = np.cos(theta0)[:, None], np.sin(theta0)[:, None]
    wx = c * tx - s * ty
    wy = s * tx + c * ty
    ox = np.concatenate(([0.0], np.cumsum(wx[:, -1])[:-1]))
    oy = np.concatenate(([0.0], np.cumsum(wy[:, -1])[:-1]))
    pts = np.empty((n * pps + 1, 2))
    pts[0] = 0.0
    pts[1:, 0] = (ox[:, None] + wx).ravel()
    pts[1:, 1] = (oy[:, None] + wy).ravel()
    return pts


def _heading_fit_bends(
    target_poly: np.ndarray, groups: int, span: float, cpv: int, q_max: float
) -> np.ndarray:
    """Initial per-group bends from the target's heading change over each group's span."""
    d = np.diff(target_poly, axis=0)
    headings = np.unwrap(np.arctan2(d[:, 1], d[:, 0]))
    cum = np.concatenate(([0.0], np.cumsum(np.hypot(d[:, 0], d[:, 1]))))
    total = cum[-1]

    def heading_at(s: float) -> float:
        if s <= 0.0:
            return headings[0]
        if s >= total:
            return headings[-1]
        return headings[min(int(np.searchsorted(cum[1:], s)), len(headings) - 1)]

    bends = np.zeros(groups)
    for g in range(groups):
        dq = heading_at((g + 1) * span) - heading_at(g * span)
        bends[g] = min(q_max, max(-q_max, dq / cpv))
    return bends


def _bends_to_schedule(
    group_bends: np.ndarray,
    geom: RobotGeometry,
    calibration: CalibrationCurve,
) -> PressureSchedule:
    entries = []
    for g, b in enumerate(group_bends, start=1):
        bend_per_len = min(abs(b) / geom.l_cpam, calibration.max_bend)
        p = pressure_from_bend(calibration, bend_per_len)
        left = p if b > 0 else 0.0
        right = p if b < 0 else 0.0
        entries.append(ScheduleEntry(group=g, side=LEFT, pressure=left))
        entries.append(ScheduleEntry(group=g, side=RIGHT, pressure=right))
    return PressureSchedule(entries=tuple(entries))


def plan_pressures(
    target: TargetPath,
    geometry: RobotGeometry,
    calibration: CalibrationCurve,
    n_groups: Optional[int] = None,
    points_per_segment: int = DEFAULT_POINTS_PER_SEGMENT,
    length_correction: float = 1.0,
) -> PlanResult:
    """Solve for the pressure schedule steering the backbone along the target.

    Minimizes the summed squared distances from densely sampled backbone
    points to the target polyline over one signed bend per group, each
    projected onto the calibration curve's feasible range.  Deterministic.
    """
    geom = _effective_geometry(geometry, length_correction)
    groups = geom.n_groups if n_groups is None else n_groups
    if groups < 1:
        raise ConfigError("planner: n_groups must be >= 1")
    q_max = calibration.max_bend * geom.l_cpam
    target_poly = np.asarray(target.waypoints, dtype=float)
    dist2 = _PolylineDistance(target_poly)

    cpv = geom.cpams_per_valve

    def objective(group_bends: np.ndarray) -> float:
        cells = np.repeat(group_bends, cpv)
        pts = _dense_cell_samples(cells, geom.l_cpam, geom.d_vine, points_per_segment)
        return float(dist2(pts).sum())

    # start from all-straight unless the target's own headings fit better;
    # a straight target therefore stays at exactly zero
    bends = np.zeros(groups)
    seed = _heading_fit_bends(target_poly, groups, geom.group_span, cpv, q_max)
    j_zero, j_seed = objective(bends), objective(seed)
    if j_seed < j_zero:
        bends = seed
        trace = [j_seed]
    else:
        trace = [j_zero]

    iters = 0
    sweep = 0
    while iters < _MAX_COORD_ITERS:
        start = trace[-1]
        # alternating sweep direction damps the zigzag of chain-coupled bends
        order = range(groups) if sweep % 2 == 0 else range(groups - 1, -1, -1)
        sweep += 1
        for g in order:
            if iters >= _MAX_COORD_ITERS:
                break
            iters += 1

            def f(v: float, _g: int = g) -> float:
                trial = bends.copy()
                trial[_g] = v
                return objective(trial)

            x, fx = _line_minimum(f, -q_max, q_max)
            if fx < trace[-1]:
                bends[g] = x
                trace.append(fx)
            else:
                trace.append(trace[-1])
        if start - trace[-1] < _OBJECTIVE_TOL:
            break

    saturated = tuple(
        g + 1 for g in range(groups) if q_max - abs(bends[g]) <= _LINE_SEARCH_XATOL
    )
    clamped = False
    for g in (s - 1 for s in saturated):
        delta = 1e-6
        inner = bends.copy()
        inner[g] = math.copysign(q_max - delta, bends[g])
        slope = (trace[-1] - objective(inner)) / delta
        if slope < _CLAMP_SLOPE_TOL:
            clamped = True

    schedule = _bends_to_schedule(bends, geom, calibration)
    predicted = predict_path(
        schedule, geometry, calibration, n_groups=groups, length_correction=length_correction
    )
    score = score_path(predicted, target, points_per_segment)
    return PlanResult(
        schedule=schedule,
        score=score,
        saturated_groups=saturated,
        clamped=clamped,
        objective_trace=tuple(trace),
    )


# --- file formats ------------------------------------------------------------

SCHEDULE_HEADER = ("group_id", "side", "pressure_kpa")
TARGET_HEADER = ("x_mm", "y_mm")


def write_schedule_csv(schedule: PressureSchedule, path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SCHEDULE_HEADER)
        for e in schedule.entries:
            writer.writerow((e.group, e.side, f"{e.pressure * 1e-3:.6f}"))


def read_schedule_csv(path: Union[str, Path]) -> PressureSchedule:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != SCHEDULE_HEADER:
            raise ConfigError(f"schedule csv: expected header {','.join(SCHEDULE_HEADER)}")
        entries = []
        for row in reader:
            if not row:
                continue
            entries.append(
                ScheduleEntry(group=int(row[0]), side=row[1].strip(), pressure=float(row[2]) * 1e3)
            )
    return PressureSchedule(entries=tuple(entries))


def read_target_csv(path: Union[str, Path], tolerance: float = 1e-3) -> TargetPath:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TARGET_HEADER:
            raise ConfigError(f"target csv: expected header {','.join(TARGET_HEADER)}")
        waypoints = []
        for row in reader:
            if not row:
                continue
            waypoints.append((float(row[0]) * 1e-3, float(row[1]) * 1e-3))
    return TargetPath(waypoints=tuple(waypoints), tolerance=tolerance)


def format_score(score: PathScore) -> str:
    """One-line structured record of a path score, in mm."""
    return (
        f"score mean_mm={score.mean_error * 1e3:.3f} "
        f"max_mm={score.max_error * 1e3:.3f} "
        f"tip_mm={score.tip_error * 1e3:.3f}"
    )
