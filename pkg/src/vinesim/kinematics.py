"""Pouch fold geometry and the offset piecewise-constant-curvature chain.

Every inflated pouch bends its robot segment into a circular arc whose
constant-length fiber is the unactuated side of the body, not the center
line.  A segment transform is therefore a lateral offset onto that fiber,
the arc itself, and the offset back:  T = T_offset * T_arc * T_offset^-1.

Conventions: growth along +x from the base, positive bend q toward +y
("left").  All lengths in m, angles in rad.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError

LEFT = "left"
RIGHT = "right"
SIDES = (LEFT, RIGHT)

# Below this |q| a segment is treated as exactly straight: analytic branch,
# not an epsilon fudge on the arc formula.
STRAIGHT_Q_EPS = 1e-9


def _check_side(side: str) -> None:
    if side not in SIDES:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")


@dataclass(frozen=True)
class RobotGeometry:
    """Static dimensions of the vine robot and its pouch layout."""

    d_vine: float  # vine tube diameter (m)
    l_cpam: float  # deflated pouch length along the body (m)
    w_cpam: float  # pouch width across the body (m)
    f_cpam: float  # side fold width (m)
    cells_per_side: int
    cpams_per_valve: int

    def __post_init__(self) -> None:
        for name in ("d_vine", "l_cpam", "w_cpam", "f_cpam"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"geometry: {name} must be strictly positive")
        if 2.0 * self.f_cpam > self.w_cpam:
            raise ConfigError(
                "geometry: fold constraint 2*f_cpam <= w_cpam violated "
                f"(2*{self.f_cpam} > {self.w_cpam})"
            )
        if self.cells_per_side < 1 or self.cpams_per_valve < 1:
            raise ConfigError("geometry: cells_per_side and cpams_per_valve must be >= 1")
        if self.cells_per_side % self.cpams_per_valve != 0:
            raise ConfigError(
                "geometry: cells_per_side must be an integer multiple of cpams_per_valve "
                f"({self.cells_per_side} % {self.cpams_per_valve} != 0)"
            )

    @property
    def n_groups(self) -> int:
        """Valve groups per side."""
        return self.cells_per_side // self.cpams_per_valve

    @property
    def group_span(self) -> float:
        """Arc length covered by one valve group (m)."""
        return self.cpams_per_valve * self.l_cpam

    @property
    def total_length(self) -> float:
        """Full everted length of the pouched body (m)."""
        return self.cells_per_side * self.l_cpam


#: Bench prototype dimensions: 80 mm tube, 40 mm pouches with 10 mm folds,
#: eight pouches per side, paired two to a valve.
PAPER_GEOMETRY = RobotGeometry(
    d_vine=0.080,
    l_cpam=0.040,
    w_cpam=0.040,
    f_cpam=0.010,
    cells_per_side=8,
    cpams_per_valve=2,
)


@dataclass(frozen=True)
class SegmentBend:
    """One segment's bend angle q and unactuated-side length l."""

    q: float  # signed bend (rad), positive toward +y
    l: float  # unactuated-side segment length (m)

    def __post_init__(self) -> None:
        if not abs(self.q) < math.pi:
            raise ValueError(f"segment bend |q| must stay below pi, got {self.q}")
        if self.l <= 0:
            raise ValueError(f"segment length must be positive, got {self.l}")


def normalize_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]; values already in range pass through bit-identically."""
    if -math.pi < theta <= math.pi:
        return theta
    theta = math.fmod(theta, 2.0 * math.pi)
    if theta <= -math.pi:
        theta += 2.0 * math.pi
    elif theta > math.pi:
        theta -= 2.0 * math.pi
    return theta


@dataclass(frozen=True)
class PlanarPose:
    x: float
    y: float
    theta: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    def as_matrix(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, -s, self.x], [s, c, self.y], [0.0, 0.0, 1.0]])


IDENTITY_POSE = PlanarPose(0.0, 0.0, 0.0)


@dataclass(frozen=True, eq=False)
class Backbone:
    """Boundary poses of the backbone, base first, plus the segments that built it."""

    poses: tuple[PlanarPose, ...]
    segments: tuple[tuple[SegmentBend, str], ...]
    d_vine: float
    samples: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if not self.poses or self.poses[0] != IDENTITY_POSE:
            raise ValueError("backbone must start at the identity pose")
        if len(self.poses) != len(self.segments) + 1:
            raise ValueError("backbone needs one boundary pose per segment plus the base")

    def __eq__(self, other: object) -> bool:
        # samples are derived data and excluded from equality
        if not isinstance(other, Backbone):
            return NotImplemented
        return (
            self.poses == other.poses
            and self.segments == other.segments
            and self.d_vine == other.d_vine
        )

    @property
    def tip(self) -> PlanarPose:
        return self.poses[-1]

    @property
    def arc_length(self) -> float:
        """Total unactuated-side length (m)."""
        return sum(bend.l for bend, _ in self.segments)


def fold_width(l_cpam: float) -> float:
    """Side fold width that lets a pouch of deflated length l_cpam inflate to a full cylinder.

    The fold forms the ground radius of the inflated cylinder: f = l_cpam / pi.
    """
    if l_cpam <= 0:
        raise ValueError(f"l_cpam must be positive, got {l_cpam}")
    return l_cpam / math.pi


def theoretical_bend_per_length(epsilon: float, d_vine: float) -> float:
    """Ideal bend per unit length (rad/m) for a pouch contracting one side by epsilon.

    A contraction ratio epsilon of the actuated fiber on a tube of diameter
    d_vine yields epsilon / d_vine radians per meter.
    """
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"contraction epsilon must lie in [0, 1), got {epsilon}")
    if d_vine <= 0:
        raise ValueError(f"d_vine must be positive, got {d_vine}")
    return epsilon / d_vine


def _lateral_offset(side: str, d_vine: float) -> float:
    _check_side(side)
    return 0.5 * d_vine if side == LEFT else -0.5 * d_vine


def _arc_translation(q: float, l: float) -> tuple[float, float]:
    """Translation of the constant-curvature arc of angle q and fiber length l."""
    if abs(q) < STRAIGHT_Q_EPS:
        return l, 0.0
    half = 0.5 * q
    chord = (l / half) * math.sin(half)
    return chord * math.cos(half), chord * math.sin(half)


def _segment_translation(q: float, l: float, d_vine: float, side: str) -> tuple[float, float]:
    """Translation column of the full offset-arc-offset segment transform."""
    if abs(q) < STRAIGHT_Q_EPS:
        # the two lateral offsets cancel exactly on a straight segment
        return l, 0.0
    h = _lateral_offset(side, d_vine)
    tx, ty = _arc_translation(q, l)
    return tx + h * math.sin(q), h + ty - h * math.cos(q)


def segment_transform(bend: SegmentBend, d_vine: float, side: str) -> np.ndarray:
    """Planar homogeneous transform across one bent segment.

    Composes the lateral offset onto the unactuated fiber, the
    constant-curvature arc, and the offset back.  For the right side the
    offsets and the natural bend sign are mirrored about the x axis.
    At q = 0 this is the pure translation (l, 0).
    """
    tx, ty = _segment_translation(bend.q, bend.l, d_vine, side)
    c, s = math.cos(bend.q), math.sin(bend.q)
    return np.array([[c, -s, tx], [s, c, ty], [0.0, 0.0, 1.0]])


def chain_pose(
    bends: Sequence[tuple[SegmentBend, str]],
    geometry: RobotGeometry,
) -> Backbone:
    """Compose segment transforms left to right into boundary poses.

    The heading is accumulated additively (the offsets carry no rotation),
    so the final theta equals the signed sum of all q values exactly.
    """
    poses = [IDENTITY_POSE]
    x, y, theta = 0.0, 0.0, 0.0
    for bend, side in bends:
        tx, ty = _segment_translation(bend.q, bend.l, geometry.d_vine, side)
        c, s = math.cos(theta), math.sin(theta)
        x = x + (c * tx - s * ty)
        y = y + (s * tx + c * ty)
        theta = theta + bend.q
        poses.append(PlanarPose(x, y, theta))
    return Backbone(poses=tuple(poses), segments=tuple((b, s) for b, s in bends), d_vine=geometry.d_vine)


def sample_backbone(backbone: Backbone, points_per_segment: int) -> np.ndarray:
    """Densely sample the backbone as an (N, 2) polyline.

    Each segment is interpolated along its arc (the offset conjugation makes
    the sampled curve an arc of radius l/q + d_vine/2 about the displaced
    center); endpoints coincide with the chain's boundary poses exactly.
    """
    if points_per_segment < 1:
        raise ValueError("points_per_segment must be >= 1")
    pts = [(0.0, 0.0)]
    theta = 0.0  # raw running heading, same accumulation as chain_pose
    for (bend, side), pose in zip(backbone.segments, backbone.poses[:-1]):
        c, s = math.cos(theta), math.sin(theta)
        for j in range(1, points_per_segment + 1):
            t = j / points_per_segment
            tx, ty = _segment_translation(bend.q * t, bend.l * t, backbone.d_vine, side)
            pts.append((pose.x + (c * tx - s * ty), pose.y + (s * tx + c * ty)))
        theta = theta + bend.q
    return np.array(pts, dtype=float)
