"""Planar simulator, calibration model and pressure planner for
multi-segment everting vine robots with valve-actuated pouches."""

from .errors import CommandError, ConfigError, InfeasibleBendError, VineSimError
from .growth import (
    Cell,
    Command,
    TipMountConfig,
    VineState,
    check_retraction_risk,
    initial_state,
    replay,
    shape,
    step,
)
from .kinematics import (
    PAPER_GEOMETRY,
    Backbone,
    PlanarPose,
    RobotGeometry,
    SegmentBend,
    chain_pose,
    fold_width,
    sample_backbone,
    segment_transform,
    theoretical_bend_per_length,
)
from .planner import (
    PathScore,
    PlanResult,
    PressureSchedule,
    ScheduleEntry,
    TargetPath,
    plan_pressures,
    predict_path,
    score_path,
)
from .pneumatics import (
    PAPER_VALVE,
    CalibrationCurve,
    ValveParams,
    ValveState,
    bend_from_pressure,
    default_calibration,
    pressure_from_bend,
    required_magnet_force,
    required_pretension,
    valve_step,
)

__version__ = "0.1.0"

__all__ = [
    "Backbone",
    "CalibrationCurve",
    "Cell",
    "Command",
    "CommandError",
    "ConfigError",
    "InfeasibleBendError",
    "PAPER_GEOMETRY",
    "PAPER_VALVE",
    "PathScore",
    "PlanResult",
    "PlanarPose",
    "PressureSchedule",
    "RobotGeometry",
    "ScheduleEntry",
    "SegmentBend",
    "TargetPath",
    "TipMountConfig",
    "ValveParams",
    "ValveState",
    "VineSimError",
    "VineState",
    "bend_from_pressure",
    "chain_pose",
    "check_retraction_risk",
    "default_calibration",
    "fold_width",
    "initial_state",
    "plan_pressures",
    "predict_path",
    "pressure_from_bend",
    "replay",
    "required_magnet_force",
    "required_pretension",
    "sample_backbone",
    "score_path",
    "segment_transform",
    "shape",
    "step",
    "theoretical_bend_per_length",
    "valve_step",
]
