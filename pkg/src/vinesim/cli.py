"""Batch entry point: simulate scenarios, plan pressures, serve, check calibrations.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 infeasible plan
(the plan is still written).
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from . import units
from .config import Scenario, SimConfig, load_config, load_scenario, parse_scenario
from .errors import VineSimError
from .growth import LEFT, RIGHT, VineState, check_retraction_risk, replay, shape, write_command_log
from .kinematics import Backbone
from .planner import (
    format_score,
    plan_pressures,
    read_target_csv,
    write_schedule_csv,
)
from .pneumatics import (
    CalibrationCurve,
    load_calibration_csv,
    save_calibration_csv_si,
)
from .service import ADDR_ENV_VAR, DEFAULT_ADDR, parse_addr, run_server

BUNDLED_SCENARIOS = ("fig9a", "fig9b", "fig9c")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_INFEASIBLE = 3


def _resolve_scenario(ref: str) -> Scenario:
    path = Path(ref)
    if path.exists():
        return load_scenario(path)
    if ref in BUNDLED_SCENARIOS:
        doc = json.loads(
            resources.files("vinesim").joinpath(f"scenarios/{ref}.json").read_text()
        )
        return parse_scenario(doc)
    raise FileNotFoundError(f"scenario {ref!r} is neither a file nor a bundled name {BUNDLED_SCENARIOS}")


def _write_trace(states: Sequence[VineState], scenario: Scenario, path: Path) -> None:
    config = scenario.config
    groups = range(1, config.geometry.n_groups + 1)
    header = ["t_s", "everted_mm", "mode", "supply_left_kpa", "supply_right_kpa"]
    header += [f"L{g}_kpa" for g in groups] + [f"R{g}_kpa" for g in groups]
    header.append("warnings")

    k = config.ticks_per_frame
    rows = list(range(k, len(states), k))
    if rows and rows[-1] != len(states) - 1:
        rows.append(len(states) - 1)
    elif not rows and len(states) > 1:
        rows.append(len(states) - 1)

    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i in rows:
            state = states[i]
            warnings = list(state.warnings)
            for risk in check_retraction_risk(state, config.geometry):
                warnings.append(f"retraction_risk {risk.side}:{risk.group}")
            cells = [
                f"{state.time:.6f}",
                f"{units.m_to_mm(state.everted_length):.6f}",
                state.mode,
                f"{units.pa_to_kpa(state.supply_left):.6f}",
                f"{units.pa_to_kpa(state.supply_right):.6f}",
            ]
            cells += [
                f"{units.pa_to_kpa(state.valves[(LEFT, g)].held_pressure):.6f}" for g in groups
            ]
            cells += [
                f"{units.pa_to_kpa(state.valves[(RIGHT, g)].held_pressure):.6f}" for g in groups
            ]
            cells.append(";".join(warnings))
            fh.write(",".join(cells) + "\n")


def _write_backbone(backbone: Backbone, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("s_mm,x_mm,y_mm,theta_deg\n")
        s = 0.0
        fh.write("0.000000,0.000000,0.000000,0.000000\n")
        for (bend, _side), pose in zip(backbone.segments, backbone.poses[1:]):
            s += bend.l
            fh.write(
                f"{units.m_to_mm(s):.6f},{units.m_to_mm(pose.x):.6f},"
                f"{units.m_to_mm(pose.y):.6f},{units.rad_to_deg(pose.theta):.6f}\n"
            )


def _cmd_simulate(args: argparse.Namespace) -> int:
    scenario = _resolve_scenario(args.scenario)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    config = scenario.config
    states = replay(
        list(scenario.records), scenario.duration, config.dt,
        config.geometry, config.valve, config.tip,
    )
    final = states[-1]
    _write_trace(states, scenario, out_dir / "trace.csv")
    _write_backbone(shape(final, config.geometry, config.calibration), out_dir / "backbone.csv")
    write_command_log(scenario.records, out_dir / "command_log.csv")
    print(
        f"{scenario.name}: {len(states) - 1} steps, "
        f"everted {units.m_to_mm(final.everted_length):.1f} mm, outputs in {out_dir}"
    )
    return EXIT_OK


def _cmd_plan(args: argparse.Namespace) -> int:
    config = load_config(args.config) if args.config else SimConfig()
    target = read_target_csv(args.target)
    result = plan_pressures(
        target,
        config.geometry,
        config.calibration,
        n_groups=args.groups,
        length_correction=args.length_correction,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_schedule_csv(result.schedule, out_dir / "schedule.csv")
    score_line = format_score(result.score)
    (out_dir / "score.txt").write_text(score_line + "\n")
    print(score_line)
    if result.clamped:
        groups = ", ".join(str(g) for g in result.saturated_groups)
        print(
            f"infeasible target: curvature beyond saturation; clamped groups: {groups}",
            file=sys.stderr,
        )
        return EXIT_INFEASIBLE
    if result.saturated_groups:
        groups = ", ".join(str(g) for g in result.saturated_groups)
        print(f"note: groups at saturation pressure: {groups}")
    return EXIT_OK


def resolve_addr(flag: Optional[str], config_addr: Optional[str]) -> str:
    """Listen address precedence: command line > environment > config file > default."""
    return flag or os.environ.get(ADDR_ENV_VAR) or config_addr or DEFAULT_ADDR


def _cmd_serve(args: argparse.Namespace) -> int:
    config_addr = None
    if args.config:
        load_config(args.config)  # fail fast on a bad config file
        with open(args.config) as fh:
            config_addr = json.load(fh).get("addr")
    addr = resolve_addr(args.addr, config_addr)
    host, port = parse_addr(addr)

    def announce(bound: tuple[str, int]) -> None:
        print(f"listening on {bound[0]}:{bound[1]}", flush=True)

    try:
        asyncio.run(run_server(host, port, ready=announce))
    except KeyboardInterrupt:
        print("shutting down")
    return EXIT_OK


def _cmd_calibrate(args: argparse.Namespace) -> int:
    if args.anchor_origin:
        import csv as _csv

        with open(args.table, newline="") as fh:
            rows = list(_csv.reader(fh))
        points = [(float(p) * 1e3, units.deg_per_mm_to_rad_per_m(float(b))) for p, b in rows[1:] if p]
        if not points or points[0] != (0.0, 0.0):
            points.insert(0, (0.0, 0.0))
        curve = CalibrationCurve(points)
    else:
        curve = load_calibration_csv(args.table)
    out = Path(args.out) if args.out else Path(args.table).with_name(Path(args.table).stem + "_si.csv")
    save_calibration_csv_si(curve, out)
    print(
        f"calibration ok: {len(curve.points)} points, "
        f"max {units.pa_to_kpa(curve.max_pressure):.1f} kPa -> "
        f"{units.rad_per_m_to_deg_per_mm(curve.max_bend):.4f} deg/mm; wrote {out}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vinesim",
        description="Multi-segment everting vine robot simulator, planner and steering service.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a scenario file or bundled name (fig9a/fig9b/fig9c)")
    p_sim.add_argument("scenario", help="scenario JSON path or bundled scenario name")
    p_sim.add_argument("-o", "--out-dir", default="out", help="output directory (default: out)")
    p_sim.set_defaults(func=_cmd_simulate)

    p_plan = sub.add_parser("plan", help="plan a pressure schedule for a target path CSV")
    p_plan.add_argument("target", help="target CSV with header x_mm,y_mm")
    p_plan.add_argument("--config", help="config JSON file")
    p_plan.add_argument("--groups", type=int, default=None, help="number of valve groups to plan over")
    p_plan.add_argument(
        "--length-correction", type=float, default=1.0,
        help="scale on the modeled pouch length (default 1.0)",
    )
    p_plan.add_argument("-o", "--out-dir", default="out", help="output directory (default: out)")
    p_plan.set_defaults(func=_cmd_plan)

    p_serve = sub.add_parser("serve", help="run the steering service")
    p_serve.add_argument(
        "--addr",
        help=f"listen address host:port (default: ${ADDR_ENV_VAR} or {DEFAULT_ADDR})",
    )
    p_serve.add_argument("--config", help="config JSON checked at startup")
    p_serve.set_defaults(func=_cmd_serve)

    p_cal = sub.add_parser("calibrate", help="validate a calibration CSV and re-emit it in SI units")
    p_cal.add_argument("table", help="CSV with header pressure_kpa,bend_deg_per_mm")
    p_cal.add_argument("-o", "--out", help="output SI CSV path")
    p_cal.add_argument(
        "--anchor-origin", action="store_true",
        help="prepend the (0, 0) anchor if the table does not start there",
    )
    p_cal.set_defaults(func=_cmd_calibrate)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (VineSimError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
