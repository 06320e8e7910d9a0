"""Session-based streaming service.

One WebSocket connection can create any number of simulation sessions.
Each session runs its own tick loop that owns the state; commands arrive
through a queue and apply atomically at the next tick; frames are pushed
to the creating connection with latest-wins conflation so a slow consumer
never sees stale backlog and the tick loop never blocks.

All messages are UTF-8 JSON with a "type" field in
{create, command, frame, ack, error, close}.
"""

from __future__ import annotations

import asyncio
import json
import uuid
from dataclasses import dataclass
from typing import Optional

from websockets.asyncio.server import serve

from . import units
from .config import SimConfig, parse_config
from .errors import CommandError, ConfigError, VineSimError
from .growth import (
    LEFT,
    RIGHT,
    Command,
    LogRecord,
    VineState,
    check_retraction_risk,
    initial_state,
    shape,
    step,
)
from .kinematics import sample_backbone

DEFAULT_ADDR = "127.0.0.1:8765"
ADDR_ENV_VAR = "VINESIM_ADDR"


@dataclass(frozen=True)
class StateFrame:
    """Snapshot streamed to clients; units at this boundary are mm/kPa."""

    time: float  # s
    everted_length: float  # m
    mode: str
    supply_left: float  # Pa
    supply_right: float  # Pa
    pouches: tuple[tuple[int, str, float], ...]  # (group, side, Pa)
    backbone_mm: tuple[tuple[float, float], ...]
    warnings: tuple[str, ...]


def build_frame(state: VineState, config: SimConfig) -> StateFrame:
    backbone = shape(state, config.geometry, config.calibration)
    samples = sample_backbone(backbone, config.points_per_segment)
    pouches = []
    for group in range(1, config.geometry.n_groups + 1):
        for side in (LEFT, RIGHT):
            pouches.append((group, side, state.valves[(side, group)].held_pressure))
    warnings = list(state.warnings)
    for risk in check_retraction_risk(state, config.geometry):
        warnings.append(
            f"retraction_risk {risk.side}:{risk.group} cell {risk.cell_index} "
            f"at {units.pa_to_kpa(risk.held_pressure):.1f} kPa"
        )
    return StateFrame(
        time=state.time,
        everted_length=state.everted_length,
        mode=state.mode,
        supply_left=state.supply_left,
        supply_right=state.supply_right,
        pouches=tuple(pouches),
        backbone_mm=tuple((units.m_to_mm(x), units.m_to_mm(y)) for x, y in samples),
        warnings=tuple(warnings),
    )


def frame_message(frame: StateFrame, session_id: str) -> dict:
    return {
        "type": "frame",
        "session": session_id,
        "t_s": frame.time,
        "everted_mm": units.m_to_mm(frame.everted_length),
        "mode": frame.mode,
        "supply_left_kpa": units.pa_to_kpa(frame.supply_left),
        "supply_right_kpa": units.pa_to_kpa(frame.supply_right),
        "backbone_mm": [[x, y] for x, y in frame.backbone_mm],
        "pouches": [
            {"group": g, "side": s, "kpa": units.pa_to_kpa(p)}
            for g, s, p in frame.pouches
        ],
        "warnings": list(frame.warnings),
    }


def command_from_message(msg: dict) -> Command:
    def pressure(key: str) -> Optional[float]:
        return None if msg.get(key) is None else units.kpa_to_pa(float(msg[key]))

    speed = msg.get("speed_mm_s")
    return Command(
        set_mode=msg.get("mode"),
        set_supply_left=pressure("supply_left_kpa"),
        set_supply_right=pressure("supply_right_kpa"),
        set_speed=None if speed is None else float(speed) * 1e-3,
    )


class _Outbox:
    """Latest-wins frame slot for one consumer."""

    def __init__(self) -> None:
        self.latest: Optional[dict] = None
        self.closed = False
        self.event = asyncio.Event()

    def push(self, message: dict) -> None:
        self.latest = message
        self.event.set()

    def close(self) -> None:
        self.closed = True
        self.event.set()


class Session:
    def __init__(self, session_id: str, config: SimConfig):
        self.id = session_id
        self.config = config
        self.state = initial_state(config.geometry, config.tip)
        self.commands: asyncio.Queue[Command] = asyncio.Queue()
        self.outboxes: list[_Outbox] = []
        self.applied_log: list[LogRecord] = []
        self.task: Optional[asyncio.Task] = None
        self.tick = 0

    @property
    def next_apply_time(self) -> float:
        return self.state.time + self.config.dt

    async def run(self) -> None:
        dt = self.config.dt
        loop = asyncio.get_running_loop()
        deadline = loop.time()
        try:
            while True:
                deadline += dt
                delay = deadline - loop.time()
                if delay > 0:
                    await asyncio.sleep(delay)
                cmd = self._drain_commands()
                self.state = step(
                    self.state, dt, cmd,
                    self.config.geometry, self.config.valve, self.config.tip,
                )
                self.tick += 1
                if cmd != Command():
                    self.applied_log.append(
                        LogRecord(
                            t=self.state.time - dt,
                            mode=self.state.mode,
                            supply_left=self.state.supply_left,
                            supply_right=self.state.supply_right,
                            speed=self.state.speed,
                        )
                    )
                if self.tick % self.config.ticks_per_frame == 0:
                    message = frame_message(build_frame(self.state, self.config), self.id)
                    for outbox in self.outboxes:
                        outbox.push(message)
        except asyncio.CancelledError:
            raise
        finally:
            for outbox in self.outboxes:
                outbox.close()

    def _drain_commands(self) -> Command:
        # commands only set fields, so applying a batch in arrival order
        # equals a single merged command; each command stays atomic
        merged = Command()
        while not self.commands.empty():
            cmd = self.commands.get_nowait()
            merged = Command(
                set_mode=cmd.set_mode if cmd.set_mode is not None else merged.set_mode,
                set_supply_left=(
                    cmd.set_supply_left if cmd.set_supply_left is not None else merged.set_supply_left
                ),
                set_supply_right=(
                    cmd.set_supply_right if cmd.set_supply_right is not None else merged.set_supply_right
                ),
                set_speed=cmd.set_speed if cmd.set_speed is not None else merged.set_speed,
            )
        return merged

    def close(self) -> None:
        if self.task is not None:
            self.task.cancel()


class VineServer:
    """WebSocket front end over per-session tick loops."""

    def __init__(self) -> None:
        self.sessions: dict[str, Session] = {}
        self._server = None

    async def start(self, host: str, port: int) -> tuple[str, int]:
        self._server = await serve(self._handler, host, port)
        sock = next(iter(self._server.sockets))
        bound = sock.getsockname()
        return bound[0], bound[1]

    async def stop(self) -> None:
        for session in list(self.sessions.values()):
            session.close()
        self.sessions.clear()
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()

    async def _handler(self, connection) -> None:
        owned: list[str] = []
        senders: list[asyncio.Task] = []
        try:
            async for raw in connection:
                reply = await self._dispatch(raw, connection, owned, senders)
                if reply is not None:
                    await connection.send(json.dumps(reply))
        finally:
            for task in senders:
                task.cancel()
            for session_id in owned:
                session = self.sessions.pop(session_id, None)
                if session is not None:
                    session.close()

    async def _dispatch(self, raw, connection, owned, senders) -> Optional[dict]:
        try:
            msg = json.loads(raw)
        except (json.JSONDecodeError, UnicodeDecodeError):
            return {"type": "error", "message": "message is not valid JSON"}
        if not isinstance(msg, dict):
            return {"type": "error", "message": "message must be a JSON object"}

        msg_type = msg.get("type")
        if msg_type == "create":
            try:
                config = parse_config(msg.get("config") or {})
            except (ConfigError, VineSimError, TypeError, KeyError) as exc:
                return {"type": "error", "message": f"invalid config: {exc}"}
            session = Session(uuid.uuid4().hex, config)
            self.sessions[session.id] = session
            owned.append(session.id)
            outbox = _Outbox()
            session.outboxes.append(outbox)
            session.task = asyncio.create_task(session.run())
            senders.append(asyncio.create_task(self._send_frames(connection, session.id, outbox)))
            return {"type": "ack", "session": session.id}

        if msg_type == "command":
            session = self.sessions.get(msg.get("session"))
            if session is None:
                return {"type": "error", "message": f"unknown session {msg.get('session')!r}"}
            try:
                cmd = command_from_message(msg)
                cmd.validate(session.config.valve)
            except (CommandError, ConfigError, ValueError, TypeError) as exc:
                return {"type": "error", "session": session.id, "message": str(exc)}
            session.commands.put_nowait(cmd)
            return {"type": "ack", "session": session.id, "applies_at_s": session.next_apply_time}

        if msg_type == "close":
            session = self.sessions.pop(msg.get("session"), None)
            if session is None:
                return {"type": "error", "message": f"unknown session {msg.get('session')!r}"}
            session.close()
            if session.id in owned:
                owned.remove(session.id)
            return {"type": "close", "session": session.id}

        return {"type": "error", "message": f"unknown message type {msg_type!r}"}

    async def _send_frames(self, connection, session_id: str, outbox: _Outbox) -> None:
        try:
            while True:
                await outbox.event.wait()
                outbox.event.clear()
                message, outbox.latest = outbox.latest, None
                if message is not None:
                    await connection.send(json.dumps(message))
                if outbox.closed:
                    # flush a frame that arrived during the last send, then terminate
                    message, outbox.latest = outbox.latest, None
                    if message is not None:
                        await connection.send(json.dumps(message))
                    await connection.send(json.dumps({"type": "close", "session": session_id}))
                    return
        except Exception:
            return  # connection went away; handler cleanup closes the session


def parse_addr(addr: str) -> tuple[str, int]:
    host, sep, port = addr.rpartition(":")
    if not sep or not host:
        raise ConfigError(f"address must be host:port, got {addr!r}")
    try:
        return host, int(port)
    except ValueError as exc:
        raise ConfigError(f"address must be host:port, got {addr!r}") from exc


async def run_server(host: str, port: int, ready=None) -> None:
    """Serve until cancelled; reports the bound address through `ready`."""
    server = VineServer()
    bound = await server.start(host, port)
    if ready is not None:
        ready(bound)
    try:
        await asyncio.Future()
    except asyncio.CancelledError:
        pass
    finally:
        await server.stop()
