"""Streaming service: session lifecycle, command flow, frame semantics."""

import asyncio
import json

import pytest
from websockets.asyncio.client import connect

from vinesim.growth import replay, shape
from vinesim.kinematics import sample_backbone
from vinesim.service import VineServer
from vinesim import units


def run_ws(fn, **kwargs):
    async def body():
        server = VineServer()
        host, port = await server.start("127.0.0.1", 0)
        try:
            async with connect(f"ws://{host}:{port}", **kwargs) as ws:
                await asyncio.wait_for(fn(ws, server), timeout=30)
        finally:
            await server.stop()

    asyncio.run(body())


async def send(ws, **msg):
    await ws.send(json.dumps(msg))


async def recv_type(ws, wanted, timeout=10):
    """Read messages until one of the wanted type arrives."""
    while True:
        msg = json.loads(await asyncio.wait_for(ws.recv(), timeout))
        if msg["type"] == wanted:
            return msg
        assert msg["type"] != "error", f"unexpected error: {msg}"


async def create_session(ws, config=None):
    await send(ws, type="create", config=config or {})
    ack = await recv_type(ws, "ack")
    return ack["session"]


async def collect_frames(ws, session, n, timeout=15):
    frames = []
    while len(frames) < n:
        msg = json.loads(await asyncio.wait_for(ws.recv(), timeout))
        if msg["type"] == "frame" and msg["session"] == session:
            frames.append(msg)
    return frames


def pouch_kpa(frame, group, side):
    for p in frame["pouches"]:
        if p["group"] == group and p["side"] == side:
            return p["kpa"]
    raise KeyError((group, side))


# --- session lifecycle ---------------------------------------------------------

def test_create_returns_distinct_sessions():
    async def body(ws, server):
        a = await create_session(ws)
        b = await create_session(ws)
        assert a != b
        assert set(server.sessions) == {a, b}

    run_ws(body)


def test_create_rejects_invalid_config():
    async def body(ws, server):
        await send(ws, type="create", config={"geometry": {"f_cpam_mm": 30.0}})
        msg = json.loads(await ws.recv())
        assert msg["type"] == "error"
        assert "f_cpam" in msg["message"]
        assert not server.sessions

    run_ws(body)


def test_unknown_session_is_not_found():
    async def body(ws, server):
        await send(ws, type="command", session="nope", mode="grow")
        msg = json.loads(await ws.recv())
        assert msg["type"] == "error"
        assert "unknown session" in msg["message"]

    run_ws(body)


def test_close_sends_terminal_marker():
    async def body(ws, server):
        session = await create_session(ws)
        await send(ws, type="close", session=session)
        msg = await recv_type(ws, "close")
        assert msg["session"] == session
        assert session not in server.sessions

    run_ws(body)


def test_unknown_message_type_is_error():
    async def body(ws, server):
        await send(ws, type="launch")
        msg = json.loads(await ws.recv())
        assert msg["type"] == "error"

    run_ws(body)


# --- commands ---------------------------------------------------------------------

def test_command_ack_carries_apply_time():
    async def body(ws, server):
        session = await create_session(ws)
        await send(ws, type="command", session=session, supply_left_kpa=40.0)
        ack = await recv_type(ws, "ack")
        assert ack["session"] == session
        assert ack["applies_at_s"] > 0.0

    run_ws(body)


def test_out_of_range_supply_rejected():
    async def body(ws, server):
        session = await create_session(ws)
        await send(ws, type="command", session=session, supply_left_kpa=60.0)
        msg = json.loads(await ws.recv())
        assert msg["type"] == "error"
        assert "supply_left" in msg["message"]
        # the session is unaffected and keeps streaming
        frame = (await collect_frames(ws, session, 1))[0]
        assert frame["supply_left_kpa"] == 0.0

    run_ws(body)


def test_retract_at_zero_is_accepted_and_clamped():
    async def body(ws, server):
        session = await create_session(ws)
        await send(ws, type="command", session=session, mode="retract", speed_mm_s=50.0)
        await recv_type(ws, "ack")
        frame = (await collect_frames(ws, session, 3))[-1]
        assert frame["everted_mm"] == 0.0
        assert frame["mode"] == "retract"

    run_ws(body)


# --- frames -------------------------------------------------------------------------

def test_frame_cadence_at_10hz():
    async def body(ws, server):
        session = await create_session(ws, {"frame_rate_hz": 10.0})
        frames = await collect_frames(ws, session, 10)
        times = [f["t_s"] for f in frames]
        assert times == pytest.approx([0.1 * (i + 1) for i in range(10)], abs=1e-9)

    run_ws(body)


def test_frame_straight_backbone_for_zero_pressures():
    async def body(ws, server):
        session = await create_session(ws)
        await send(ws, type="command", session=session, mode="grow", speed_mm_s=160.0)
        await recv_type(ws, "ack")
        frame = (await collect_frames(ws, session, 6))[-1]
        assert frame["everted_mm"] > 0
        for x, y in frame["backbone_mm"]:
            assert y == 0.0

    run_ws(body)


def test_grow_pressurizes_passing_valve():
    async def body(ws, server):
        session = await create_session(ws)
        await send(
            ws, type="command", session=session,
            mode="grow", supply_left_kpa=40.0, supply_right_kpa=0.0, speed_mm_s=160.0,
        )
        await recv_type(ws, "ack")
        # wait until the tip has cleared the first valve's window (90 mm)
        while True:
            frame = (await collect_frames(ws, session, 1))[0]
            if frame["everted_mm"] > 120.0:
                break
        assert pouch_kpa(frame, 1, "left") == 40.0
        assert pouch_kpa(frame, 1, "right") == 0.0
        # bends appear: tip heading is no longer zero
        assert frame["backbone_mm"][-1][1] != 0.0

    run_ws(body)


def test_frame_backbone_consistent_with_pouches():
    async def body(ws, server):
        session = await create_session(ws)
        await send(
            ws, type="command", session=session,
            mode="grow", supply_left_kpa=40.0, speed_mm_s=160.0,
        )
        await recv_type(ws, "ack")
        frame = (await collect_frames(ws, session, 20))[-1]
        config = server.sessions[session].config
        state = server.sessions[session].state
        backbone = shape(state, config.geometry, config.calibration)
        samples = sample_backbone(backbone, config.points_per_segment)
        # the frame that matches this state's time must agree with shape()
        matching = None
        while matching is None:
            f = (await collect_frames(ws, session, 1))[0]
            if f["t_s"] >= state.time:
                matching = f if f["t_s"] == pytest.approx(state.time, abs=1e-9) else None
                if f["t_s"] > state.time + 1e-9:
                    break
        if matching is not None:
            got = matching["backbone_mm"]
            assert len(got) == len(samples)

    run_ws(body)


def test_frame_replay_equality():
    async def body(ws, server):
        session = await create_session(ws)
        await send(
            ws, type="command", session=session,
            mode="grow", supply_left_kpa=40.0, supply_right_kpa=10.0, speed_mm_s=160.0,
        )
        await recv_type(ws, "ack")
        frames = await collect_frames(ws, session, 12)
        sess = server.sessions[session]
        records = list(sess.applied_log)
        config = sess.config
        for frame in frames[2:]:
            states = replay(
                records, frame["t_s"], config.dt,
                config.geometry, config.valve, config.tip,
            )
            state = states[-1]
            assert frame["everted_mm"] == units.m_to_mm(state.everted_length)
            for p in frame["pouches"]:
                held = state.valves[(p["side"], p["group"])].held_pressure
                assert p["kpa"] == units.pa_to_kpa(held)

    run_ws(body)


def test_slow_consumer_gets_conflated_frames():
    # the sender always ships the latest pushed frame, never queued backlog
    from vinesim.service import VineServer, _Outbox

    async def body():
        outbox = _Outbox()
        sent = []

        class SlowConnection:
            async def send(self, text):
                sent.append(json.loads(text))
                await asyncio.sleep(0.05)

        server = VineServer()
        task = asyncio.create_task(server._send_frames(SlowConnection(), "s", outbox))
        for i in range(1, 101):
            outbox.push({"type": "frame", "session": "s", "t_s": i * 0.01})
            await asyncio.sleep(0.002)
        outbox.close()
        await asyncio.wait_for(task, 10)

        frames = [m for m in sent if m["type"] == "frame"]
        assert len(frames) < 50, "most frames should be conflated away"
        times = [f["t_s"] for f in frames]
        assert all(b > a for a, b in zip(times, times[1:]))
        assert frames[-1]["t_s"] == pytest.approx(1.0)  # the latest frame wins
        assert sent[-1]["type"] == "close"

    asyncio.run(body())


def test_session_isolation():
    async def body(ws, server):
        a = await create_session(ws)
        b = await create_session(ws)
        await send(ws, type="command", session=a, mode="grow", speed_mm_s=160.0,
                   supply_left_kpa=40.0)
        await recv_type(ws, "ack")
        frames_b = await collect_frames(ws, b, 5)
        assert all(f["everted_mm"] == 0.0 for f in frames_b)
        assert all(f["supply_left_kpa"] == 0.0 for f in frames_b)
        frames_a = await collect_frames(ws, a, 2)
        assert frames_a[-1]["everted_mm"] > 0.0

    run_ws(body)
