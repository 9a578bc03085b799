import asyncio
import json
import random

import numpy as np
import pytest

from sketchmon.alerts import AlertEngine
from sketchmon.detector.types import Category, DetectionBox
from sketchmon.gamecore import SessionRegistry, SessionState
from sketchmon.gateway.core import GatewayCore, RelayPolicy, SnapshotRelay
from sketchmon.gateway.protocol import (
    FrameDecoder,
    MessageType,
    ProtocolError,
    WireMessage,
    encode_frame,
    encode_message,
    parse_message,
)
from sketchmon.gateway.tcp import TcpGateway, TcpTestClient
from sketchmon.pipeline.workers import DetectionResult


def wire(mtype, seq, session_id=None, **payload):
    return WireMessage(type=mtype, seq=seq, session_id=session_id, payload=payload)


def make_core(**kw):
    snapshots = []
    kw.setdefault("submit_snapshot", snapshots.append)
    kw.setdefault("auto_confirm", True)
    kw.setdefault("rng", random.Random(1))
    core = GatewayCore(**kw)
    core._test_snapshots = snapshots
    return core


def join_pair(core, t=0.0):
    core.connect("c1")
    core.connect("c2")
    assert core.handle_message("c1", wire(MessageType.JOIN, 0, v=1), t) == []
    out = core.handle_message("c2", wire(MessageType.JOIN, 0, v=1), t)
    assert len(out) == 2
    roles = {}
    session_id = None
    for conn_id, msg in out:
        assert msg.type is MessageType.ROLE_ASSIGN
        roles[msg.payload["role"]] = conn_id
        session_id = msg.session_id
    return roles["drawer"], roles["guesser"], session_id


def stroke_payload(sid=0, t_ms=0, pts=((10, 10), (60, 10))):
    return {"id": sid, "kind": "draw", "t_ms": t_ms, "pts": [list(p) for p in pts]}


# -- protocol -----------------------------------------------------------------

def test_frame_roundtrip():
    msg = wire(MessageType.JOIN, 0, v=1)
    frame = encode_frame(msg)
    decoder = FrameDecoder()
    # feed in awkward chunks
    frames = decoder.feed(frame[:3])
    assert frames == []
    frames = decoder.feed(frame[3:] + frame)
    assert len(frames) == 2
    back = parse_message(frames[0])
    assert back == msg


def test_parse_rejects_malformed():
    for raw in (b"not json", b"[1,2]", b'{"type":"nope","seq":0}', b'{"type":"join"}',
                b'{"type":"join","seq":-1}', b'{"type":"join","seq":0,"payload":[]}'):
        with pytest.raises(ProtocolError):
            parse_message(raw)


def test_decoder_rejects_oversized_frame():
    decoder = FrameDecoder(max_frame=16)
    with pytest.raises(ProtocolError):
        decoder.feed(b"\x00\x01\x00\x00")


# -- pairing and roles -----------------------------------------------------------

def test_join_pairs_and_assigns_roles():
    core = make_core()
    drawer_conn, guesser_conn, session_id = join_pair(core)
    assert {drawer_conn, guesser_conn} == {"c1", "c2"}
    session = core.registry.get(session_id)
    assert session.state is SessionState.ACTIVE
    assert session.target_phrase


def test_drawer_gets_target_guesser_does_not():
    core = make_core()
    core.connect("c1")
    core.connect("c2")
    core.handle_message("c1", wire(MessageType.JOIN, 0, v=1), 0.0)
    out = core.handle_message("c2", wire(MessageType.JOIN, 0, v=1), 0.0)
    payloads = {m.payload["role"]: m.payload for _, m in out}
    assert "target" in payloads["drawer"]
    assert "target" not in payloads["guesser"]


def test_join_requires_version():
    core = make_core()
    core.connect("c1")
    ((_, msg),) = core.handle_message("c1", wire(MessageType.JOIN, 0, v=99), 0.0)
    assert msg.type is MessageType.ERROR and msg.payload["reason"] == "bad_version"


def test_double_join_rejected():
    core = make_core()
    core.connect("c1")
    core.handle_message("c1", wire(MessageType.JOIN, 0, v=1), 0.0)
    ((_, msg),) = core.handle_message("c1", wire(MessageType.JOIN, 1, v=1), 0.0)
    assert msg.payload["reason"] == "already_joined"


def test_seq_must_increase():
    core = make_core()
    core.connect("c1")
    core.handle_message("c1", wire(MessageType.JOIN, 5, v=1), 0.0)
    ((_, msg),) = core.handle_message("c1", wire(MessageType.GUESS, 5, text="x"), 0.0)
    assert msg.payload["reason"] == "bad_seq"


# -- strokes ------------------------------------------------------------------------

def test_stroke_echoed_to_guesser():
    core = make_core()
    drawer, guesser, sid = join_pair(core)
    out = core.handle_message(
        drawer, wire(MessageType.STROKE_ADD, 1, sid, **stroke_payload()), 0.1
    )
    assert len(out) == 1
    conn_id, msg = out[0]
    assert conn_id == guesser and msg.type is MessageType.STROKE_ADD
    assert msg.payload["pts"] == [[10, 10], [60, 10]]


def test_stroke_simplified_at_ingestion():
    core = make_core()
    drawer, guesser, sid = join_pair(core)
    dense = [[float(x), 10 + (0.2 if x % 2 else -0.2)] for x in range(0, 51)]
    out = core.handle_message(
        drawer,
        wire(MessageType.STROKE_ADD, 1, sid, id=0, kind="draw", t_ms=0, pts=dense),
        0.1,
    )
    (_, echoed) = out[0]
    assert echoed.payload["pts"] == [[0.0, 9.8], [50.0, 9.8]]
    session = core.registry.get(sid)
    assert len(session.strokes[0].points) == 2


def test_stroke_from_guesser_rejected():
    core = make_core()
    drawer, guesser, sid = join_pair(core)
    ((conn_id, msg),) = core.handle_message(
        guesser, wire(MessageType.STROKE_ADD, 1, sid, **stroke_payload()), 0.1
    )
    assert conn_id == guesser
    assert msg.type is MessageType.ERROR and msg.payload["reason"] == "wrong_role"


# -- guesses and feedback --------------------------------------------------------------

def test_guess_broadcast_to_drawer():
    core = make_core()
    drawer, guesser, sid = join_pair(core)
    out = core.handle_message(guesser, wire(MessageType.GUESS, 1, sid, text="wasp"), 0.2)
    assert any(c == drawer and m.type is MessageType.GUESS for c, m in out)


def test_correct_guess_ends_game_for_both():
    core = make_core()
    drawer, guesser, sid = join_pair(core)
    target = core.registry.get(sid).target_phrase
    out = core.handle_message(
        guesser, wire(MessageType.GUESS, 1, sid, text=target.upper()), 0.2
    )
    ends = [m for _, m in out if m.type is MessageType.GAME_END]
    assert len(ends) == 2
    assert all(m.payload["state"] == "won_by_guess" for m in ends)
    assert "outcome" in ends[0].payload


def test_feedback_forwarded_and_role_checked():
    core = make_core()
    drawer, guesser, sid = join_pair(core)
    out = core.handle_message(
        drawer, wire(MessageType.FEEDBACK, 1, sid, kind="thumbs_up"), 0.2
    )
    assert out[0][0] == guesser and out[0][1].type is MessageType.FEEDBACK
    ((_, msg),) = core.handle_message(
        guesser, wire(MessageType.FEEDBACK, 1, sid, kind="highlight_ping", point=[1, 2]), 0.3
    )
    assert msg.type is MessageType.ERROR


def test_server_only_types_rejected():
    core = make_core()
    core.connect("c1")
    ((_, msg),) = core.handle_message("c1", wire(MessageType.ALERT, 0), 0.0)
    assert msg.payload["reason"] == "bad_type"


# -- snapshot relay ----------------------------------------------------------------------

def test_relay_first_stroke_immediate_then_debounced():
    core = make_core(policy=RelayPolicy(min_interval_ms=1000))
    drawer, guesser, sid = join_pair(core, t=0.0)
    core.handle_message(drawer, wire(MessageType.STROKE_ADD, 1, sid, **stroke_payload(0, 0)), 10.0)
    assert len(core._test_snapshots) == 1
    core.handle_message(
        drawer, wire(MessageType.STROKE_ADD, 2, sid, **stroke_payload(1, 100)), 10.1
    )
    assert len(core._test_snapshots) == 1  # deferred to the interval boundary
    core.poll(10.5)
    assert len(core._test_snapshots) == 1
    core.poll(11.0)
    assert len(core._test_snapshots) == 2
    first, second = core._test_snapshots
    assert first.snapshot_seq == 1 and len(first.strokes) == 1
    assert second.snapshot_seq == 2 and len(second.strokes) == 2


def test_relay_no_strokes_no_snapshot():
    core = make_core()
    join_pair(core)
    core.poll(100.0)
    assert core._test_snapshots == []


def test_relay_rate_bounded_over_random_schedule():
    policy = RelayPolicy(min_interval_ms=1000)
    relay = SnapshotRelay(policy)
    from sketchmon.gamecore import GameSession
    from sketchmon.strokes import Point, Stroke, StrokeKind

    session = GameSession("s", "a", "b", "bee")
    session.activate(0.0)
    rng = random.Random(4)
    emitted = []
    t = 0.0
    next_id = 0
    for _ in range(300):
        t += rng.uniform(0.01, 0.7)
        if rng.random() < 0.6:
            session.add_stroke(
                "a",
                Stroke(next_id, StrokeKind.DRAW, int(t * 1000), (Point(1, 1), Point(2, 2))),
                t,
            )
            next_id += 1
            relay.note_stroke("s")
        snap = relay.maybe_relay(session, t)
        if snap is not None:
            emitted.append((t, snap))
    assert emitted
    times = [e[0] for e in emitted]
    gaps = [b - a for a, b in zip(times, times[1:])]
    assert all(gap >= 1.0 - 1e-9 for gap in gaps)
    for t_emit, snap in emitted:
        assert all(s.timestamp_ms <= t_emit * 1000 + 1e-6 for s in snap.strokes)
        session_upto = [s for s in session.strokes if s.timestamp_ms <= t_emit * 1000]
        assert len(snap.strokes) == len([s for s in session_upto])


def test_relay_requires_active_session():
    relay = SnapshotRelay(RelayPolicy())
    from sketchmon.gamecore import GameSession

    session = GameSession("s", "a", "b", "bee")
    relay.note_stroke("s")
    assert relay.maybe_relay(session, 0.0) is None  # still waiting


# -- alerts over the gateway ------------------------------------------------------------

def text_result(session_id, seq=1):
    return DetectionResult(
        session_id=session_id,
        snapshot_seq=seq,
        boxes=(DetectionBox(100, 100, 40, 20, Category.TEXT, 0.9),),
        detector_id="stub",
        detect_ms=1.0,
    )


def test_alert_delivered_to_both_players_and_logged():
    core = make_core()
    drawer, guesser, sid = join_pair(core)
    core.alerts.ingest(text_result(sid))
    out = core.poll(1.0)
    targets = {c for c, m in out if m.type is MessageType.ALERT}
    assert targets == {drawer, guesser}
    session = core.registry.get(sid)
    assert any(e["type"] == "alert" for e in session.events)


def test_false_alarm_roundtrip_increments_fp():
    core = make_core()
    drawer, guesser, sid = join_pair(core)
    (alert,) = core.alerts.ingest(text_result(sid))
    core.poll(1.0)
    out = core.handle_message(
        drawer, wire(MessageType.FALSE_ALARM, 5, sid, alert_id=alert.alert_id), 1.5
    )
    assert not any(m.type is MessageType.ERROR for _, m in out)
    assert core.alerts.ledger.false_positive == 1
    ((_, msg),) = core.handle_message(
        guesser, wire(MessageType.FALSE_ALARM, 5, sid, alert_id=alert.alert_id), 1.6
    )
    assert msg.payload["reason"] == "wrong_role"


def test_violation_flag_raises_manual_alert_to_drawer():
    core = make_core()
    drawer, guesser, sid = join_pair(core)
    out = core.handle_message(guesser, wire(MessageType.VIOLATION_FLAG, 1, sid), 0.5)
    alerts = [(c, m) for c, m in out if m.type is MessageType.ALERT]
    assert len(alerts) == 1 and alerts[0][0] == drawer
    assert alerts[0][1].payload["manual"] is True
    assert core.alerts.ledger.false_negative == 1


def test_disconnect_ends_session_and_notifies_peer():
    core = make_core(session_dir=None)
    drawer, guesser, sid = join_pair(core)
    out = core.disconnect(drawer, 5.0)
    ends = [(c, m) for c, m in out if m.type is MessageType.GAME_END]
    assert len(ends) == 1 and ends[0][0] == guesser
    assert ends[0][1].payload["reason"] == "disconnect"
    session = core.registry.get(sid)
    assert session.is_terminal
    assert any(e["type"] == "disconnect" for e in session.events)


def test_session_timeout_via_poll():
    core = make_core(time_limit_s=10.0)
    drawer, guesser, sid = join_pair(core, t=0.0)
    assert core.poll(5.0) == []
    out = core.poll(11.0)
    ends = [m for _, m in out if m.type is MessageType.GAME_END]
    assert len(ends) == 2 and ends[0].payload["reason"] == "timeout"


def test_session_record_written_on_end(tmp_path):
    core = make_core(session_dir=tmp_path)
    drawer, guesser, sid = join_pair(core)
    target = core.registry.get(sid).target_phrase
    core.handle_message(guesser, wire(MessageType.GUESS, 1, sid, text=target), 0.5)
    record = json.loads((tmp_path / f"{sid}.json").read_text())
    assert record["state"] == "won_by_guess"
    assert record["events"][-1]["type"] == "outcome"


def test_fuzz_random_bytes_only_error_replies():
    core = make_core()
    core.connect("c1")
    rng = random.Random(99)
    for i in range(10_000):
        blob = bytes(rng.randrange(256) for _ in range(rng.randrange(1, 40)))
        out = core.handle_bytes("c1", blob, 0.0)
        assert len(out) == 1
        conn_id, msg = out[0]
        assert conn_id == "c1" and msg.type is MessageType.ERROR


def test_capacity_limit_rejects_new_pairs():
    core = make_core(registry=SessionRegistry(capacity=1))
    join_pair(core)
    core.connect("c3")
    core.connect("c4")
    core.handle_message("c3", wire(MessageType.JOIN, 0, v=1), 0.0)
    out = core.handle_message("c4", wire(MessageType.JOIN, 0, v=1), 0.0)
    assert any(m.type is MessageType.ERROR for _, m in out)


# -- TCP transport ---------------------------------------------------------------------

def run(coro):
    return asyncio.run(coro)


def test_tcp_join_and_play():
    async def scenario():
        core = make_core()
        server = await TcpGateway(core, port=0).start()
        try:
            a = await TcpTestClient("127.0.0.1", server.port).connect()
            b = await TcpTestClient("127.0.0.1", server.port).connect()
            await a.send(wire(MessageType.JOIN, a.next_seq(), v=1))
            await b.send(wire(MessageType.JOIN, b.next_seq(), v=1))
            ra = await a.recv_until(MessageType.ROLE_ASSIGN)
            rb = await b.recv_until(MessageType.ROLE_ASSIGN)
            roles = {ra.payload["role"]: (a, ra), rb.payload["role"]: (b, rb)}
            drawer, drawer_msg = roles["drawer"]
            guesser, _ = roles["guesser"]
            sid = drawer_msg.session_id
            await drawer.send(
                wire(MessageType.STROKE_ADD, drawer.next_seq(), sid, **stroke_payload())
            )
            echoed = await guesser.recv_until(MessageType.STROKE_ADD)
            assert echoed.payload["pts"] == [[10, 10], [60, 10]]
            target = drawer_msg.payload["target"]
            await guesser.send(wire(MessageType.GUESS, guesser.next_seq(), sid, text=target))
            end_a = await drawer.recv_until(MessageType.GAME_END)
            end_b = await guesser.recv_until(MessageType.GAME_END)
            assert end_a.payload["state"] == end_b.payload["state"] == "won_by_guess"
            await a.close()
            await b.close()
        finally:
            await server.stop()

    run(scenario())


def test_tcp_garbage_never_crashes_server():
    async def scenario():
        core = make_core()
        server = await TcpGateway(core, port=0).start()
        try:
            c = await TcpTestClient("127.0.0.1", server.port).connect()
            # valid frame with garbage JSON inside
            await c.send_raw(b"\x00\x00\x00\x07garbage")
            msg = await c.recv_until(MessageType.ERROR)
            assert msg.payload["reason"] in ("bad_json", "unknown_type")
            await c.close()
            # server still accepts new connections
            d = await TcpTestClient("127.0.0.1", server.port).connect()
            await d.send(wire(MessageType.JOIN, 0, v=1))
            await d.close()
        finally:
            await server.stop()

    run(scenario())
