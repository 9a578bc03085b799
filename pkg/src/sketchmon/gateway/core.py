"""Transport-independent connection and message handling.

The core owns connection state, player pairing, message dispatch into the
game registry and alert engine, snapshot relaying into the monitoring
pipeline, and alert fan-out back to players. Transports feed it raw frames
or parsed messages plus a clock reading and send whatever it returns; a
periodic poll drives timers (debounced relays, session timeouts).
"""

from __future__ import annotations

import logging
import random
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from sketchmon.alerts import Alert, AlertEngine, AlertError
from sketchmon.gamecore import (
    FeedbackKind,
    GameRuleError,
    GameSession,
    GuessOutcome,
    PhraseDictionary,
    Role,
    SessionRegistry,
)
from sketchmon.gateway.protocol import (
    CLIENT_TYPES,
    PROTOCOL_VERSION,
    MessageType,
    ProtocolError,
    WireMessage,
    parse_message,
)
from sketchmon.strokes import (
    CanvasSnapshot,
    Point,
    SimplifyConfig,
    simplify,
    stroke_from_obj,
    stroke_to_obj,
)

log = logging.getLogger(__name__)

Outbound = list[tuple[str, WireMessage]]


@dataclass(frozen=True)
class RelayPolicy:
    min_interval_ms: int = 1000
    relay_on: str = "stroke_complete"

    def __post_init__(self) -> None:
        if self.min_interval_ms <= 0:
            raise ValueError("min_interval_ms must be positive")


@dataclass
class _RelayState:
    last_emit_ms: float = float("-inf")
    dirty: bool = False
    seq: int = 0


class SnapshotRelay:
    """Debounces canvas relaying to at most one snapshot per interval per
    session. Stroke completions mark a session dirty; emission happens
    immediately when the interval allows, otherwise on a later poll."""

    def __init__(self, policy: RelayPolicy = RelayPolicy()):
        self.policy = policy
        self._states: dict[str, _RelayState] = {}

    def note_stroke(self, session_id: str) -> None:
        self._states.setdefault(session_id, _RelayState()).dirty = True

    def maybe_relay(self, session: GameSession, now: float) -> Optional[CanvasSnapshot]:
        """Emit the accumulated canvas if the session is dirty and the
        debounce interval has elapsed since the last emission."""
        if session.is_terminal or session.started_at is None:
            return None
        state = self._states.setdefault(session.session_id, _RelayState())
        if not state.dirty:
            return None
        now_ms = now * 1000.0
        if now_ms - state.last_emit_ms < self.policy.min_interval_ms:
            return None
        state.last_emit_ms = now_ms
        state.dirty = False
        state.seq += 1
        return CanvasSnapshot(session.session_id, state.seq, tuple(session.strokes))

    def forget(self, session_id: str) -> None:
        self._states.pop(session_id, None)


@dataclass
class _Connection:
    conn_id: str
    player_id: str
    session_id: Optional[str] = None
    last_seq_in: int = -1
    next_seq_out: int = 0


class GatewayCore:
    def __init__(
        self,
        registry: SessionRegistry | None = None,
        alert_engine: AlertEngine | None = None,
        phrases: PhraseDictionary | None = None,
        policy: RelayPolicy = RelayPolicy(),
        submit_snapshot: Optional[Callable[[CanvasSnapshot], None]] = None,
        simplify_cfg: SimplifyConfig = SimplifyConfig(),
        auto_confirm: bool = False,
        time_limit_s: float = 120.0,
        session_dir: str | Path | None = None,
        rng: random.Random | None = None,
        on_session_count: Optional[Callable[[int], None]] = None,
    ):
        self.registry = registry or SessionRegistry()
        self.alerts = alert_engine or AlertEngine()
        self.alerts.on_alert = self._on_alert
        self.phrases = phrases or PhraseDictionary.default()
        self.relay = SnapshotRelay(policy)
        self.submit_snapshot = submit_snapshot
        self.simplify_cfg = simplify_cfg
        self.auto_confirm = auto_confirm
        self.time_limit_s = time_limit_s
        self.session_dir = Path(session_dir) if session_dir else None
        self.rng = rng or random.Random()
        self.on_session_count = on_session_count
        self._conns: dict[str, _Connection] = {}
        self._by_player: dict[str, str] = {}  # player_id -> conn_id
        self._waiting: list[str] = []  # conn_ids waiting for a partner
        self._pending_alerts: list[tuple[str, Alert]] = []
        self._next_player = 0
        self._lock = threading.RLock()

    # -- connection lifecycle ------------------------------------------------------

    def connect(self, conn_id: str) -> None:
        with self._lock:
            player_id = f"player-{self._next_player:06d}"
            self._next_player += 1
            self._conns[conn_id] = _Connection(conn_id=conn_id, player_id=player_id)
            self._by_player[player_id] = conn_id

    def disconnect(self, conn_id: str, now: float) -> Outbound:
        """Drop a connection; an active game ends and the peer is told."""
        with self._lock:
            conn = self._conns.pop(conn_id, None)
            if conn is None:
                return []
            self._by_player.pop(conn.player_id, None)
            if conn_id in self._waiting:
                self._waiting.remove(conn_id)
            out: Outbound = []
            if conn.session_id is not None:
                try:
                    session = self.registry.get(conn.session_id)
                except GameRuleError:
                    return []
                if not session.is_terminal:
                    session.end_disconnected(conn.player_id, now)
                    out.extend(self._finalize_session(session, now, reason="disconnect"))
            return out

    # -- message handling -----------------------------------------------------------

    def handle_bytes(self, conn_id: str, raw: bytes, now: float) -> Outbound:
        """Parse and dispatch one frame; malformed input yields an error
        reply, never an exception."""
        try:
            msg = parse_message(raw)
        except ProtocolError as exc:
            return [(conn_id, self._error(conn_id, exc.reason, exc.detail))]
        return self.handle_message(conn_id, msg, now)

    def handle_message(self, conn_id: str, msg: WireMessage, now: float) -> Outbound:
        with self._lock:
            conn = self._conns.get(conn_id)
            if conn is None:
                return []
            if msg.seq <= conn.last_seq_in:
                return [(conn_id, self._error(conn_id, "bad_seq", "seq must increase"))]
            conn.last_seq_in = msg.seq
            try:
                if msg.type not in CLIENT_TYPES:
                    raise ProtocolError("bad_type", f"{msg.type.value} is server-sent only")
                handler = {
                    MessageType.JOIN: self._on_join,
                    MessageType.STROKE_ADD: self._on_stroke,
                    MessageType.GUESS: self._on_guess,
                    MessageType.FEEDBACK: self._on_feedback,
                    MessageType.FALSE_ALARM: self._on_false_alarm,
                    MessageType.VIOLATION_FLAG: self._on_violation_flag,
                }[msg.type]
                out = handler(conn, msg, now)
            except ProtocolError as exc:
                out = [(conn_id, self._error(conn_id, exc.reason, exc.detail))]
            except (GameRuleError, AlertError) as exc:
                out = [(conn_id, self._error(conn_id, "rejected", str(exc)))]
            except (KeyError, TypeError, ValueError) as exc:
                out = [(conn_id, self._error(conn_id, "bad_payload", str(exc)))]
            out.extend(self._drain_alerts())
            return out

    # -- periodic work ----------------------------------------------------------------

    def poll(self, now: float) -> Outbound:
        """Timer duties: session timeouts, debounced relays, queued alerts."""
        with self._lock:
            out: Outbound = []
            for session in self.registry.tick_all(now):
                out.extend(self._finalize_session(session, now, reason="timeout"))
            for session in list(self.registry.sessions.values()):
                self._relay_if_due(session, now)
            out.extend(self._drain_alerts())
            return out

    # -- handlers ----------------------------------------------------------------------

    def _on_join(self, conn: _Connection, msg: WireMessage, now: float) -> Outbound:
        if msg.payload.get("v") != PROTOCOL_VERSION:
            raise ProtocolError("bad_version", f"expected v={PROTOCOL_VERSION}")
        if conn.session_id is not None or conn.conn_id in self._waiting:
            raise ProtocolError("already_joined", "connection already in a session")
        self._waiting.append(conn.conn_id)
        if len(self._waiting) < 2:
            return []
        first_id = self._waiting.pop(0)
        second_id = self._waiting.pop(0)
        first, second = self._conns[first_id], self._conns[second_id]
        drawer, guesser = (first, second) if self.rng.random() < 0.5 else (second, first)
        target = self.phrases.sample(self.rng)
        session = self.registry.create(
            drawer.player_id,
            guesser.player_id,
            target,
            now,
            time_limit_s=self.time_limit_s,
            auto_confirm=self.auto_confirm,
        )
        drawer.session_id = guesser.session_id = session.session_id
        self.alerts.session_open(session.session_id)
        if self.on_session_count:
            self.on_session_count(self.registry.live_count())
        out: Outbound = []
        for member, role in ((drawer, Role.DRAWER), (guesser, Role.GUESSER)):
            payload = {
                "role": role.value,
                "player_id": member.player_id,
                "time_limit_s": session.time_limit_s,
            }
            if role is Role.DRAWER:
                payload["target"] = target
            out.append(
                (
                    member.conn_id,
                    self._outbound(member, MessageType.ROLE_ASSIGN, session.session_id, payload),
                )
            )
        return out

    def _session_for(self, conn: _Connection) -> GameSession:
        if conn.session_id is None:
            raise ProtocolError("no_session", "join first")
        return self.registry.get(conn.session_id)

    def _peer(self, session: GameSession, player_id: str) -> Optional[_Connection]:
        other = (
            session.guesser_id if player_id == session.drawer_id else session.drawer_id
        )
        conn_id = self._by_player.get(other)
        return self._conns.get(conn_id) if conn_id else None

    def _on_stroke(self, conn: _Connection, msg: WireMessage, now: float) -> Outbound:
        session = self._session_for(conn)
        if session.role_of(conn.player_id) is not Role.DRAWER:
            raise ProtocolError("wrong_role", "only the drawer draws")
        stroke = simplify(stroke_from_obj(msg.payload), self.simplify_cfg)
        session.add_stroke(conn.player_id, stroke, now)
        self.relay.note_stroke(session.session_id)
        self._relay_if_due(session, now)
        out: Outbound = []
        peer = self._peer(session, conn.player_id)
        if peer is not None:
            out.append(
                (
                    peer.conn_id,
                    self._outbound(
                        peer, MessageType.STROKE_ADD, session.session_id, stroke_to_obj(stroke)
                    ),
                )
            )
        return out

    def _on_guess(self, conn: _Connection, msg: WireMessage, now: float) -> Outbound:
        session = self._session_for(conn)
        if session.role_of(conn.player_id) is not Role.GUESSER:
            raise ProtocolError("wrong_role", "only the guesser guesses")
        text = msg.payload["text"]
        if not isinstance(text, str):
            raise ProtocolError("bad_payload", "guess text must be a string")
        outcome = session.submit_guess(conn.player_id, text, now)
        out: Outbound = []
        peer = self._peer(session, conn.player_id)
        if peer is not None:
            out.append(
                (
                    peer.conn_id,
                    self._outbound(peer, MessageType.GUESS, session.session_id, {"text": text}),
                )
            )
        if outcome is GuessOutcome.WON:
            out.extend(self._finalize_session(session, now, reason="won_by_guess"))
        return out

    def _on_feedback(self, conn: _Connection, msg: WireMessage, now: float) -> Outbound:
        session = self._session_for(conn)
        kind = FeedbackKind(msg.payload["kind"])
        point = None
        if "point" in msg.payload:
            x, y = msg.payload["point"]
            point = Point(float(x), float(y))
        session.record_feedback(conn.player_id, kind, now, point)
        out: Outbound = []
        peer = self._peer(session, conn.player_id)
        if peer is not None:
            out.append(
                (
                    peer.conn_id,
                    self._outbound(peer, MessageType.FEEDBACK, session.session_id, msg.payload),
                )
            )
        return out

    def _on_false_alarm(self, conn: _Connection, msg: WireMessage, now: float) -> Outbound:
        session = self._session_for(conn)
        if session.role_of(conn.player_id) is not Role.DRAWER:
            raise ProtocolError("wrong_role", "only the drawer dismisses alerts")
        self.alerts.false_alarm(session.session_id, int(msg.payload["alert_id"]))
        return []

    def _on_violation_flag(self, conn: _Connection, msg: WireMessage, now: float) -> Outbound:
        session = self._session_for(conn)
        if session.role_of(conn.player_id) is not Role.GUESSER:
            raise ProtocolError("wrong_role", "only the guesser flags violations")
        self.alerts.guesser_flag(session.session_id)  # alert fan-out via _on_alert
        return []

    # -- alert fan-out -----------------------------------------------------------------

    def _on_alert(self, alert: Alert) -> None:
        """Callback from the alert engine; may run on pipeline threads."""
        with self._lock:
            self._pending_alerts.append((alert.session_id, alert))

    def _drain_alerts(self) -> Outbound:
        out: Outbound = []
        while self._pending_alerts:
            session_id, alert = self._pending_alerts.pop(0)
            try:
                session = self.registry.get(session_id)
            except GameRuleError:
                continue
            session.record_alert(alert.to_obj(), alert.raised_at)
            targets = (
                [session.drawer_id]
                if alert.manual
                else [session.drawer_id, session.guesser_id]
            )
            for player_id in targets:
                conn_id = self._by_player.get(player_id)
                conn = self._conns.get(conn_id) if conn_id else None
                if conn is not None:
                    out.append(
                        (
                            conn.conn_id,
                            self._outbound(conn, MessageType.ALERT, session_id, alert.to_obj()),
                        )
                    )
        return out

    # -- internals ---------------------------------------------------------------------

    def _relay_if_due(self, session: GameSession, now: float) -> None:
        snapshot = self.relay.maybe_relay(session, now)
        if snapshot is not None and self.submit_snapshot is not None:
            self.submit_snapshot(snapshot)

    def _finalize_session(self, session: GameSession, now: float, reason: str) -> Outbound:
        try:
            summary = self.alerts.session_close(session.session_id)
        except AlertError:
            summary = None
        if summary is not None:
            session.record_outcome(summary, now)
        if self.session_dir is not None:
            self.session_dir.mkdir(parents=True, exist_ok=True)
            session.save(self.session_dir / f"{session.session_id}.json")
        self.relay.forget(session.session_id)
        if self.on_session_count:
            self.on_session_count(self.registry.live_count())
        payload = {"reason": reason, "state": session.state.value, "target": session.target_phrase}
        if summary is not None:
            payload["outcome"] = summary
        out: Outbound = []
        for player_id in (session.drawer_id, session.guesser_id):
            conn_id = self._by_player.get(player_id)
            conn = self._conns.get(conn_id) if conn_id else None
            if conn is not None:
                out.append(
                    (
                        conn.conn_id,
                        self._outbound(conn, MessageType.GAME_END, session.session_id, payload),
                    )
                )
        return out

    def _outbound(
        self, conn: _Connection, mtype: MessageType, session_id: Optional[str], payload: dict
    ) -> WireMessage:
        msg = WireMessage(type=mtype, seq=conn.next_seq_out, session_id=session_id, payload=payload)
        conn.next_seq_out += 1
        return msg

    def _error(self, conn_id: str, reason: str, detail: str = "") -> WireMessage:
        conn = self._conns.get(conn_id)
        seq = 0
        if conn is not None:
            seq = conn.next_seq_out
            conn.next_seq_out += 1
        return WireMessage(
            type=MessageType.ERROR,
            seq=seq,
            session_id=conn.session_id if conn else None,
            payload={"reason": reason, "detail": detail},
        )
