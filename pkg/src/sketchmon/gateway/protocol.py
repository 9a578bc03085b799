"""Wire protocol: length-delimited UTF-8 JSON messages.

Frame layout over TCP: a 4-byte big-endian payload length followed by one
JSON object {"type", "session_id", "seq", "payload"}. Over WebSocket each
text frame carries one such JSON object (the socket already delimits).
The Join payload carries the protocol version field "v".
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

PROTOCOL_VERSION = 1
MAX_FRAME_BYTES = 1 << 20  # a full 512-canvas stroke set stays far below this


class MessageType(str, Enum):
    JOIN = "join"
    ROLE_ASSIGN = "role_assign"
    STROKE_ADD = "stroke_add"
    GUESS = "guess"
    FEEDBACK = "feedback"
    ALERT = "alert"
    FALSE_ALARM = "false_alarm"
    VIOLATION_FLAG = "violation_flag"
    GAME_END = "game_end"
    ERROR = "error"


# message types a client may send; the rest are server-only
CLIENT_TYPES = frozenset(
    {
        MessageType.JOIN,
        MessageType.STROKE_ADD,
        MessageType.GUESS,
        MessageType.FEEDBACK,
        MessageType.FALSE_ALARM,
        MessageType.VIOLATION_FLAG,
    }
)


class ProtocolError(Exception):
    def __init__(self, reason: str, detail: str = ""):
        super().__init__(detail or reason)
        self.reason = reason
        self.detail = detail


@dataclass(frozen=True)
class WireMessage:
    type: MessageType
    seq: int
    session_id: Optional[str] = None
    payload: dict = field(default_factory=dict)

    def to_obj(self) -> dict:
        return {
            "type": self.type.value,
            "session_id": self.session_id,
            "seq": self.seq,
            "payload": self.payload,
        }


def encode_message(msg: WireMessage) -> bytes:
    return json.dumps(msg.to_obj(), separators=(",", ":")).encode("utf-8")


def encode_frame(msg: WireMessage) -> bytes:
    body = encode_message(msg)
    return struct.pack(">I", len(body)) + body


def parse_message(raw: bytes | str) -> WireMessage:
    """Strict parse; raises ProtocolError with a reason code on any defect."""
    try:
        obj = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ProtocolError("bad_json", str(exc)) from exc
    if not isinstance(obj, dict):
        raise ProtocolError("bad_json", "message must be a JSON object")
    try:
        mtype = MessageType(obj["type"])
    except (KeyError, ValueError) as exc:
        raise ProtocolError("unknown_type", f"unknown message type {obj.get('type')!r}") from exc
    seq = obj.get("seq")
    if not isinstance(seq, int) or seq < 0:
        raise ProtocolError("bad_seq", "seq must be a non-negative integer")
    session_id = obj.get("session_id")
    if session_id is not None and not isinstance(session_id, str):
        raise ProtocolError("bad_session", "session_id must be a string")
    payload = obj.get("payload", {})
    if not isinstance(payload, dict):
        raise ProtocolError("bad_payload", "payload must be an object")
    return WireMessage(type=mtype, seq=seq, session_id=session_id, payload=payload)


class FrameDecoder:
    """Incremental length-prefix decoder for the TCP byte stream."""

    def __init__(self, max_frame: int = MAX_FRAME_BYTES):
        self._buf = bytearray()
        self._max = max_frame

    def feed(self, data: bytes) -> list[bytes]:
        self._buf.extend(data)
        frames = []
        while len(self._buf) >= 4:
            (length,) = struct.unpack(">I", self._buf[:4])
            if length > self._max:
                raise ProtocolError("frame_too_large", f"{length} bytes")
            if len(self._buf) < 4 + length:
                break
            frames.append(bytes(self._buf[4 : 4 + length]))
            del self._buf[: 4 + length]
        return frames
