from sketchmon.gateway.protocol import (
    FrameDecoder,
    MessageType,
    ProtocolError,
    WireMessage,
    encode_frame,
    parse_message,
)
from sketchmon.gateway.core import GatewayCore, RelayPolicy, SnapshotRelay
from sketchmon.gateway.config import ServerConfig

__all__ = [
    "FrameDecoder",
    "GatewayCore",
    "MessageType",
    "ProtocolError",
    "RelayPolicy",
    "ServerConfig",
    "SnapshotRelay",
    "WireMessage",
    "encode_frame",
    "parse_message",
]
