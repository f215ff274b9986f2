"""Thin client for the partsdesk wire protocol."""

from .buffer import append_records, read_records
from .client import (
    ClientSession,
    DivergenceError,
    ProtocolError,
    SessionFinalizedError,
    connect,
    replay_episode,
    step,
)
from .transport import (
    ConnectionFailure,
    SocketTransport,
    StdioTransport,
    TransportError,
    open_transport,
)

__version__ = "0.1.0"

__all__ = [
    "ClientSession",
    "ConnectionFailure",
    "DivergenceError",
    "ProtocolError",
    "SessionFinalizedError",
    "SocketTransport",
    "StdioTransport",
    "TransportError",
    "append_records",
    "connect",
    "open_transport",
    "read_records",
    "replay_episode",
    "step",
]
