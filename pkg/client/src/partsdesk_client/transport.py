"""Line-delimited JSON transports: TCP socket or a stdio subprocess.

A transport is a blocking request/response pipe for one connection; it
knows nothing about sessions or tools. Both transports produce identical
frames, so everything above them is transport-agnostic.
"""

from __future__ import annotations

import json
import socket
import subprocess
from typing import Any, Sequence


class TransportError(RuntimeError):
    """The pipe itself failed (connect, write, read, or close)."""


class ConnectionFailure(TransportError):
    """Could not reach the endpoint at all."""


def encode_frame(message: dict[str, Any]) -> bytes:
    return (json.dumps(message, ensure_ascii=False) + "\n").encode("utf-8")


def decode_frame(line: str) -> dict[str, Any]:
    try:
        frame = json.loads(line)
    except json.JSONDecodeError as err:
        raise TransportError(f"peer sent a non-JSON frame: {err}") from err
    if not isinstance(frame, dict):
        raise TransportError("peer sent a non-object frame")
    return frame


class SocketTransport:
    """One TCP connection to a serving endpoint."""

    def __init__(self, host: str, port: int, timeout: float = 30.0):
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as err:
            raise ConnectionFailure(f"cannot connect to {host}:{port}: {err}") from err
        self._reader = self._sock.makefile("r", encoding="utf-8")
        self.endpoint = f"{host}:{port}"

    def request(self, message: dict[str, Any]) -> dict[str, Any]:
        try:
            self._sock.sendall(encode_frame(message))
            line = self._reader.readline()
        except OSError as err:
            raise TransportError(f"socket i/o failed: {err}") from err
        if not line:
            raise TransportError("server closed the connection")
        return decode_frame(line)

    def close(self) -> None:
        try:
            self._reader.close()
            self._sock.close()
        except OSError:
            pass


class StdioTransport:
    """Spawn a server subprocess and speak frames over its standard streams."""

    def __init__(self, argv: Sequence[str]):
        try:
            self._proc = subprocess.Popen(
                list(argv), stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True,
            )
        except OSError as err:
            raise ConnectionFailure(f"cannot spawn {argv[0]!r}: {err}") from err
        self.endpoint = " ".join(argv)

    def request(self, message: dict[str, Any]) -> dict[str, Any]:
        if self._proc.poll() is not None:
            raise TransportError(f"server process exited with {self._proc.returncode}")
        try:
            self._proc.stdin.write(encode_frame(message).decode("utf-8"))
            self._proc.stdin.flush()
            line = self._proc.stdout.readline()
        except (OSError, ValueError) as err:
            raise TransportError(f"stdio i/o failed: {err}") from err
        if not line:
            raise TransportError("server process closed its stdout")
        return decode_frame(line)

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                self._proc.kill()


def open_transport(endpoint: Any) -> SocketTransport | StdioTransport:
    """Endpoint forms: "host:port" string, (host, port) tuple, or an argv list
    for a stdio server subprocess."""
    if isinstance(endpoint, (SocketTransport, StdioTransport)):
        return endpoint
    if isinstance(endpoint, str):
        host, _, port = endpoint.rpartition(":")
        if not port.isdigit():
            raise ConnectionFailure(f"endpoint {endpoint!r} is not host:port")
        return SocketTransport(host or "127.0.0.1", int(port))
    if isinstance(endpoint, tuple) and len(endpoint) == 2:
        return SocketTransport(endpoint[0], int(endpoint[1]))
    if isinstance(endpoint, (list,)):
        return StdioTransport(endpoint)
    raise ConnectionFailure(f"unsupported endpoint {endpoint!r}")
