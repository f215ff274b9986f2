"""Protocol client: sessions, the episode step loop, and record replay.

The client contains zero environment logic. It encodes requests, decodes
envelopes, and raises typed errors for protocol faults; domain refusals
come back as ordinary tool results for the caller to read.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Callable

from .transport import open_transport

_request_ids = itertools.count(1)


class ProtocolError(RuntimeError):
    """The server answered with an error envelope."""

    def __init__(self, code: str, message: str, detail: dict[str, Any] | None = None):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.detail = detail or {}


class SessionFinalizedError(ProtocolError):
    """step() after the episode already ended."""


class DivergenceError(RuntimeError):
    """Replay produced a different result than the stored record."""


@dataclass
class ClientSession:
    """One live protocol session. Not thread-safe; one driver at a time."""

    transport: Any
    session_id: str
    world_digest: str
    tools: list[dict[str, Any]]
    task_id: str | None = None
    prompt: str = ""
    system_prompt: str = ""
    max_turns: int = 0
    finalized: bool = False
    summary: dict[str, Any] | None = None
    owns_transport: bool = True
    _calls: int = field(default=0, repr=False)

    def rpc(self, method: str, params: dict[str, Any]) -> dict[str, Any]:
        response = self.transport.request({"id": f"r{next(_request_ids)}", "method": method, "params": params})
        if response.get("ok"):
            return response["result"]
        error = response.get("error") or {}
        code = error.get("code", "internal")
        detail = error.get("detail") or {}
        if detail.get("reason") == "session-finalized":
            raise SessionFinalizedError(code, error.get("message", ""), detail)
        raise ProtocolError(code, error.get("message", ""), detail)

    def next_call_id(self) -> str:
        self._calls += 1
        return f"call-{self._calls}"

    def step(self, action: dict[str, Any] | str) -> dict[str, Any]:
        """Tool-call dict -> ToolResult dict; string -> finalize, returns the
        episode summary with the reward report."""
        if self.finalized:
            raise SessionFinalizedError("unknown-session", "session already finalized",
                                        {"reason": "session-finalized"})
        if isinstance(action, str):
            summary = self.rpc("session.finalize", {"session_id": self.session_id,
                                                    "final_response": action})
            self.finalized = True
            self.summary = summary
            return summary
        params = {
            "session_id": self.session_id,
            "tool": action["tool"],
            "arguments": action.get("arguments", {}),
            "call_id": action.get("call_id") or self.next_call_id(),
        }
        return self.rpc("tools.invoke", params)

    def finalize(self, final_response: str = "") -> dict[str, Any]:
        if self.finalized:
            return self.summary or {"finalized": True}
        return self.step(final_response)

    def close(self) -> None:
        if self.owns_transport:
            self.transport.close()


def connect(endpoint: Any, task_id: str | None = None,
            world_digest: str | None = None) -> ClientSession:
    """Open a transport (unless given one), create a session, cache the catalog.

    Endpoint forms: "host:port", (host, port), an argv list for a stdio
    server, or an already-open transport to multiplex sessions over.
    """
    owns = not hasattr(endpoint, "request")
    transport = open_transport(endpoint)
    params: dict[str, Any] = {}
    if task_id is not None:
        params["task_id"] = task_id
    if world_digest is not None:
        params["world_digest"] = world_digest
    bootstrap = ClientSession(transport=transport, session_id="", world_digest="",
                              tools=[], owns_transport=owns)
    try:
        created = bootstrap.rpc("session.create", params)
        session = ClientSession(
            transport=transport,
            session_id=created["session_id"],
            world_digest=created["world_digest"],
            tools=[],
            task_id=created.get("task_id"),
            prompt=created.get("prompt", ""),
            system_prompt=created.get("system_prompt", ""),
            max_turns=created.get("max_turns", 0),
            owns_transport=owns,
        )
        session.tools = session.rpc("tools.list", {"session_id": session.session_id})["tools"]
        return session
    except Exception:
        if owns:
            transport.close()
        raise


def step(session: ClientSession, action: dict[str, Any] | str) -> dict[str, Any]:
    return session.step(action)


def replay_episode(session_factory: Callable[[str], ClientSession],
                   record: dict[str, Any]) -> dict[str, Any]:
    """Re-execute a buffer record's tool calls and final response.

    ``session_factory(task_id)`` must yield a fresh session on the same
    world. Raises DivergenceError when any replayed tool result differs
    from the stored one, or when the reward does not match.
    """
    session = session_factory(record["task_id"])
    try:
        if record.get("world_digest") and record["world_digest"] != session.world_digest:
            raise DivergenceError(
                f"record was captured on world {record['world_digest'][:12]}..., "
                f"server is on {session.world_digest[:12]}..."
            )
        for turn in record["turns"]:
            if turn.get("role") == "agent" and "tool_call" in turn:
                call = turn["tool_call"]
                result = session.step({"tool": call["tool"], "arguments": call["arguments"],
                                       "call_id": call["call_id"]})
            elif turn.get("role") == "tool":
                if result != turn["tool_result"]:
                    raise DivergenceError(
                        f"call {turn['tool_result']['call_id']}: replayed result differs from record"
                    )
        summary = session.finalize(record.get("final_response", ""))
        stored = record.get("reward")
        if stored is not None:
            got = summary["reward"]
            if (got["r_num"], got["r_den"]) != (stored["r_num"], stored["r_den"]):
                raise DivergenceError(
                    f"reward {got['r_num']}/{got['r_den']} != stored {stored['r_num']}/{stored['r_den']}"
                )
        return summary
    finally:
        session.close()
