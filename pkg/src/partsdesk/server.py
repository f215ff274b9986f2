"""Newline-delimited JSON wire protocol over TCP or standard streams.

Request:  {"id": str, "method": "session.create" | "session.finalize" |
           "tools.list" | "tools.invoke", "params": {...}}
Response: {"id": str, "ok": true, "result": {...}}
       or {"id": str, "ok": false, "error": {"code", "message", "detail"}}

Envelope error codes: unknown-session, unknown-tool, schema-violation,
domain-error, internal. Domain refusals from tool handlers are NOT envelope
errors: they come back as an ok response whose ToolResult has status
"domain-error", so an agent can read and react to them.

One server serves one bundle. Calls within a session are serialized by a
per-session lock; distinct sessions proceed in parallel.
"""

from __future__ import annotations

import json
import socketserver
import sys
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, IO

from .bundle import Bundle, load_bundle
from .rollout import Trajectory
from .rubric import Task, evaluate
from .toolkit import ToolCall, ToolRuntime, tool_catalog
from .world import EpisodeSession, fork_session


class ProtocolError(Exception):
    def __init__(self, code: str, message: str, detail: dict[str, Any] | None = None):
        super().__init__(message)
        self.code = code
        self.detail = detail or {}


@dataclass
class _SessionState:
    session: EpisodeSession
    runtime: ToolRuntime
    task: Task | None
    system_prompt: str
    turns: list[dict[str, Any]] = field(default_factory=list)
    actions: int = 0
    seen_call_ids: set[str] = field(default_factory=set)
    finalized: bool = False
    summary: dict[str, Any] | None = None
    lock: threading.RLock = field(default_factory=threading.RLock)


class ToolServer:
    """Protocol state machine; transports feed it one frame at a time."""

    def __init__(self, bundle: Bundle):
        self.bundle = bundle
        self._sessions: dict[str, _SessionState] = {}
        self._registry_lock = threading.Lock()

    # -- frame plumbing -----------------------------------------------------

    def handle_line(self, line: str) -> str:
        try:
            request = json.loads(line)
        except json.JSONDecodeError as err:
            return json.dumps(self._error(None, "internal", f"frame is not valid JSON: {err}"))
        return json.dumps(self.handle_request(request), ensure_ascii=False)

    def handle_request(self, request: dict[str, Any]) -> dict[str, Any]:
        req_id = request.get("id") if isinstance(request, dict) else None
        if not isinstance(request, dict) or "method" not in request:
            return self._error(req_id, "schema-violation", "request needs 'id', 'method', 'params'")
        params = request.get("params") or {}
        try:
            handler = {
                "session.create": self._create,
                "session.finalize": self._finalize,
                "tools.list": self._list,
                "tools.invoke": self._invoke,
            }.get(request["method"])
            if handler is None:
                raise ProtocolError("schema-violation", f"unknown method {request['method']!r}")
            result = handler(params)
        except ProtocolError as err:
            return self._error(req_id, err.code, str(err), err.detail)
        except Exception as err:  # never drop a request silently
            return self._error(req_id, "internal", f"{type(err).__name__}: {err}")
        return {"id": req_id, "ok": True, "result": result}

    @staticmethod
    def _error(req_id: Any, code: str, message: str, detail: dict[str, Any] | None = None) -> dict[str, Any]:
        return {"id": req_id, "ok": False, "error": {"code": code, "message": message, "detail": detail or {}}}

    # -- methods --------------------------------------------------------------

    def _create(self, params: dict[str, Any]) -> dict[str, Any]:
        digest = self.bundle.world.digest
        if "world_digest" in params and params["world_digest"] != digest:
            raise ProtocolError("domain-error", "requested world digest does not match the served bundle",
                                {"served_digest": digest})
        if "bundle" in params:
            wanted = Path(params["bundle"]).resolve()
            if wanted != self.bundle.root.resolve():
                raise ProtocolError("domain-error", f"server is bound to {self.bundle.root}, not {wanted}")
        task = None
        if params.get("task_id") is not None:
            task = self.bundle.tasks_by_id.get(params["task_id"])
            if task is None:
                raise ProtocolError("schema-violation", f"bundle has no task {params['task_id']!r}",
                                    {"param": "task_id"})
        session = fork_session(self.bundle.world)
        state = _SessionState(
            session=session,
            runtime=ToolRuntime(session),
            task=task,
            system_prompt=self.bundle.system_prompt_for(task) if task else "",
        )
        if task is not None:
            state.turns.append({"role": "system", "text": task.system_prompt_ref})
            state.turns.append({"role": "user", "text": task.prompt})
        with self._registry_lock:
            self._sessions[session.session_id] = state
        result: dict[str, Any] = {"session_id": session.session_id, "world_digest": digest}
        if task is not None:
            result.update({
                "task_id": task.id,
                "prompt": task.prompt,
                "system_prompt": state.system_prompt,
                "max_turns": task.max_turns,
            })
        return result

    def _state(self, params: dict[str, Any]) -> _SessionState:
        session_id = params.get("session_id")
        if not isinstance(session_id, str):
            raise ProtocolError("schema-violation", "params require a string 'session_id'", {"param": "session_id"})
        state = self._sessions.get(session_id)
        if state is None:
            raise ProtocolError("unknown-session", f"no session {session_id!r}")
        return state

    def _list(self, params: dict[str, Any]) -> dict[str, Any]:
        self._state(params)  # existence check only; catalog is immutable
        return {"tools": [d.to_json() for d in tool_catalog()]}

    def _invoke(self, params: dict[str, Any]) -> dict[str, Any]:
        state = self._state(params)
        with state.lock:
            if state.finalized:
                raise ProtocolError("unknown-session", "session is finalized", {"reason": "session-finalized"})
            for key in ("tool", "call_id"):
                if not isinstance(params.get(key), str) or not params.get(key):
                    raise ProtocolError("schema-violation", f"params require a string {key!r}", {"param": key})
            arguments = params.get("arguments") or {}
            if not isinstance(arguments, dict):
                raise ProtocolError("schema-violation", "'arguments' must be an object", {"param": "arguments"})
            if params["call_id"] in state.seen_call_ids:
                raise ProtocolError("schema-violation", f"call_id {params['call_id']!r} already used in this session",
                                    {"param": "call_id"})
            if state.task is not None and state.actions >= state.task.max_turns:
                raise ProtocolError("domain-error", f"turn cap {state.task.max_turns} reached; finalize the session",
                                    {"reason": "turn-cap"})
            call = ToolCall(tool=params["tool"], arguments=arguments, call_id=params["call_id"])
            result = state.runtime.invoke(call)
            if result.status == "unknown-tool":
                raise ProtocolError("unknown-tool", f"no tool named {call.tool!r}")
            if result.status == "schema-violation":
                raise ProtocolError("schema-violation", f"arguments rejected for {call.tool}",
                                    result.payload)
            state.seen_call_ids.add(call.call_id)
            state.turns.append({"role": "agent", "tool_call": call.to_json()})
            state.turns.append({"role": "tool", "tool_result": result.to_json()})
            state.actions += 1
            return result.to_json()

    def _finalize(self, params: dict[str, Any]) -> dict[str, Any]:
        state = self._state(params)
        with state.lock:
            if state.finalized:
                return state.summary or {"finalized": True}
            final_response = params.get("final_response", "")
            if not isinstance(final_response, str):
                raise ProtocolError("schema-violation", "'final_response' must be a string",
                                    {"param": "final_response"})
            state.finalized = True
            if state.task is None:
                state.summary = {"finalized": True, "session_version": state.session.version}
                return state.summary
            capped = state.actions >= state.task.max_turns
            if capped:
                final_response = ""
            trajectory = Trajectory(task_id=state.task.id, rollout_idx=0, seed=0)
            trajectory.turns = list(state.turns)
            trajectory.turns.append({"role": "agent", "text": final_response})
            trajectory.final_response = final_response
            trajectory.turn_count = state.task.max_turns if capped else state.actions + 1
            report = evaluate(state.task.rubric, trajectory, state.session, task_id=state.task.id)
            state.summary = {
                "finalized": True,
                "task_id": state.task.id,
                "reward": report.to_json(),
                "pass": report.passed,
                "turn_count": trajectory.turn_count,
                "world_digest": self.bundle.world.digest,
            }
            return state.summary


# -- transports ---------------------------------------------------------------------

def serve_stdio(server: ToolServer, stdin: IO[str] | None = None, stdout: IO[str] | None = None) -> None:
    """Blocking single-threaded loop over line frames on standard streams."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        stdout.write(server.handle_line(line) + "\n")
        stdout.flush()


class _LineHandler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        for raw in self.rfile:
            line = raw.decode("utf-8").strip()
            if not line:
                continue
            response = self.server.tool_server.handle_line(line)  # type: ignore[attr-defined]
            self.wfile.write((response + "\n").encode("utf-8"))


class _ThreadingServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


def serve_tcp(server: ToolServer, host: str = "127.0.0.1", port: int = 0) -> _ThreadingServer:
    """Bind a threaded TCP server; caller drives serve_forever()/shutdown()."""
    tcp = _ThreadingServer((host, port), _LineHandler)
    tcp.tool_server = server  # type: ignore[attr-defined]
    return tcp


def serve_bundle_stdio(bundle_dir: Path | str) -> None:
    serve_stdio(ToolServer(load_bundle(bundle_dir)))
