"""Line-delimited environment protocol: one JSON object per line.

Requests (field names exact):
  {"cmd":"init","theorem":"<statement>"}
  {"cmd":"apply","session":<int>,"state_id":<int>,"tactic":"<str>"}
  {"cmd":"augment","session":<int>,"state_id":<int>,"name":"<str>","prop":"<str>"}
  {"cmd":"close","session":<int>}

Responses:
  init    -> {"ok":true,"session":<int>,"state_id":0,"state":"<text>"} | {"ok":false,"error":"<msg>"}
  apply   -> {"ok":true,"proved":false,"state_id":<int>,"state":"<text>"}
           | {"ok":true,"proved":true} | {"ok":false,"error":"<msg>"}
  augment -> same shape as apply (never proved)
  close   -> {"ok":true}

apply accepts an optional "timeout_ms" field; the toy environment ignores it
(a real toolchain server honors it). Error messages are prefixed with their
kind (UnknownSession:, UnknownState:, ParseError ..., BadRequest:, ...);
clients treat session/state/request-level prefixes as protocol failures and
everything else as an in-band tactic error.

Responses serialize compactly (no spaces, UTF-8, insertion order preserved)
so transcripts can be compared byte for byte.
"""

from __future__ import annotations

import json
import socket
import subprocess
import sys
from dataclasses import dataclass, field

from .model import ApplyKind, ApplyOutcome, TacticState
from .toyenv.env import DuplicateHypothesisName, ToySession, UnknownState, init_session
from .toyenv.terms import ToyParseError

__all__ = [
    "encode_message",
    "ToyEnvServer",
    "serve_stdio",
    "serve_tcp",
    "WireProtocolError",
    "WireSession",
    "connect_tcp",
    "spawn_stdio_server",
]

# ok:false prefixes that mean the request itself was bad, not the tactic
PROTOCOL_ERROR_PREFIXES = ("UnknownSession:", "UnknownState:", "BadRequest:")


def encode_message(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def _err(message: str) -> dict:
    return {"ok": False, "error": message}


class ToyEnvServer:
    """Protocol state machine over toy sessions; transport-agnostic."""

    def __init__(self) -> None:
        self._sessions: dict[int, ToySession] = {}
        self._next_session = 1

    def handle(self, request: dict) -> dict:
        cmd = request.get("cmd")
        if cmd == "init":
            return self._init(request)
        if cmd == "apply":
            return self._apply(request)
        if cmd == "augment":
            return self._augment(request)
        if cmd == "close":
            return self._close(request)
        return _err(f"BadRequest: unknown cmd {cmd!r}")

    def handle_line(self, line: str) -> str:
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            return encode_message(_err(f"BadRequest: invalid JSON: {exc.msg}"))
        if not isinstance(request, dict):
            return encode_message(_err("BadRequest: request must be an object"))
        return encode_message(self.handle(request))

    def _session(self, request: dict) -> ToySession:
        sid = request.get("session")
        session = self._sessions.get(sid)
        if session is None:
            raise KeyError(f"UnknownSession: {sid}")
        return session

    def _init(self, request: dict) -> dict:
        statement = request.get("theorem")
        if not isinstance(statement, str):
            return _err("BadRequest: init needs a theorem string")
        try:
            session, root = init_session(statement)
        except ToyParseError as exc:
            return _err(str(exc))
        sid = self._next_session
        self._next_session += 1
        self._sessions[sid] = session
        return {
            "ok": True,
            "session": sid,
            "state_id": root.state_id,
            "state": root.canonical_text,
        }

    def _apply(self, request: dict) -> dict:
        try:
            session = self._session(request)
            outcome = session.apply(int(request.get("state_id", -1)), str(request.get("tactic", "")))
        except (KeyError, UnknownState) as exc:
            return _err(str(exc).strip("'\""))
        if outcome.kind is ApplyKind.PROVED:
            return {"ok": True, "proved": True}
        if outcome.kind is ApplyKind.ERROR:
            return _err(outcome.error_message)
        state = outcome.new_state
        return {
            "ok": True,
            "proved": False,
            "state_id": state.state_id,
            "state": state.canonical_text,
        }

    def _augment(self, request: dict) -> dict:
        try:
            session = self._session(request)
            state = session.augment(
                int(request.get("state_id", -1)),
                str(request.get("name", "")),
                str(request.get("prop", "")),
            )
        except (KeyError, UnknownState) as exc:
            return _err(str(exc).strip("'\""))
        except (DuplicateHypothesisName, ToyParseError) as exc:
            return _err(str(exc))
        return {
            "ok": True,
            "proved": False,
            "state_id": state.state_id,
            "state": state.canonical_text,
        }

    def _close(self, request: dict) -> dict:
        sid = request.get("session")
        if sid not in self._sessions:
            return _err(f"UnknownSession: {sid}")
        self._sessions.pop(sid).close()
        return {"ok": True}


def serve_stdio(stdin=None, stdout=None) -> None:
    """Serve the protocol over text streams until EOF."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    server = ToyEnvServer()
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        stdout.write(server.handle_line(line))
        stdout.write("\n")
        stdout.flush()


def serve_tcp(host: str, port: int, max_connections: int | None = None) -> None:
    """Serve the protocol over TCP, one connection at a time (each connection
    gets its own server instance, so session ids are connection-scoped)."""
    listener = socket.create_server((host, port))
    served = 0
    try:
        while max_connections is None or served < max_connections:
            conn, _ = listener.accept()
            served += 1
            server = ToyEnvServer()
            with conn, conn.makefile("r", encoding="utf-8") as rd, conn.makefile(
                "w", encoding="utf-8"
            ) as wr:
                for line in rd:
                    line = line.strip()
                    if not line:
                        continue
                    wr.write(server.handle_line(line))
                    wr.write("\n")
                    wr.flush()
    finally:
        listener.close()


# --- client side -------------------------------------------------------------


class WireProtocolError(RuntimeError):
    """The remote environment rejected the request itself (bad session/state),
    lost the session, or sent a malformed response."""


class _Transport:
    def roundtrip(self, request: dict) -> dict:
        raise NotImplementedError

    def close(self) -> None:
        pass


class _StreamTransport(_Transport):
    def __init__(self, reader, writer):
        self._reader = reader
        self._writer = writer

    def roundtrip(self, request: dict) -> dict:
        self._writer.write(encode_message(request) + "\n")
        self._writer.flush()
        line = self._reader.readline()
        if not line:
            raise WireProtocolError("environment server closed the stream")
        try:
            response = json.loads(line)
        except json.JSONDecodeError as exc:
            raise WireProtocolError(f"malformed response: {exc.msg}")
        if not isinstance(response, dict) or "ok" not in response:
            raise WireProtocolError("response missing 'ok' field")
        return response


@dataclass
class WireSession:
    """Client-side session speaking the wire protocol; implements the same
    interface as ToySession (apply / augment / theorem_id / close)."""

    transport: _Transport
    theorem_id: str
    session_id: int = -1
    root: TacticState | None = field(default=None, repr=False)
    _root_text: str = ""

    def init(self, statement: str) -> str:
        response = self.transport.roundtrip({"cmd": "init", "theorem": statement})
        if not response.get("ok"):
            raise WireProtocolError(f"init failed: {response.get('error')}")
        self.session_id = response["session"]
        if response.get("state_id") != 0:
            raise WireProtocolError("init must return state_id 0")
        self._root_text = response["state"]
        return self._root_text

    @property
    def root_text(self) -> str:
        return self._root_text

    def apply(self, state_id: int, tactic: str, timeout_ms: int | None = None) -> ApplyOutcome:
        request = {
            "cmd": "apply",
            "session": self.session_id,
            "state_id": state_id,
            "tactic": tactic,
        }
        if timeout_ms is not None:
            request["timeout_ms"] = timeout_ms
        response = self.transport.roundtrip(request)
        if response.get("ok"):
            if response.get("proved"):
                return ApplyOutcome.proved()
            return ApplyOutcome.new_state_of(
                _remote_state(response["state_id"], response["state"])
            )
        message = response.get("error") or "unknown error"
        if message.startswith(PROTOCOL_ERROR_PREFIXES):
            raise WireProtocolError(message)
        return ApplyOutcome.error(message)

    def augment(self, state_id: int, name: str, prop: str) -> TacticState:
        response = self.transport.roundtrip(
            {
                "cmd": "augment",
                "session": self.session_id,
                "state_id": state_id,
                "name": name,
                "prop": prop,
            }
        )
        if not response.get("ok"):
            message = response.get("error") or "unknown error"
            if message.startswith(PROTOCOL_ERROR_PREFIXES):
                raise WireProtocolError(message)
            raise RuntimeError(message)
        return _remote_state(response["state_id"], response["state"])

    def close(self) -> None:
        try:
            self.transport.roundtrip({"cmd": "close", "session": self.session_id})
        finally:
            self.transport.close()


def _remote_state(state_id: int, text: str) -> TacticState:
    """Remote states carry opaque canonical text; goals are not re-parsed
    client-side, so construct a text-only view."""
    state = TacticState.__new__(TacticState)
    object.__setattr__(state, "state_id", state_id)
    object.__setattr__(state, "goals", ())
    object.__setattr__(state, "canonical_text", text)
    return state


def open_wire_session(
    host: str, port: int, statement: str, theorem_id: str
) -> tuple[WireSession, TacticState]:
    """Connect, init a session on the statement, and hand back the root state;
    the environment-factory shape the search and sprint layers expect."""
    session = connect_tcp(host, port, theorem_id)
    root_text = session.init(statement)
    return session, _remote_state(0, root_text)


def connect_tcp(host: str, port: int, theorem_id: str = "remote") -> WireSession:
    sock = socket.create_connection((host, port))
    reader = sock.makefile("r", encoding="utf-8")
    writer = sock.makefile("w", encoding="utf-8")
    transport = _StreamTransport(reader, writer)
    transport.close = lambda: (reader.close(), writer.close(), sock.close())  # type: ignore[method-assign]
    return WireSession(transport=transport, theorem_id=theorem_id)


def spawn_stdio_server(argv: list[str], theorem_id: str = "remote") -> WireSession:
    """Spawn a protocol server subprocess and attach a session to its stdio."""
    proc = subprocess.Popen(
        argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, encoding="utf-8"
    )
    transport = _StreamTransport(proc.stdout, proc.stdin)

    def close() -> None:
        try:
            proc.stdin.close()
        except Exception:
            pass
        proc.wait(timeout=10)

    transport.close = close  # type: ignore[method-assign]
    return WireSession(transport=transport, theorem_id=theorem_id)
