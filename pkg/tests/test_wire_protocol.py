"""Environment wire protocol: golden transcripts, schema conformance, client."""

import json
import os
import socket
import subprocess
import sys
import threading
import time
from pathlib import Path

import pytest

from stepprover.model import ApplyKind
from stepprover.wire import (
    ToyEnvServer,
    WireProtocolError,
    connect_tcp,
    encode_message,
    open_wire_session,
    serve_tcp,
    spawn_stdio_server,
)

FIXTURES = Path(__file__).parent / "fixtures" / "wire_golden"
GOLDEN_NAMES = sorted(p.name[: -len(".requests.jsonl")] for p in FIXTURES.glob("*.requests.jsonl"))

TOY_SERVER_ARGV = [sys.executable, "-m", "stepprover.cli", "serve-env"]

# Conformance profiles: statement the server can prove, a tactic sequence
# closing it, and a tactic it must reject. The lean bridge (when built) runs
# the same suite with its own profile -- shapes identical, content different.
SERVER_PROFILES = [
    pytest.param(
        TOY_SERVER_ARGV,
        {
            "statement": "add (S 0) 0 = S 0",
            "proof": ["add_zero", "refl"],
            "bad_tactic": "frobnicate",
            "bad_statement": "add (S 0",
            "fact": ("h0", "0 = 0"),
        },
        id="toy-env",
    ),
]


def _bridge_profile():
    bridge = Path(__file__).parent.parent / "bridge"
    server_js = bridge / "dist" / "server.js"
    mock_repl = bridge / "test" / "mock_repl.js"
    if not server_js.exists():
        return None
    return (
        ["node", str(server_js), "--repl-cmd", f"node {mock_repl}"],
        {
            "statement": "demo_theorem",
            "proof": ["intro h", "exact h"],
            "bad_tactic": "foo!",
            "bad_statement": "no_such_theorem",
            "fact": ("h0", "P0"),
        },
    )


_bridge = _bridge_profile()
if _bridge is not None:
    SERVER_PROFILES.append(pytest.param(*_bridge, id="lean-bridge"))


@pytest.mark.parametrize("name", GOLDEN_NAMES)
def test_golden_transcripts_byte_exact(name):
    """The committed transcripts replay byte for byte over subprocess stdio."""
    requests = (FIXTURES / f"{name}.requests.jsonl").read_bytes()
    expected = (FIXTURES / f"{name}.responses.jsonl").read_bytes()
    proc = subprocess.run(
        TOY_SERVER_ARGV, input=requests, stdout=subprocess.PIPE, timeout=60
    )
    assert proc.returncode == 0
    assert proc.stdout == expected


def test_golden_transcripts_in_process():
    """The same transcripts hold against the in-process server object."""
    for name in GOLDEN_NAMES:
        server = ToyEnvServer()
        requests = (FIXTURES / f"{name}.requests.jsonl").read_text(encoding="utf-8")
        expected = (FIXTURES / f"{name}.responses.jsonl").read_text(encoding="utf-8")
        got = "".join(server.handle_line(line) + "\n" for line in requests.splitlines() if line)
        assert got == expected


@pytest.mark.parametrize("argv,profile", SERVER_PROFILES)
def test_protocol_schema_conformance(argv, profile):
    """Shape checks every conforming server must pass."""
    session = spawn_stdio_server(argv, theorem_id="conformance")
    try:
        rt = session.transport.roundtrip

        response = rt({"cmd": "init", "theorem": profile["statement"]})
        assert response["ok"] is True
        assert isinstance(response["session"], int)
        assert response["state_id"] == 0
        assert isinstance(response["state"], str) and response["state"]
        sid = response["session"]

        response = rt({"cmd": "init", "theorem": profile["bad_statement"]})
        assert response["ok"] is False and isinstance(response["error"], str)

        state_id = 0
        for i, tactic in enumerate(profile["proof"]):
            response = rt(
                {"cmd": "apply", "session": sid, "state_id": state_id, "tactic": tactic}
            )
            assert response["ok"] is True
            if i < len(profile["proof"]) - 1:
                assert response["proved"] is False
                assert isinstance(response["state_id"], int)
                assert isinstance(response["state"], str)
                state_id = response["state_id"]
            else:
                assert response == {"ok": True, "proved": True}

        response = rt(
            {"cmd": "apply", "session": sid, "state_id": 0, "tactic": profile["bad_tactic"]}
        )
        assert response["ok"] is False and isinstance(response["error"], str)

        # optional timeout_ms is accepted (honored or ignored, never an error shape)
        response = rt(
            {
                "cmd": "apply",
                "session": sid,
                "state_id": 0,
                "tactic": profile["bad_tactic"],
                "timeout_ms": 1000,
            }
        )
        assert response["ok"] is False

        name, prop = profile["fact"]
        response = rt(
            {"cmd": "augment", "session": sid, "state_id": 0, "name": name, "prop": prop}
        )
        assert response["ok"] is True and response["proved"] is False
        assert isinstance(response["state_id"], int) and isinstance(response["state"], str)

        response = rt({"cmd": "apply", "session": 999, "state_id": 0, "tactic": "x"})
        assert response["ok"] is False

        assert rt({"cmd": "close", "session": sid}) == {"ok": True}
        response = rt({"cmd": "close", "session": sid})
        assert response["ok"] is False
    finally:
        session.transport.close()


def test_wire_session_client_roundtrip():
    session = spawn_stdio_server(TOY_SERVER_ARGV, theorem_id="client")
    try:
        root_text = session.init("add (S 0) 0 = S 0")
        assert root_text == "⊢ add (S 0) 0 = S 0"
        outcome = session.apply(0, "add_zero")
        assert outcome.kind is ApplyKind.NEW_STATE
        assert outcome.new_state.canonical_text == "⊢ S 0 = S 0"
        assert not outcome.new_state.is_proved
        assert session.apply(outcome.new_state.state_id, "refl").kind is ApplyKind.PROVED
        # tactic failure comes back in-band
        err = session.apply(0, "frobnicate")
        assert err.kind is ApplyKind.ERROR and "UnknownTactic" in err.error_message
        # protocol failure raises
        with pytest.raises(WireProtocolError):
            session.apply(999, "refl")
        aug = session.augment(0, "h", "0 = 0")
        assert "h : 0 = 0" in aug.canonical_text
    finally:
        session.close()


def test_tcp_server_and_search_over_wire():
    """A real search runs unchanged against the TCP environment server."""
    from stepprover.policy import TabularPolicy
    from stepprover.search import SearchBudget, SearchOutcome, run_search

    listener = socket.create_server(("127.0.0.1", 0))
    port = listener.getsockname()[1]
    listener.close()
    server_thread = threading.Thread(
        target=serve_tcp, args=("127.0.0.1", port), kwargs={"max_connections": 1}, daemon=True
    )
    server_thread.start()
    deadline = time.monotonic() + 5
    session = None
    while time.monotonic() < deadline:
        try:
            session, root = open_wire_session(
                "127.0.0.1", port, "add (S 0) 0 = S 0", "wire-thm"
            )
            break
        except OSError:
            time.sleep(0.05)
    assert session is not None, "TCP server did not come up"
    result = run_search(
        session, TabularPolicy(), root, SearchBudget(100, 5), width=7, alpha=0.0
    )
    session.close()
    assert result.outcome is SearchOutcome.PROVED
    assert [c.tactic for c in result.proof] == ["add_zero", "refl"]


def test_server_session_isolation():
    server = ToyEnvServer()
    a = json.loads(server.handle_line(encode_message({"cmd": "init", "theorem": "S 0 = S 0"})))
    b = json.loads(server.handle_line(encode_message({"cmd": "init", "theorem": "0 = 0"})))
    assert a["session"] != b["session"]
    response = json.loads(
        server.handle_line(
            encode_message(
                {"cmd": "apply", "session": b["session"], "state_id": 0, "tactic": "refl"}
            )
        )
    )
    assert response == {"ok": True, "proved": True}
    # session a unaffected
    response = json.loads(
        server.handle_line(
            encode_message(
                {"cmd": "apply", "session": a["session"], "state_id": 0, "tactic": "refl"}
            )
        )
    )
    assert response == {"ok": True, "proved": True}
