"""Wire protocol for external prover backends.

Frames are newline-delimited JSON over a local TCP socket or a child
process's standard streams. Every request carries a monotonically
increasing id echoed by the response.

Commands:
    {"id": n, "cmd": "init", "theory": t, "statement": s}
    {"id": n, "cmd": "step", "text": s, "timeout_ms": ms}
    {"id": n, "cmd": "hammer", "timeout_ms": ms}
    {"id": n, "cmd": "reset"}
    {"id": n, "cmd": "quit"}

Responses:
    {"id": n, "status": "ok", "state_id": s, "reconstruction": r?, "elapsed_ms": ms}
    {"id": n, "status": "fail", "reason": r, "elapsed_ms": ms}
    {"id": n, "status": "timeout", "elapsed_ms": ms}

A whole-proof check is expressed with the same five commands: reset, then
init with the full proof text as the statement, then one step echoing that
text. A conforming bridge treats a step that echoes the current statement
and starts with "theorem" as an end-to-end document check.

Run the reference server (scripted rules behind the wire protocol) with:
    python -m sketchprove.prover --script rules.json --port 9777
"""

from __future__ import annotations

import argparse
import json
import shlex
import socket
import socketserver
import subprocess
import sys
import threading
import time
from typing import IO

from .config import BackendReply, ConnectError, SessionDead
from .scripted import ScriptedBackend, load_script


def _is_document_check(text: str, current_statement: str | None) -> bool:
    return (
        current_statement is not None
        and text.strip() == current_statement.strip()
        and text.lstrip().startswith("theorem")
    )


class WireBackend:
    """Client side of the wire protocol; address is "host:port" for TCP or
    "stdio:<command line>" for a child process."""

    def __init__(self, address: str, connect_timeout_s: float = 5.0):
        self.address = address
        self._lock = threading.Lock()
        self._req_id = 0
        self._proc: subprocess.Popen | None = None
        self._last_statement: str | None = None
        try:
            if address.startswith("stdio:"):
                command = shlex.split(address[len("stdio:") :])
                self._proc = subprocess.Popen(
                    command,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    bufsize=1,
                )
                self._writer: IO[str] = self._proc.stdin  # type: ignore[assignment]
                self._reader: IO[str] = self._proc.stdout  # type: ignore[assignment]
            else:
                host, _, port = address.rpartition(":")
                sock = socket.create_connection(
                    (host or "127.0.0.1", int(port)), timeout=connect_timeout_s
                )
                sock.settimeout(None)
                self._sock = sock
                self._writer = sock.makefile("w", encoding="utf-8")
                self._reader = sock.makefile("r", encoding="utf-8")
        except (OSError, ValueError) as exc:
            raise ConnectError(address, str(exc)) from None

    def _roundtrip(self, cmd: str, reply_timeout_s: float = 30.0, **fields) -> dict:
        with self._lock:
            self._req_id += 1
            req_id = self._req_id
            frame = {"id": req_id, "cmd": cmd, **fields}
            started = time.monotonic()
            try:
                if self._proc is None:
                    # an unresponsive bridge must not stall the gap budget
                    self._sock.settimeout(reply_timeout_s)
                self._writer.write(json.dumps(frame) + "\n")
                self._writer.flush()
                line = self._reader.readline()
            except socket.timeout:
                raise SessionDead(
                    f"backend did not answer {cmd!r} within {reply_timeout_s:.0f}s"
                ) from None
            except (OSError, ValueError) as exc:
                raise SessionDead(str(exc)) from None
            if not line:
                raise SessionDead("backend closed the connection")
            try:
                reply = json.loads(line)
            except json.JSONDecodeError:
                raise SessionDead(f"unparseable frame: {line[:120]!r}") from None
            if reply.get("id") != req_id:
                raise SessionDead(
                    f"response id {reply.get('id')} does not echo request id {req_id}"
                )
            reply.setdefault("elapsed_ms", int((time.monotonic() - started) * 1000))
            return reply

    @staticmethod
    def _to_reply(raw: dict) -> BackendReply:
        return BackendReply(
            status=raw.get("status", "fail"),
            elapsed_ms=int(raw.get("elapsed_ms", 0)),
            state_id=raw.get("state_id"),
            reconstruction=raw.get("reconstruction"),
            reason=raw.get("reason"),
        )

    def init(self, theory: str, statement: str) -> BackendReply:
        self._last_statement = statement
        return self._to_reply(self._roundtrip("init", theory=theory, statement=statement))

    def step(self, text: str, timeout_ms: int) -> BackendReply:
        return self._to_reply(
            self._roundtrip(
                "step", reply_timeout_s=timeout_ms / 1000 + 30, text=text, timeout_ms=timeout_ms
            )
        )

    def hammer(self, timeout_ms: int) -> BackendReply:
        return self._to_reply(
            self._roundtrip("hammer", reply_timeout_s=timeout_ms / 1000 + 30, timeout_ms=timeout_ms)
        )

    def check_full(self, proof_text: str, timeout_ms: int) -> BackendReply:
        self.reset()
        self.init("Main", proof_text)
        return self.step(proof_text, timeout_ms)

    def reset(self) -> BackendReply:
        return self._to_reply(self._roundtrip("reset"))

    def quit(self) -> None:
        try:
            self._roundtrip("quit", reply_timeout_s=5.0)
        except SessionDead:
            pass
        finally:
            if self._proc is not None:
                self._proc.terminate()
                try:
                    self._proc.wait(timeout=5)
                except subprocess.TimeoutExpired:
                    self._proc.kill()


def _serve_connection(backend: ScriptedBackend, reader: IO[str], writer: IO[str]) -> None:
    current_statement: str | None = None
    for line in reader:
        line = line.strip()
        if not line:
            continue
        try:
            frame = json.loads(line)
            cmd = frame["cmd"]
            req_id = frame["id"]
        except (json.JSONDecodeError, KeyError):
            writer.write(json.dumps({"id": None, "status": "fail", "reason": "bad frame"}) + "\n")
            writer.flush()
            continue
        if cmd == "quit":
            writer.write(json.dumps({"id": req_id, "status": "ok", "elapsed_ms": 0}) + "\n")
            writer.flush()
            return
        if cmd == "init":
            current_statement = frame.get("statement", "")
            reply = backend.init(frame.get("theory", "Main"), current_statement)
        elif cmd == "step":
            text = frame.get("text", "")
            timeout_ms = int(frame.get("timeout_ms", 0))
            if _is_document_check(text, current_statement):
                reply = backend.check_full(text, timeout_ms)
            else:
                reply = backend.step(text, timeout_ms)
        elif cmd == "hammer":
            reply = backend.hammer(int(frame.get("timeout_ms", 0)))
        elif cmd == "reset":
            current_statement = None
            reply = backend.reset()
        else:
            reply = BackendReply("fail", 0, reason=f"unknown command {cmd!r}")
        payload = {"id": req_id, "status": reply.status, "elapsed_ms": reply.elapsed_ms}
        if reply.state_id is not None:
            payload["state_id"] = reply.state_id
        if reply.reconstruction is not None:
            payload["reconstruction"] = reply.reconstruction
        if reply.reason is not None:
            payload["reason"] = reply.reason
        writer.write(json.dumps(payload) + "\n")
        writer.flush()


class WireServer:
    """Reference TCP server: the scripted prover behind the wire protocol.
    Each connection gets an independent scripted session."""

    def __init__(self, script_path: str, host: str = "127.0.0.1", port: int = 0):
        script = load_script(script_path)

        class Handler(socketserver.StreamRequestHandler):
            wbufsize = -1  # buffered writes; the text wrapper flushes per frame

            def handle(self) -> None:
                import io

                backend = ScriptedBackend(script)
                reader = io.TextIOWrapper(self.rfile, encoding="utf-8")
                writer = io.TextIOWrapper(self.wfile, encoding="utf-8", write_through=True)
                try:
                    _serve_connection(backend, reader, writer)
                except (BrokenPipeError, ConnectionResetError, ValueError):
                    pass  # client went away mid-conversation

        class Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

            def handle_error(self, request, client_address) -> None:
                pass  # disconnects during teardown are routine

        self._server = Server((host, port), Handler)
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> str:
        host, port = self._server.server_address[:2]
        return f"{host}:{port}"

    def start(self) -> "WireServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="scripted prover behind the wire protocol")
    parser.add_argument("--script", required=True, help="prover script JSON")
    parser.add_argument("--port", type=int, default=0, help="TCP port (0 picks one)")
    parser.add_argument("--stdio", action="store_true", help="serve on stdin/stdout instead")
    args = parser.parse_args(argv)

    if args.stdio:
        backend = ScriptedBackend(load_script(args.script))
        _serve_connection(backend, sys.stdin, sys.stdout)
        return 0
    server = WireServer(args.script, port=args.port)
    print(f"listening on {server.address}", flush=True)
    try:
        server._server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
