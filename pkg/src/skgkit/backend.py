"""Newline-delimited JSON protocol for external imagination/verbalization backends.

Each request is one JSON object on one line; the backend answers each
request with exactly one line, in order::

    -> {"kind": "imagine", "context": "...", "concepts": ["..."]}
    <- {"penman": "..."}                      or {"error": "..."}
    -> {"kind": "verbalize", "context": "...", "concepts": ["..."], "penman": "..."}
    <- {"text": "..."}                        or {"error": "..."}

Endpoints are written ``tcp://HOST:PORT``, ``unix:PATH`` or
``stdio:COMMAND`` (the client spawns COMMAND and talks over its pipes).
"""

from __future__ import annotations

import json
import logging
import os
import select
import shlex
import socket
import socketserver
import subprocess
import threading
import time
from typing import Callable, TextIO

from .graph import SKGError
from .imagination import ImaginationRequest, ImaginationResult
from .penman_codec import PenmanError, decode_with_warnings, encode

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 30.0
DEFAULT_RETRIES = 2


class BackendFailure(SKGError):
    """Base class for everything that can go wrong talking to a backend."""


class TransportError(BackendFailure):
    """Connection-level failure; these are retried."""


class BackendConnectionError(TransportError):
    pass


class BackendTimeout(TransportError):
    pass


class MalformedPayload(BackendFailure):
    pass


class UndecodableGraph(MalformedPayload):
    pass


class BackendError(BackendFailure):
    """The backend answered with an ``error`` payload."""


# --------------------------------------------------------------------------
# transports


class _SocketTransport:
    def __init__(self, family: int, address) -> None:
        self.family = family
        self.address = address

    def exchange(self, line: bytes, timeout: float) -> bytes:
        deadline = time.monotonic() + timeout
        try:
            sock = socket.socket(self.family, socket.SOCK_STREAM)
            sock.settimeout(timeout)
            sock.connect(self.address)
        except socket.timeout:
            raise BackendTimeout(f"connecting to {self.address} timed out") from None
        except OSError as exc:
            raise BackendConnectionError(f"cannot connect to {self.address}: {exc}") from None
        with sock:
            try:
                sock.sendall(line)
                buf = b""
                while b"\n" not in buf:
                    remaining = deadline - time.monotonic()
                    if remaining <= 0:
                        raise socket.timeout
                    sock.settimeout(remaining)
                    chunk = sock.recv(65536)
                    if not chunk:
                        raise BackendConnectionError("backend closed the connection")
                    buf += chunk
            except socket.timeout:
                raise BackendTimeout(f"no response within {timeout:g}s") from None
            except OSError as exc:
                raise BackendConnectionError(str(exc)) from None
        return buf.split(b"\n", 1)[0]

    def close(self) -> None:
        pass


class _StdioTransport:
    """A long-lived child process; requests are serialized over its pipes."""

    def __init__(self, command: str) -> None:
        self.argv = shlex.split(command)
        self.proc: subprocess.Popen | None = None
        self.buf = b""
        self.lock = threading.Lock()

    def _ensure(self) -> subprocess.Popen:
        if self.proc is None or self.proc.poll() is not None:
            try:
                self.proc = subprocess.Popen(
                    self.argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, bufsize=0
                )
            except OSError as exc:
                self.proc = None
                raise BackendConnectionError(f"cannot start {self.argv[0]!r}: {exc}") from None
            self.buf = b""
        return self.proc

    def _reset(self) -> None:
        if self.proc is not None:
            self.proc.kill()
            self.proc.wait()
            for stream in (self.proc.stdin, self.proc.stdout):
                stream.close()
        self.proc = None
        self.buf = b""

    def exchange(self, line: bytes, timeout: float) -> bytes:
        with self.lock:
            deadline = time.monotonic() + timeout
            proc = self._ensure()
            try:
                proc.stdin.write(line)
                proc.stdin.flush()
            except OSError as exc:
                self._reset()
                raise BackendConnectionError(f"backend process is gone: {exc}") from None
            fd = proc.stdout.fileno()
            while b"\n" not in self.buf:
                remaining = deadline - time.monotonic()
                ready = select.select([fd], [], [], max(remaining, 0))[0] if remaining > 0 else []
                if not ready:
                    self._reset()
                    raise BackendTimeout(f"no response within {timeout:g}s")
                chunk = os.read(fd, 65536)
                if not chunk:
                    self._reset()
                    raise BackendConnectionError("backend process closed its output")
                self.buf += chunk
            out, self.buf = self.buf.split(b"\n", 1)
            return out

    def close(self) -> None:
        with self.lock:
            if self.proc is not None:
                self.proc.stdin.close()
                try:
                    self.proc.wait(timeout=2)
                except subprocess.TimeoutExpired:
                    pass
                self._reset()


def open_transport(endpoint: str):
    if endpoint.startswith("tcp://"):
        host, _, port = endpoint[len("tcp://"):].rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"bad tcp endpoint {endpoint!r}")
        return _SocketTransport(socket.AF_INET, (host, int(port)))
    if endpoint.startswith("unix:"):
        return _SocketTransport(socket.AF_UNIX, endpoint[len("unix:"):].removeprefix("//"))
    if endpoint.startswith("stdio:"):
        return _StdioTransport(endpoint[len("stdio:"):])
    raise ValueError(f"unknown endpoint scheme in {endpoint!r}")


# --------------------------------------------------------------------------
# client


class BackendClient:
    """Client for one endpoint; safe to share between threads."""

    def __init__(
        self,
        endpoint: str,
        timeout: float = DEFAULT_TIMEOUT,
        retries: int = DEFAULT_RETRIES,
        retry_delay: float = 0.0,
    ) -> None:
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries
        self.retry_delay = retry_delay
        self._transport = open_transport(endpoint)

    def close(self) -> None:
        self._transport.close()

    def __enter__(self) -> "BackendClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def call(self, payload: dict) -> dict:
        line = (json.dumps(payload, ensure_ascii=False) + "\n").encode("utf-8")
        for attempt in range(self.retries + 1):
            try:
                raw = self._transport.exchange(line, self.timeout)
                break
            except TransportError as exc:
                if attempt == self.retries:
                    raise
                log.info("backend %s attempt %d failed: %s", self.endpoint, attempt + 1, exc)
                if self.retry_delay:
                    time.sleep(self.retry_delay)
        try:
            reply = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise MalformedPayload(f"response is not JSON: {exc}") from None
        if not isinstance(reply, dict):
            raise MalformedPayload("response is not a JSON object")
        if "error" in reply:
            raise BackendError(str(reply["error"]))
        return reply

    def imagine(self, request: ImaginationRequest) -> ImaginationResult:
        reply = self.call({
            "kind": "imagine",
            "context": " ".join(request.context),
            "concepts": list(request.concepts),
        })
        text = reply.get("penman")
        if not isinstance(text, str):
            raise MalformedPayload("response lacks a 'penman' string")
        try:
            graph, warnings = decode_with_warnings(text, strict=False)
        except PenmanError as exc:
            raise UndecodableGraph(f"cannot decode backend graph: {exc}") from None
        for w in warnings:
            log.warning("backend graph repaired: %s", w)
        return ImaginationResult(graph.freeze(), warnings=tuple(warnings))

    def verbalize(self, request) -> str:
        reply = self.call({
            "kind": "verbalize",
            "context": " ".join(request.context),
            "concepts": list(request.concepts),
            "penman": encode(request.skg),
        })
        text = reply.get("text")
        if not isinstance(text, str):
            raise MalformedPayload("response lacks a 'text' string")
        return text


def external_imagine(endpoint: str, request: ImaginationRequest, **kwargs):
    with BackendClient(endpoint, **kwargs) as client:
        return client.imagine(request).graph


def external_verbalize(endpoint: str, request, **kwargs) -> str:
    with BackendClient(endpoint, **kwargs) as client:
        return client.verbalize(request)


# --------------------------------------------------------------------------
# server side


Handler = Callable[[dict], dict]


def make_handler(imaginer=None, verbalizer=None) -> Handler:
    """Dispatch protocol requests to in-process backends."""
    from .verbalization import VerbalizationRequest

    def handle(req: dict) -> dict:
        kind = req.get("kind")
        context = tuple(str(req.get("context", "")).split())
        concepts = tuple(req.get("concepts", ()))
        if kind == "imagine" and imaginer is not None:
            result = imaginer.imagine(ImaginationRequest(context, concepts))
            return {"penman": encode(result.graph)}
        if kind == "verbalize" and verbalizer is not None:
            graph, _ = decode_with_warnings(str(req.get("penman", "")))
            return {"text": verbalizer.verbalize(VerbalizationRequest(context, concepts, graph))}
        return {"error": f"unsupported request kind {kind!r}"}

    return handle


def respond(handler: Handler, line: str) -> str:
    try:
        req = json.loads(line)
        if not isinstance(req, dict):
            raise ValueError("request is not a JSON object")
        reply = handler(req)
    except Exception as exc:  # noqa: BLE001 - every failure becomes an error payload
        reply = {"error": f"{type(exc).__name__}: {exc}"}
    return json.dumps(reply, ensure_ascii=False)


def serve_stream(handler: Handler, infile: TextIO, outfile: TextIO) -> None:
    for line in infile:
        if line.strip():
            outfile.write(respond(handler, line) + "\n")
            outfile.flush()


def serve_tcp(handler: Handler, host: str = "127.0.0.1", port: int = 0) -> socketserver.ThreadingTCPServer:
    """Start a threaded TCP server in the background and return it (``server_address`` has the port)."""

    class _Lines(socketserver.StreamRequestHandler):
        def handle(self) -> None:
            for raw in self.rfile:
                if raw.strip():
                    reply = respond(handler, raw.decode("utf-8"))
                    self.wfile.write((reply + "\n").encode("utf-8"))
                    self.wfile.flush()

    server = socketserver.ThreadingTCPServer((host, port), _Lines)
    server.daemon_threads = True
    threading.Thread(target=server.serve_forever, daemon=True).start()
    return server
