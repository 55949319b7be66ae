"""Tagger Wire Protocol: newline-delimited JSON over stdio or TCP.

Request:  {"id": str, "tokens": [str, ...], "base_len": int}
Response: {"id": str, "labels": [str, ...]} or {"id": str, "error": str}
A {"op": "ping"} / {"op": "pong"} exchange precedes batches.
"""

from __future__ import annotations

import json
import shlex
import socket
import subprocess
import threading
from dataclasses import dataclass, field
from queue import Empty, Queue
from typing import Optional


class WireError(RuntimeError):
    pass


class Endpoint:
    """One NDJSON peer: a child process (cmd:...) or a TCP server (tcp:host:port)."""

    def __init__(self, descriptor: str, timeout: float = 30.0):
        self.descriptor = descriptor
        self.timeout = timeout
        self._lock = threading.Lock()
        self._queue: Queue[Optional[str]] = Queue()
        if descriptor.startswith("cmd:"):
            self._proc = subprocess.Popen(
                shlex.split(descriptor[4:]),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
            self._writer = self._proc.stdin
            reader = self._proc.stdout
        elif descriptor.startswith("tcp:"):
            host, port = descriptor[4:].rsplit(":", 1)
            self._proc = None
            self._sock = socket.create_connection((host, int(port)), timeout=timeout)
            sockfile = self._sock.makefile("rw", encoding="utf-8", newline="\n")
            self._writer = sockfile
            reader = sockfile
        else:
            raise WireError(f"unknown endpoint descriptor: {descriptor!r} (want cmd:... or tcp:...)")
        self._reader_thread = threading.Thread(
            target=self._pump, args=(reader,), daemon=True
        )
        self._reader_thread.start()

    def _pump(self, reader):
        try:
            for line in reader:
                self._queue.put(line)
        except (OSError, ValueError):
            pass
        self._queue.put(None)

    def send(self, obj: dict) -> None:
        with self._lock:
            self._writer.write(json.dumps(obj, ensure_ascii=False) + "\n")
            self._writer.flush()

    def send_raw(self, line: str) -> None:
        with self._lock:
            self._writer.write(line + "\n")
            self._writer.flush()

    def recv(self) -> dict:
        try:
            line = self._queue.get(timeout=self.timeout)
        except Empty:
            raise WireError(f"timeout after {self.timeout}s waiting for {self.descriptor}")
        if line is None:
            raise WireError(f"endpoint {self.descriptor} closed the connection")
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise WireError(f"invalid JSON from endpoint: {line!r} ({exc})")

    def ping(self) -> None:
        self.send({"op": "ping"})
        resp = self.recv()
        if resp.get("op") != "pong":
            raise WireError(f"expected pong, got {resp!r}")

    def close(self) -> None:
        try:
            self._writer.close()
        except OSError:
            pass
        if self._proc is not None:
            try:
                self._proc.terminate()
                self._proc.wait(timeout=5)
            except (OSError, subprocess.TimeoutExpired):
                self._proc.kill()
        elif hasattr(self, "_sock"):
            self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# ---------------------------------------------------------------------------
# Conformance harness (also exercised against external adapter implementations)


@dataclass
class ConformanceReport:
    pings_ok: bool = False
    requests_sent: int = 0
    responses_ok: int = 0
    malformed_sent: int = 0
    malformed_handled: int = 0
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (
            self.pings_ok
            and not self.failures
            and self.responses_ok == self.requests_sent
            and self.malformed_handled == self.malformed_sent
        )


def run_conformance(
    descriptor: str,
    n_requests: int = 200,
    n_malformed: int = 50,
    seed: int = 0,
    timeout: float = 30.0,
) -> ConformanceReport:
    """Drive an adapter through ping/pong, random batches, and malformed lines.

    Length agreement is required on every well-formed request; malformed lines
    must produce an error response (or be survivable) without killing the peer.
    """
    import random

    from .labels import Label

    rng = random.Random(seed)
    report = ConformanceReport()
    words = ["दिल्ली", "भारत", "साहित्य", "विकी", "गाँव", "नदी"]
    with Endpoint(descriptor, timeout=timeout) as ep:
        try:
            ep.ping()
            report.pings_ok = True
        except WireError as exc:
            report.failures.append(f"ping: {exc}")
            return report

        for i in range(n_requests):
            n = rng.randint(1, 12)
            tokens = [rng.choice(words) for _ in range(n)]
            base_len = rng.randint(1, n)
            req = {"id": f"req-{i}", "tokens": tokens, "base_len": base_len}
            ep.send(req)
            report.requests_sent += 1
            resp = ep.recv()
            if resp.get("id") != req["id"]:
                report.failures.append(f"req-{i}: id mismatch in {resp!r}")
                continue
            labels = resp.get("labels")
            if not isinstance(labels, list) or len(labels) != n:
                report.failures.append(f"req-{i}: expected {n} labels, got {labels!r}")
                continue
            try:
                for tag in labels:
                    Label.parse(tag)
            except ValueError as exc:
                report.failures.append(f"req-{i}: {exc}")
                continue
            report.responses_ok += 1

        malformed = [
            "{not json",
            '{"tokens": ["a"]}',  # missing id
            '{"id": "x"}',  # missing tokens
            '{"id": "x", "tokens": "nope", "base_len": 1}',
            "[1, 2, 3]",
        ]
        for i in range(n_malformed):
            ep.send_raw(malformed[i % len(malformed)])
            report.malformed_sent += 1
            resp = ep.recv()
            if "error" in resp or resp.get("op") == "error":
                report.malformed_handled += 1
            else:
                report.failures.append(f"malformed {i}: no error response, got {resp!r}")
        # peer must still be alive
        try:
            ep.ping()
        except WireError as exc:
            report.failures.append(f"post-fuzz ping: {exc}")
            report.pings_ok = False
    return report
