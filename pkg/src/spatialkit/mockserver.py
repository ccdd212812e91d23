"""Scripted OpenAI-compatible chat server for offline runs and tests.

Speaks the same wire protocol as real endpoints, so the whole pipeline can be
exercised with zero live network access. Behavior is driven by a script: an
ordered rule list matched against the request text (first match wins), plus a
default reply. Control endpoints expose call counters and the concurrency
high-water mark for assertions.
"""

from __future__ import annotations

import json
import re
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

__all__ = ["ScriptRule", "MockScript", "MockChatServer", "run_from_file"]


@dataclass
class ScriptRule:
    """One scripted behavior.

    ``contains``/``pattern`` match against the concatenated text parts of the
    request; ``status`` != 200 simulates provider failures; ``times`` limits
    how often the rule fires (None = unlimited).
    """

    response: str = ""
    contains: str | None = None
    pattern: str | None = None
    status: int = 200
    delay_s: float = 0.0
    times: int | None = None
    fired: int = 0

    def matches(self, text: str) -> bool:
        if self.times is not None and self.fired >= self.times:
            return False
        if self.contains is not None and self.contains not in text:
            return False
        if self.pattern is not None and not re.search(self.pattern, text):
            return False
        return True


@dataclass
class MockScript:
    rules: list[ScriptRule] = field(default_factory=list)
    default_response: str = "ok"
    default_status: int = 200
    default_delay_s: float = 0.0

    @classmethod
    def from_dict(cls, payload: dict) -> "MockScript":
        rules = [
            ScriptRule(
                response=r.get("response", ""),
                contains=r.get("contains"),
                pattern=r.get("pattern"),
                status=r.get("status", 200),
                delay_s=r.get("delay_s", 0.0),
                times=r.get("times"),
            )
            for r in payload.get("rules", [])
        ]
        return cls(
            rules=rules,
            default_response=payload.get("default", "ok"),
            default_status=payload.get("default_status", 200),
            default_delay_s=payload.get("default_delay_s", 0.0),
        )


def _request_text(body: dict) -> str:
    chunks = []
    for message in body.get("messages", []):
        content = message.get("content", "")
        if isinstance(content, str):
            chunks.append(content)
            continue
        for part in content:
            if part.get("type") == "text":
                chunks.append(part.get("text", ""))
    return "\n".join(chunks)


class MockChatServer:
    """Threaded HTTP server scripted through a MockScript."""

    def __init__(self, script: MockScript | None = None, host: str = "127.0.0.1", port: int = 0):
        self.script = script or MockScript()
        self._lock = threading.Lock()
        self.calls = 0
        self.in_flight = 0
        self.high_water = 0
        self.request_log: list[dict] = []

        server = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):  # quiet
                pass

            def _send(self, status: int, payload: dict) -> None:
                data = json.dumps(payload).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def do_GET(self):
                if self.path == "/__stats__":
                    self._send(200, server.stats())
                else:
                    self._send(404, {"error": "not found"})

            def do_POST(self):
                if self.path == "/__reset__":
                    server.reset()
                    self._send(200, {"ok": True})
                    return
                if self.path not in ("/chat/completions", "/v1/chat/completions"):
                    self._send(404, {"error": f"no route {self.path}"})
                    return
                length = int(self.headers.get("Content-Length", "0"))
                body = json.loads(self.rfile.read(length) or b"{}")
                text = _request_text(body)

                with server._lock:
                    server.calls += 1
                    server.in_flight += 1
                    server.high_water = max(server.high_water, server.in_flight)
                    server.request_log.append({"model": body.get("model"), "text": text})
                    rule = next(
                        (r for r in server.script.rules if r.matches(text)), None
                    )
                    if rule is not None:
                        rule.fired += 1
                try:
                    if rule is not None:
                        delay, status, reply = rule.delay_s, rule.status, rule.response
                    else:
                        delay = server.script.default_delay_s
                        status = server.script.default_status
                        reply = server.script.default_response
                    if delay:
                        time.sleep(delay)
                    if status != 200:
                        self._send(status, {"error": {"message": reply or "scripted failure"}})
                        return
                    self._send(200, {
                        "id": f"mock-{server.calls}",
                        "object": "chat.completion",
                        "model": body.get("model", "mock"),
                        "choices": [{
                            "index": 0,
                            "message": {"role": "assistant", "content": reply},
                            "finish_reason": "stop",
                        }],
                        "usage": {"prompt_tokens": 0, "completion_tokens": 0},
                    })
                finally:
                    with server._lock:
                        server.in_flight -= 1

        self._httpd = ThreadingHTTPServer((host, port), Handler)
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)

    @property
    def base_url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def stats(self) -> dict:
        with self._lock:
            return {
                "calls": self.calls,
                "in_flight": self.in_flight,
                "high_water": self.high_water,
            }

    def reset(self) -> None:
        with self._lock:
            self.calls = 0
            self.high_water = 0
            self.request_log.clear()
            for rule in self.script.rules:
                rule.fired = 0

    def start(self) -> "MockChatServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()

    def __enter__(self) -> "MockChatServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def run_from_file(script_path: str, host: str, port: int) -> None:
    """Blocking entry point for the CLI subcommand."""
    import yaml

    with open(script_path, "r", encoding="utf-8") as f:
        payload = yaml.safe_load(f) or {}
    server = MockChatServer(MockScript.from_dict(payload), host=host, port=port)
    print(f"mock chat server listening on {server.base_url}")
    server.start()
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        server.stop()
