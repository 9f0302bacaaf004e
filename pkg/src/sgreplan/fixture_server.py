"""Replay server for the remote reasoner protocol.

Responses are stored as request-hash -> response document pairs. The server
can also misbehave on purpose (malformed JSON, out-of-vocabulary actions,
stalling past the client's timeout) to exercise the client's fallback path.
"""
from __future__ import annotations

import hashlib
import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional

from .core import canonical_json
from .replan import ReasonRequest, RuleReasoner

MODES = ("valid", "malformed", "out_of_vocabulary", "timeout")


def request_key(doc: dict) -> str:
    return hashlib.sha256(canonical_json(doc).encode()).hexdigest()


def rule_response(req: ReasonRequest, rules: Optional[RuleReasoner] = None) -> dict:
    """The response document the rule table would give for ``req``."""
    rules = rules or RuleReasoner()
    diag = rules.diagnose(req)
    return {"diagnosis": diag.to_doc(), "recovery": rules.propose(diag, req).to_doc()}


class FixtureStore:
    """Request/response pairs keyed by request hash; JSON-lines on disk."""

    def __init__(self, pairs: Optional[dict] = None):
        self.pairs = dict(pairs or {})

    def add(self, req: ReasonRequest, response: dict) -> None:
        self.pairs[req.request_hash()] = response

    def get(self, key: str) -> Optional[dict]:
        return self.pairs.get(key)

    def save(self, path) -> None:
        lines = [canonical_json({"request": k, "response": v}) for k, v in sorted(self.pairs.items())]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "FixtureStore":
        pairs = {}
        for ln in Path(path).read_text().splitlines():
            if ln.strip():
                doc = json.loads(ln)
                pairs[doc["request"]] = doc["response"]
        return cls(pairs)


class RecordingRules(RuleReasoner):
    """Rule table that also stores every answer it gives as a fixture."""

    def __init__(self, store: FixtureStore, park: str = "counter"):
        super().__init__(park)
        self.store = store

    def propose(self, diag, req):
        plan = super().propose(diag, req)
        self.store.add(req, {"diagnosis": diag.to_doc(), "recovery": plan.to_doc()})
        return plan


def _handler(server_ref):
    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            fx = server_ref()
            body = self.rfile.read(int(self.headers.get("Content-Length", 0)))
            fx.requests += 1
            if fx.mode == "timeout":
                time.sleep(fx.stall)
                return self._send(504, b"{}")
            if fx.mode == "malformed":
                return self._send(200, b'{"diagnosis": {"kind": "Occupied')
            doc = fx.store.get(request_key(json.loads(body)))
            if doc is None:
                return self._send(404, b'{"error": "no fixture"}')
            if fx.mode == "out_of_vocabulary":
                doc = json.loads(json.dumps(doc))
                doc["recovery"]["actions"] = [{"verb": "teleport", "args": ["robot_gripper"]}]
            self._send(200, json.dumps(doc).encode())

        def _send(self, code, payload):
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            try:
                self.wfile.write(payload)
            except OSError:  # client already gave up
                pass

        def log_message(self, *args):
            pass

    return Handler


class FixtureServer:
    """Local HTTP server in a daemon thread; use as a context manager."""

    def __init__(self, store: FixtureStore, mode: str = "valid", stall: float = 1.0):
        if mode not in MODES:
            raise ValueError(f"unknown fixture mode {mode!r}")
        self.store, self.mode, self.stall = store, mode, stall
        self.requests = 0
        self._httpd = None
        self._thread = None

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}/reason"

    def start(self) -> "FixtureServer":
        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), _handler(lambda: self))
        self._httpd.daemon_threads = True
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
            self._httpd = None

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
