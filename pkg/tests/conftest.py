"""Shared fixtures: the generated corpus and a throwaway local HTTP server."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from corpus import build_corpus


@pytest.fixture(scope="session")
def corpus_paths(tmp_path_factory):
    return build_corpus(tmp_path_factory.mktemp("corpus"))


@pytest.fixture()
def rng():
    return np.random.default_rng(0xC0FFEE)


class _RecordingHandler(BaseHTTPRequestHandler):
    # Assigned per-server in the factory below.
    respond = None
    requests_seen = None

    def do_POST(self):  # noqa: N802  (stdlib handler naming)
        length = int(self.headers.get("Content-Length", 0))
        body = self.rfile.read(length)
        self.requests_seen.append(
            {"path": self.path, "body": body, "headers": dict(self.headers)}
        )
        status, payload = self.respond(len(self.requests_seen), self.path, body)
        if isinstance(payload, (dict, list)):
            payload = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):  # keep pytest output clean
        pass


@pytest.fixture()
def http_server():
    """Factory for single-purpose HTTP servers.

    Usage: url, seen = http_server(lambda n, path, body: (200, {"text": "hi"})).
    The responder gets the 1-based request count, path, and raw body; seen
    collects every request for later assertions.
    """
    servers = []

    def make(respond):
        handler = type(
            "Handler",
            (_RecordingHandler,),
            {"respond": staticmethod(respond), "requests_seen": []},
        )
        server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
        threading.Thread(target=server.serve_forever, daemon=True).start()
        servers.append(server)
        return f"http://127.0.0.1:{server.server_address[1]}", handler.requests_seen

    yield make
    for server in servers:
        server.shutdown()
        server.server_close()
