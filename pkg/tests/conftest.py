"""Pytest fixtures; shared builders live in helpers.py."""

from __future__ import annotations

import json
import os
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from predfuzz.verifier import SHIM_ENV_VAR

from helpers import SHIM_SCRIPT


@pytest.fixture(scope="session", autouse=True)
def shim_env():
    os.environ.setdefault(SHIM_ENV_VAR, str(SHIM_SCRIPT))
    return os.environ[SHIM_ENV_VAR]


class _StubChatHandler(BaseHTTPRequestHandler):
    def do_POST(self):  # noqa: N802 - http.server API
        length = int(self.headers.get("Content-Length", "0"))
        body = json.loads(self.rfile.read(length).decode("utf-8"))
        server = self.server
        with server.lock:
            server.requests.append(body)
            behavior = server.behavior
            if behavior["fail_first"] > 0:
                behavior["fail_first"] -= 1
                self.send_response(500)
                self.end_headers()
                self.wfile.write(b'{"error": "synthetic failure"}')
                return
            queue = server.responses.get(body.get("model"), [])
            content = queue.pop(0) if queue else "Test Case Input:\n0"
        payload = {"choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]}
        data = json.dumps(payload).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_provider():
    """Factory for a local chat-completions stub.

    start(responses, fail_first=0) -> base_url; responses maps model name
    to an ordered list of reply contents.
    """
    servers = []

    def start(responses: dict[str, list[str]], fail_first: int = 0) -> str:
        server = ThreadingHTTPServer(("127.0.0.1", 0), _StubChatHandler)
        server.responses = {k: list(v) for k, v in responses.items()}
        server.behavior = {"fail_first": fail_first}
        server.requests = []
        server.lock = threading.Lock()
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        servers.append((server, thread))
        host, port = server.server_address
        return f"http://{host}:{port}/v1"

    yield start
    for server, thread in servers:
        server.shutdown()
        thread.join(timeout=5)
        server.server_close()
