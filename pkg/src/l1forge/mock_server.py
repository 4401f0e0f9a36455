"""In-process OpenAI-compatible chat-completions server for offline tests and demos."""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable


def echo_examples(body: dict) -> str:
    """Default responder: return the numbered example lines of the prompt, one per line."""
    prompt = body["messages"][-1]["content"]
    lines = []
    for line in prompt.splitlines():
        head, _, rest = line.partition(". ")
        if head.isdigit() and rest:
            lines.append(rest)
    return "\n".join(lines) or "No sentences."


class MockChatServer:
    """Serve ``POST /chat/completions`` on localhost with a pluggable responder.

    Records every request body, tracks the peak number of concurrently handled
    requests, and answers with ``fail_status`` for the first ``fail_first`` requests
    and for every request after the first ``fail_after``.
    """

    def __init__(
        self,
        responder: Callable[[dict], str] = echo_examples,
        delay: float = 0.0,
        fail_first: int = 0,
        fail_status: int = 503,
        fail_after: int | None = None,
    ):
        self.responder = responder
        self.delay = delay
        self.fail_first = fail_first
        self.fail_status = fail_status
        self.fail_after = fail_after
        self.requests: list[dict] = []
        self.headers: list[dict] = []
        self.in_flight = 0
        self.max_in_flight = 0
        self._lock = threading.Lock()
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def _handler(self):
        mock = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                if self.path.rstrip("/") != "/chat/completions":
                    self.send_error(404)
                    return
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length) or b"{}")
                with mock._lock:
                    mock.requests.append(body)
                    mock.headers.append(dict(self.headers))
                    n = len(mock.requests)
                    mock.in_flight += 1
                    mock.max_in_flight = max(mock.max_in_flight, mock.in_flight)
                try:
                    if mock.delay:
                        time.sleep(mock.delay)
                    if n <= mock.fail_first or (mock.fail_after is not None and n > mock.fail_after):
                        self.send_error(mock.fail_status)
                        return
                    content = mock.responder(body)
                    payload = json.dumps(
                        {
                            "id": f"mock-{n}",
                            "object": "chat.completion",
                            "model": body.get("model", "mock"),
                            "choices": [
                                {"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}
                            ],
                        }
                    ).encode("utf-8")
                    self.send_response(200)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(payload)))
                    self.end_headers()
                    self.wfile.write(payload)
                finally:
                    with mock._lock:
                        mock.in_flight -= 1

        return Handler

    def start(self) -> "MockChatServer":
        self._server = ThreadingHTTPServer(("127.0.0.1", 0), self._handler())
        self._server.daemon_threads = True
        self._thread = threading.Thread(target=self._server.serve_forever, args=(0.05,), daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None

    def __enter__(self) -> "MockChatServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
