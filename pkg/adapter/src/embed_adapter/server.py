"""HTTP embedding service implementing the /embed contract.

POST /embed with {"inputs": [{"id": ..., "text": ...}, ...]} returns
{"dim": D, "vectors": [{"id": ..., "v": [...]}, ...]} in request order.
GET /healthz returns 200. Batches larger than max_batch get 413 with the
limit named in the body. Model inference is serialized with a lock so one
loaded model safely serves concurrent requests.
"""
from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .models import load_model

log = logging.getLogger(__name__)

DEFAULT_MAX_BATCH = 256


def make_server(model_id: str, port: int = 0, max_batch: int = DEFAULT_MAX_BATCH):
    """Build (not start) the server; .server_address carries the bound port."""
    model = load_model(model_id)
    lock = threading.Lock()

    class Handler(BaseHTTPRequestHandler):
        def _send(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            if self.path == "/healthz":
                self._send(200, {"status": "ok", "dim": model.dim})
            else:
                self._send(404, {"error": "unknown path"})

        def do_POST(self):
            if self.path != "/embed":
                self._send(404, {"error": "unknown path"})
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                body = json.loads(self.rfile.read(length))
                inputs = body["inputs"]
                items = [(str(item["id"]), str(item["text"])) for item in inputs]
            except (ValueError, KeyError, TypeError) as exc:
                self._send(400, {"error": f"malformed request: {exc}"})
                return
            if len(items) > max_batch:
                self._send(413, {"error": f"batch of {len(items)} exceeds limit {max_batch}",
                                 "max_batch": max_batch})
                return
            with lock:
                vectors = model.encode([text for _, text in items])
            self._send(200, {
                "dim": model.dim,
                "vectors": [
                    {"id": id_, "v": [float(x) for x in vec]}
                    for (id_, _), vec in zip(items, vectors)
                ],
            })

        def log_message(self, fmt, *args):
            log.debug("http: " + fmt, *args)

    return ThreadingHTTPServer(("127.0.0.1", port), Handler)


def serve(model_id: str, port: int, max_batch: int = DEFAULT_MAX_BATCH) -> None:
    server = make_server(model_id, port, max_batch)
    log.info("serving /embed on port %d", server.server_address[1])
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
