"""HTTP + server-sent-events shim between the control socket and a browser.

Keeps the daemon protocol single: every console action round-trips through
the same control verbs the CLI uses.  Endpoints:

    GET  /api/state      full session snapshot (pending asks, diff, log)
    GET  /api/events     SSE stream; first event is a full-state resync
    POST /api/decision   {ask_id, verdict, install_path?, install_state?}
    POST /api/travel     {target}
    POST /api/commit     {}
    POST /api/abort      {}

Static files (the built console frontend) are served from --static when given.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import os
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from yolofs.errors import SessionError, YoloError
from yolofs.session import ControlClient, SubscriberClient

logger = logging.getLogger(__name__)

_POST_VERBS = {
    "/api/decision": "decision",
    "/api/travel": "travel",
    "/api/commit": "commit",
    "/api/abort": "abort",
}


def serve_console(socket_path, host, port, static_dir=None):
    handler = _make_handler(socket_path, static_dir)
    server = ThreadingHTTPServer((host, port), handler)
    print(f"console shim on http://{host}:{port} (daemon {socket_path})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def _make_handler(socket_path, static_dir):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            logger.debug("console: " + fmt, *args)

        def _json(self, code, obj):
            data = json.dumps(obj).encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(data)

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

        def do_GET(self):
            if self.path == "/api/state":
                try:
                    client = ControlClient(socket_path)
                    state = client.request("state")
                    client.close()
                    self._json(200, state)
                except (OSError, YoloError) as e:
                    self._json(502, {"error": str(e)})
            elif self.path == "/api/events":
                self._stream_events()
            else:
                self._static()

        def do_POST(self):
            verb = _POST_VERBS.get(self.path)
            if verb is None:
                self._json(404, {"error": "unknown endpoint"})
                return
            length = int(self.headers.get("Content-Length") or 0)
            body = self.rfile.read(length) if length else b"{}"
            try:
                payload = json.loads(body.decode("utf-8")) if body.strip() else {}
            except json.JSONDecodeError:
                self._json(400, {"error": "bad JSON"})
                return
            try:
                client = ControlClient(socket_path)
                result = client.request(verb, payload)
                client.close()
                self._json(200, result)
            except YoloError as e:
                self._json(409, {"error": str(e)})
            except OSError as e:
                self._json(502, {"error": str(e)})

        def _stream_events(self):
            try:
                sub = SubscriberClient(socket_path)
                state = sub.request("state")
            except (OSError, YoloError) as e:
                self._json(502, {"error": str(e)})
                return
            self.send_response(200)
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            try:
                self._sse({"event": "state", "state": state})
                while True:
                    event = sub.next_event(timeout=15.0)
                    if event is None:
                        if not sub._thread.is_alive():
                            break
                        self._sse({"event": "keepalive"})
                        continue
                    self._sse(event)
            except (BrokenPipeError, ConnectionResetError):
                pass
            finally:
                sub.close()

        def _sse(self, obj):
            self.wfile.write(f"data: {json.dumps(obj)}\n\n".encode("utf-8"))
            self.wfile.flush()

        def _static(self):
            if not static_dir:
                self._json(404, {"error": "no static directory configured"})
                return
            rel = self.path.lstrip("/") or "index.html"
            target = os.path.normpath(os.path.join(static_dir, rel))
            if not target.startswith(os.path.abspath(static_dir)):
                self._json(403, {"error": "forbidden"})
                return
            if os.path.isdir(target):
                target = os.path.join(target, "index.html")
            if not os.path.exists(target):
                self._json(404, {"error": "not found"})
                return
            ctype = mimetypes.guess_type(target)[0] or "application/octet-stream"
            with open(target, "rb") as f:
                data = f.read()
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(data)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(data)

    return Handler
