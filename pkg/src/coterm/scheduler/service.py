"""HTTP face of the scheduler.

Plain HTTP/1.1 with JSON bodies over a threading stdlib server; every
request maps to exactly one core operation, and protocol errors travel as
``{"error": code, "message": text}`` with the matching status code.  The
server can run blocking (the serve command) or on a background thread
(tests and simulations).
"""

from __future__ import annotations

import errno
import json
import logging
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from ..errors import CotermError, SchedulerError
from .core import SchedulerCore

logger = logging.getLogger(__name__)

_TASK_ACTION_RE = re.compile(r"^/v1/tasks/(\d+)/(heartbeat|takeover|result)$")


class AddressInUseError(CotermError):
    """The configured listen address is already bound."""


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "coterm"

    def log_message(self, fmt, *args):
        logger.debug("%s %s", self.address_string(), fmt % args)

    def _send_json(self, status: int, body: dict):
        data = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _read_json(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            return {}
        try:
            body = json.loads(raw)
        except ValueError:
            raise SchedulerError("request body is not valid JSON")
        if not isinstance(body, dict):
            raise SchedulerError("request body must be a JSON object")
        return body

    def do_POST(self):
        self._dispatch("POST")

    def do_GET(self):
        self._dispatch("GET")

    def _dispatch(self, method: str):
        core: SchedulerCore = self.server.core
        try:
            parsed = urlparse(self.path)
            path = parsed.path
            if method == "POST" and path == "/v1/resources":
                body = self._read_json()
                entry = core.register_resource(
                    resource_id=_need(body, "resource_id"),
                    name=str(body.get("name", "")),
                    n_docs=int(body.get("n_docs", 0)),
                    granularity=str(body.get("granularity", "abstract")),
                    uploader=str(body.get("uploader", "")),
                )
                self._send_json(200, _entry_dict(entry))
                return
            if method == "GET" and path == "/v1/resources":
                entries = core.list_resources()
                self._send_json(200, {"resources": [_entry_dict(e) for e in entries]})
                return
            if method == "POST" and path == "/v1/tasks/claim":
                body = self._read_json()
                response = core.claim_task(
                    client_id=_need(body, "client_id"),
                    resource_id=_need(body, "resource_id"),
                    pair_key=_need(body, "pair_key"),
                    case_mode=_need(body, "case_mode"),
                    data_transfer=bool(body.get("data_transfer", True)),
                    include_keys=bool(body.get("include_keys", False)),
                )
                self._send_json(
                    200,
                    {
                        "kind": response.kind,
                        "task_id": response.task_id,
                        "result": response.result,
                        "recovered": response.recovered,
                    },
                )
                return
            if method == "GET" and path == "/v1/tasks/status":
                query = parse_qs(parsed.query)
                status = core.task_status(
                    resource_id=_need_query(query, "resource_id"),
                    pair_key=_need_query(query, "pair_key"),
                    case_mode=_need_query(query, "case_mode"),
                )
                self._send_json(
                    200,
                    {
                        "status": status.status,
                        "stale": status.stale,
                        "task_id": status.task_id,
                        "result": status.result,
                    },
                )
                return
            match = _TASK_ACTION_RE.match(path) if method == "POST" else None
            if match:
                task_id = int(match.group(1))
                action = match.group(2)
                body = self._read_json()
                client_id = _need(body, "client_id")
                if action == "heartbeat":
                    core.heartbeat(task_id, client_id)
                    self._send_json(200, {"ok": True})
                elif action == "takeover":
                    granted = core.takeover(task_id, client_id)
                    self._send_json(200, {"granted": granted})
                else:
                    outcome = core.submit_result(
                        task_id, client_id, body.get("result") or {}
                    )
                    self._send_json(200, {"outcome": outcome})
                return
            self._send_json(404, {"error": "not_found", "message": "no route %s %s" % (method, path)})
        except SchedulerError as exc:
            self._send_json(exc.http_status, {"error": exc.code, "message": str(exc)})
        except Exception:
            logger.exception("unhandled error serving %s %s", method, self.path)
            self._send_json(500, {"error": "internal", "message": "internal error"})


def _need(body: dict, name: str) -> str:
    value = body.get(name)
    if not isinstance(value, str) or value == "":
        raise SchedulerError("missing field %r" % name)
    return value


def _need_query(query: dict, name: str) -> str:
    values = query.get(name)
    if not values or values[0] == "":
        raise SchedulerError("missing query parameter %r" % name)
    return values[0]


def _entry_dict(entry) -> dict:
    return {
        "resource_id": entry.resource_id,
        "name": entry.name,
        "n_docs": entry.n_docs,
        "granularity": entry.granularity,
        "uploader": entry.uploader,
        "registered_at": entry.registered_at,
    }


class SchedulerService:
    """A bound HTTP server wrapping one SchedulerCore."""

    def __init__(self, core: SchedulerCore, host: str = "127.0.0.1", port: int = 0):
        self.core = core
        try:
            self._server = ThreadingHTTPServer((host, port), _Handler)
        except OSError as exc:
            if exc.errno == errno.EADDRINUSE:
                raise AddressInUseError("%s:%d is already in use" % (host, port)) from None
            raise
        self._server.core = core
        self._server.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def host(self) -> str:
        return self._server.server_address[0]

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def url(self) -> str:
        return "http://%s:%d" % (self.host, self.port)

    def start_background(self) -> "SchedulerService":
        self._thread = threading.Thread(
            target=self._serve, name="scheduler-http", daemon=True
        )
        self._thread.start()
        logger.info("scheduler listening on %s", self.url)
        return self

    def serve_forever(self):
        logger.info("scheduler listening on %s", self.url)
        self._serve()

    def _serve(self):
        # Short poll so shutdown() returns promptly.
        self._server.serve_forever(poll_interval=0.05)

    def shutdown(self):
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None
