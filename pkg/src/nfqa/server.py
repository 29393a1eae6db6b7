"""HTTP service wrapping the answering pipeline.

POST /ask {"question": ..., "method"?: llm|rag|typed, "type"?: ..., "trace"?: bool}
returns {"answer", "type", "method", "trace"?}. GET /healthz returns "ok".
Bad request bodies get 400, endpoint failures 502, anything else 500. All
shared state (index, clients, config) is read-only after startup.
"""

from __future__ import annotations

import json
import logging
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .config import AppConfig
from .core import InputError, NfqaError, NfqType, Question, TransportError

log = logging.getLogger(__name__)

METHODS = ("llm", "rag", "typed")


class NfqaServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, pipeline):
        super().__init__(address, _Handler)
        self.pipeline = pipeline


class _Handler(BaseHTTPRequestHandler):
    server: NfqaServer

    def log_message(self, format, *args):  # route to logging, not stderr
        log.debug("%s - %s", self.address_string(), format % args)

    def _reply(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self) -> None:
        if self.path == "/healthz":
            body = b"ok"
            self.send_response(200)
            self.send_header("Content-Type", "text/plain")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
        else:
            self._reply(404, {"error": "not found"})

    def do_POST(self) -> None:
        if self.path != "/ask":
            self._reply(404, {"error": "not found"})
            return
        try:
            length = int(self.headers.get("Content-Length", 0))
            body = json.loads(self.rfile.read(length) or b"{}")
            if not isinstance(body, dict):
                raise ValueError("body must be a JSON object")
            question_text = body.get("question")
            if not isinstance(question_text, str) or not question_text.strip():
                raise ValueError("missing or empty 'question'")
            method = body.get("method", "typed")
            if method not in METHODS:
                raise ValueError(f"method must be one of {METHODS}")
            type_label = body.get("type")
            nfq_type = NfqType.parse(type_label) if type_label else None
            want_trace = bool(body.get("trace", False))
        except (ValueError, InputError) as err:
            self._reply(400, {"error": str(err)})
            return

        question = Question(id="http", text=question_text, nfq_type=nfq_type)
        pipeline = self.server.pipeline
        try:
            if method == "llm":
                answer = pipeline.answer_llm_only(question)
            elif method == "rag":
                answer = pipeline.answer_vanilla_rag(question)
            else:
                answer = pipeline.answer(question)
        except TransportError as err:
            self._reply(502, {"error": str(err)})
            return
        except (NfqaError, Exception) as err:  # noqa: BLE001 - boundary
            log.exception("pipeline failure")
            self._reply(500, {"error": str(err)})
            return

        answered_type = nfq_type.value if nfq_type else None
        if answered_type is None:
            for step in answer.trace:
                if step.name == "classify":
                    answered_type = step.detail.get("nfq_type")
                    break
        payload = {"answer": answer.text, "type": answered_type, "method": method}
        if want_trace:
            payload["trace"] = [s.to_dict() for s in answer.trace]
        self._reply(200, payload)


def make_server(config: AppConfig, host: str, port: int) -> NfqaServer:
    pipeline = config.build_pipeline(need_index=True)
    return NfqaServer((host, port), pipeline)
