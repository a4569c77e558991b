"""Newline-delimited JSON scoring protocol over stdio or TCP.

One UTF-8 JSON object per line. Requests carry ``req_id``, an ``op`` of
``logprobs`` or ``generate``, ``text``, and optionally ``continuation`` or
``max_new``. Responses echo the ``req_id`` with ``token_logprobs`` or
``text``; failures come back as ``{"req_id", "error": code}``. Scoring is
pure, so clients may retry idempotently.
"""

from __future__ import annotations

import json
import socket
import socketserver
import sys
import threading
from typing import IO

from .scorers import Scorer, ScorerUnavailable

ERR_BAD_REQUEST = "bad_request"
ERR_UNKNOWN_OP = "unknown_op"
ERR_INTERNAL = "internal_error"


def handle_request(scorer: Scorer, data: dict) -> dict:
    req_id = data.get("req_id")
    op = data.get("op")
    try:
        if op == "logprobs":
            text = data.get("text")
            if not isinstance(text, str):
                return {"req_id": req_id, "error": ERR_BAD_REQUEST}
            continuation = data.get("continuation")
            if continuation is not None and not isinstance(continuation, str):
                return {"req_id": req_id, "error": ERR_BAD_REQUEST}
            return {
                "req_id": req_id,
                "token_logprobs": scorer.token_logprobs(text, continuation),
            }
        if op == "generate":
            text = data.get("text")
            if not isinstance(text, str):
                return {"req_id": req_id, "error": ERR_BAD_REQUEST}
            return {
                "req_id": req_id,
                "text": scorer.generate(
                    text,
                    max_new=int(data.get("max_new", 64)),
                    mode=data.get("mode", "greedy"),
                    temperature=float(data.get("temperature", 1.0)),
                    seed=int(data.get("seed", 0)),
                ),
            }
        return {"req_id": req_id, "error": ERR_UNKNOWN_OP}
    except Exception:
        return {"req_id": req_id, "error": ERR_INTERNAL}


def handle_line(scorer: Scorer, line: str) -> str:
    try:
        data = json.loads(line)
    except json.JSONDecodeError:
        return json.dumps({"req_id": None, "error": ERR_BAD_REQUEST})
    return json.dumps(handle_request(scorer, data), ensure_ascii=False)


def serve_stream(scorer: Scorer, reader: IO[str], writer: IO[str]) -> None:
    for line in reader:
        line = line.strip()
        if not line:
            continue
        writer.write(handle_line(scorer, line) + "\n")
        writer.flush()


def serve_stdio(scorer: Scorer) -> None:
    serve_stream(scorer, sys.stdin, sys.stdout)


class _Handler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        for raw in self.rfile:
            line = raw.decode("utf-8").strip()
            if not line:
                continue
            response = handle_line(self.server.scorer, line)  # type: ignore[attr-defined]
            self.wfile.write((response + "\n").encode("utf-8"))


class ScoringServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], scorer: Scorer):
        super().__init__(address, _Handler)
        self.scorer = scorer


def serve_tcp(scorer: Scorer, host: str = "127.0.0.1", port: int = 9215) -> None:
    with ScoringServer((host, port), scorer) as server:
        server.serve_forever()


class RemoteScorer:
    """Client for the NDJSON protocol; bounded in-flight requests, one retry."""

    def __init__(self, host: str, port: int, max_inflight: int = 4, timeout: float = 30.0):
        self.host = host
        self.port = port
        self.timeout = timeout
        self.scorer_id = f"remote:{host}:{port}"
        self._slots = threading.Semaphore(max_inflight)
        self._counter = 0
        self._counter_lock = threading.Lock()

    def _next_id(self) -> str:
        with self._counter_lock:
            self._counter += 1
            return f"r{self._counter}"

    def _roundtrip(self, payload: dict) -> dict:
        last_error: Exception | None = None
        for _ in range(2):  # scoring is pure; one retry is safe
            try:
                with socket.create_connection((self.host, self.port), self.timeout) as conn:
                    conn.sendall((json.dumps(payload) + "\n").encode("utf-8"))
                    with conn.makefile("r", encoding="utf-8") as fh:
                        line = fh.readline()
                if not line:
                    raise ScorerUnavailable("empty response")
                return json.loads(line)
            except (OSError, json.JSONDecodeError) as exc:
                last_error = exc
        raise ScorerUnavailable(f"scoring service at {self.host}:{self.port}: {last_error}")

    def _request(self, payload: dict) -> dict:
        with self._slots:
            response = self._roundtrip(payload)
        if response.get("req_id") != payload["req_id"]:
            raise ScorerUnavailable("response req_id mismatch")
        if "error" in response:
            raise ScorerUnavailable(f"remote error: {response['error']}")
        return response

    def token_logprobs(self, text: str, continuation: str | None = None) -> list[float]:
        payload = {"req_id": self._next_id(), "op": "logprobs", "text": text}
        if continuation is not None:
            payload["continuation"] = continuation
        return [float(x) for x in self._request(payload)["token_logprobs"]]

    def generate(
        self, prompt: str, max_new: int = 64, mode: str = "greedy",
        temperature: float = 1.0, seed: int = 0,
    ) -> str:
        payload = {
            "req_id": self._next_id(),
            "op": "generate",
            "text": prompt,
            "max_new": max_new,
            "mode": mode,
            "temperature": temperature,
            "seed": seed,
        }
        return str(self._request(payload)["text"])
