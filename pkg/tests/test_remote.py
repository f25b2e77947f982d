import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from pcrqa.dataset import Necessity, ReviewRequest
from pcrqa.knowledge import render_knowledge_prefix
from pcrqa.prompt import assemble_prompt, build_template
from pcrqa.remote import (
    RemoteProtocolError,
    RemoteUnavailableError,
    flat_tokens,
    remote_predict,
    validate_response,
)
from pcrqa.tokens import MASK, PAD


def _instance():
    req = ReviewRequest(
        id=1, title="t", text="body words", code_snippets=(), tags=("java",),
        score=5, necessity=Necessity.NECESSARY,
    )
    return assemble_prompt(req, build_template(3), render_knowledge_prefix([], 5), "ref", 80)


def _serve(responder):
    """Start a one-shot fixture server; returns its base URL and the server."""

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            body = json.loads(self.rfile.read(length)) if length else {}
            status, payload = responder(self.path, body)
            data = json.dumps(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def log_message(self, *args):
            pass

    server = HTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return f"http://127.0.0.1:{server.server_port}", server


def _conformant(path, body):
    top_k = body["top_k"]
    preds = [
        [{"token": f"tok{i}", "score": round(0.5 / (i + 1), 6)} for i in range(top_k)]
        for _ in body["mask_indices"]
    ]
    return 200, {"predictions": preds, "model_id": "fixture"}


class TestFlatTokens:
    def test_vector_slot_renders_as_pad(self):
        inst = _instance()
        tokens = flat_tokens(inst)
        assert len(tokens) == inst.total_length()
        assert tokens[-1] == PAD  # code-graph slot
        for pos in inst.mask_positions:
            assert tokens[pos] == MASK


class TestRemotePredict:
    def test_round_trip_against_conformant_server(self):
        url, server = _serve(_conformant)
        try:
            preds = remote_predict(url, _instance(), top_k=4)
        finally:
            server.shutdown()
        assert len(preds) == 4
        for pred in preds:
            assert len(pred.candidates) == 4
            scores = [s for _, s in pred.candidates]
            assert scores == sorted(scores, reverse=True)

    def test_ascending_scores_is_protocol_error(self):
        def bad(path, body):
            preds = [
                [{"token": "a", "score": 0.1}, {"token": "b", "score": 0.9}]
                for _ in body["mask_indices"]
            ]
            return 200, {"predictions": preds, "model_id": "fixture"}

        url, server = _serve(bad)
        try:
            with pytest.raises(RemoteProtocolError) as exc_info:
                remote_predict(url, _instance(), top_k=2)
        finally:
            server.shutdown()
        assert exc_info.value.field == "score"

    def test_wrong_mask_count_is_protocol_error(self):
        def bad(path, body):
            return 200, {"predictions": [[{"token": "a", "score": 0.5}]], "model_id": "m"}

        url, server = _serve(bad)
        try:
            with pytest.raises(RemoteProtocolError):
                remote_predict(url, _instance(), top_k=1)
        finally:
            server.shutdown()

    def test_missing_model_id_is_protocol_error(self):
        def bad(path, body):
            preds = [
                [{"token": "a", "score": 0.5}] for _ in body["mask_indices"]
            ]
            return 200, {"predictions": preds}

        url, server = _serve(bad)
        try:
            with pytest.raises(RemoteProtocolError) as exc_info:
                remote_predict(url, _instance(), top_k=1)
        finally:
            server.shutdown()
        assert exc_info.value.field == "model_id"

    def test_unreachable_endpoint_retries_then_fails(self):
        with pytest.raises(RemoteUnavailableError):
            remote_predict(
                "http://127.0.0.1:9",  # discard port; nothing listens
                _instance(),
                top_k=1,
                attempts=2,
                timeout=0.3,
                backoff=0.01,
            )

    def test_http_400_is_protocol_error_not_retryable(self):
        def reject(path, body):
            return 400, {"error": "bad request"}

        url, server = _serve(reject)
        try:
            with pytest.raises(RemoteProtocolError):
                remote_predict(url, _instance(), top_k=1)
        finally:
            server.shutdown()


class TestValidateResponse:
    def test_score_out_of_range(self):
        payload = {"predictions": [[{"token": "a", "score": 1.5}]], "model_id": "m"}
        with pytest.raises(RemoteProtocolError) as exc_info:
            validate_response(payload, mask_count=1, top_k=1)
        assert exc_info.value.field == "score"

    def test_candidate_missing_fields(self):
        payload = {"predictions": [[{"token": "a"}]], "model_id": "m"}
        with pytest.raises(RemoteProtocolError):
            validate_response(payload, mask_count=1, top_k=1)

    def test_valid_payload_passes(self):
        payload = {
            "predictions": [[{"token": "a", "score": 0.6}, {"token": "b", "score": 0.4}]],
            "model_id": "m",
        }
        assert validate_response(payload, mask_count=1, top_k=2)
