"""Wire-protocol conformance for the reference fill-mask server.

Schema, score ordering, and length rules are checked with the primary
package's own response validator, and a live round trip runs through
pcrqa's remote client; the server is only ever exercised through HTTP.
"""

import threading
import time

import pytest
import uvicorn
from fastapi.testclient import TestClient

from pcr_model_server.app import create_app
from pcr_model_server.backend import SeededHashFiller, retokenize
from pcr_model_server.config import ServerConfig, ServerConfigError, load_server_config

from pcrqa.dataset import Necessity, ReviewRequest
from pcrqa.knowledge import render_knowledge_prefix
from pcrqa.prompt import assemble_prompt, build_template
from pcrqa.remote import flat_tokens, remote_predict, validate_response


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app(ServerConfig()))


def _body(n_tokens=12, mask_at=(3, 7), top_k=5):
    tokens = [f"word{i}" for i in range(n_tokens)]
    for m in mask_at:
        tokens[m] = "[MASK]"
    return {"tokens": tokens, "mask_indices": list(mask_at), "top_k": top_k}


CONFORMANCE_FIXTURES = [
    _body(),
    _body(n_tokens=30, mask_at=(0,), top_k=1),
    _body(n_tokens=50, mask_at=(5, 6, 7, 16), top_k=10),
    {"tokens": ["[CLS]", "review", "my", "[MASK]", "please", "[SEP]"],
     "mask_indices": [3], "top_k": 3},
]


class TestHealth:
    def test_health(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        payload = resp.json()
        assert payload["status"] == "ok"
        assert payload["model_id"]


class TestConformance:
    @pytest.mark.parametrize("body", CONFORMANCE_FIXTURES)
    def test_schema_ordering_and_lengths(self, client, body):
        resp = client.post("/v1/fill-mask", json=body)
        assert resp.status_code == 200
        payload = resp.json()
        preds = validate_response(payload, len(body["mask_indices"]), body["top_k"])
        assert len(preds) == len(body["mask_indices"])
        for cands in preds:
            scores = [c["score"] for c in cands]
            assert scores == sorted(scores, reverse=True)
            assert all(0.0 <= s <= 1.0 for s in scores)
            tokens = [c["token"] for c in cands]
            assert len(tokens) == len(set(tokens))

    def test_deterministic_repeat(self, client):
        body = _body(top_k=7)
        first = client.post("/v1/fill-mask", json=body).json()
        second = client.post("/v1/fill-mask", json=body).json()
        assert first == second

    def test_top_k_over_ceiling_400(self, client):
        resp = client.post("/v1/fill-mask", json=_body(top_k=9999))
        assert resp.status_code == 400
        assert resp.json()["field"] == "top_k"

    def test_over_length_413_with_counts(self, client):
        body = _body(n_tokens=600)
        resp = client.post("/v1/fill-mask", json=body)
        assert resp.status_code == 413
        payload = resp.json()
        assert payload["tokens"] == 600
        assert payload["max_tokens"] == 512

    def test_malformed_body_400_names_field(self, client):
        resp = client.post("/v1/fill-mask", json={"tokens": ["a"], "top_k": 1})
        assert resp.status_code == 400
        assert "mask_indices" in resp.json()["field"]

    def test_mask_index_out_of_range_400(self, client):
        resp = client.post(
            "/v1/fill-mask",
            json={"tokens": ["a", "[MASK]"], "mask_indices": [5], "top_k": 1},
        )
        assert resp.status_code == 400
        assert resp.json()["field"] == "mask_indices"

    def test_mask_index_must_point_at_sentinel(self, client):
        resp = client.post(
            "/v1/fill-mask",
            json={"tokens": ["a", "[MASK]"], "mask_indices": [0], "top_k": 1},
        )
        assert resp.status_code == 400

    def test_alignment_survives_retokenization(self, client):
        # multi-word tokens split server-side; the sentinel keeps alignment
        body = {
            "tokens": ["Don't", "[MASK]", "Review-Me", "[MASK]"],
            "mask_indices": [1, 3],
            "top_k": 2,
        }
        resp = client.post("/v1/fill-mask", json=body)
        assert resp.status_code == 200
        assert len(resp.json()["predictions"]) == 2


class TestRetokenize:
    def test_sentinels_preserved_and_words_split(self):
        stream, masks_before = retokenize(["Review-Me", "[MASK]", "B2B", "a.b"])
        assert stream == ["review", "me", "[MASK]", "b2b", "a", "b"]
        assert masks_before == [0, 0, 1, 1]

    def test_filler_is_deterministic(self):
        filler = SeededHashFiller("seeded-hash-test", seed=3)
        tokens = ["a", "[MASK]", "b"]
        one = filler.fill(tokens, [1], 5)
        two = filler.fill(tokens, [1], 5)
        assert one == two


class TestServerConfig:
    def test_precedence(self, tmp_path):
        cfg_file = tmp_path / "server.cfg"
        cfg_file.write_text("top_k_ceiling = 9\nmax_tokens = 400\n")
        cfg = load_server_config(
            cfg_file, env={"PCR_SERVER_MAX_TOKENS": "450"}, overrides={"seed": 4}
        )
        assert cfg.top_k_ceiling == 9
        assert cfg.max_tokens == 450
        assert cfg.seed == 4

    def test_invariants(self):
        with pytest.raises(ServerConfigError):
            load_server_config(overrides={"top_k_ceiling": 0})
        with pytest.raises(ServerConfigError):
            load_server_config(overrides={"max_tokens": 100})  # < prompt_max_len


class TestPrimaryClientRoundTrip:
    @pytest.fixture()
    def live_server(self):
        config = uvicorn.Config(
            create_app(ServerConfig()), host="127.0.0.1", port=0, log_level="warning"
        )
        server = uvicorn.Server(config)
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        deadline = time.time() + 10
        while not server.started:
            if time.time() > deadline:
                raise RuntimeError("server did not start")
            time.sleep(0.02)
        port = server.servers[0].sockets[0].getsockname()[1]
        yield f"http://127.0.0.1:{port}"
        server.should_exit = True
        thread.join(timeout=5)

    def _instance(self):
        req = ReviewRequest(
            id=1, title="review my parser", text="it splits tokens by hand",
            code_snippets=(), tags=("java",), score=5, necessity=Necessity.NECESSARY,
        )
        return assemble_prompt(
            req, build_template(3), render_knowledge_prefix([], 5), "ref", 120
        )

    def test_remote_predict_round_trip(self, live_server):
        instance = self._instance()
        preds = remote_predict(live_server, instance, top_k=5)
        assert len(preds) == len(instance.mask_positions)
        for pred, pos in zip(preds, instance.mask_positions):
            assert pred.position == pos
            assert len(pred.candidates) == 5
            scores = [s for _, s in pred.candidates]
            assert scores == sorted(scores, reverse=True)

    def test_round_trip_is_deterministic(self, live_server):
        instance = self._instance()
        first = remote_predict(live_server, instance, top_k=4)
        second = remote_predict(live_server, instance, top_k=4)
        assert first == second

    def test_flat_tokens_compatible_with_server(self, live_server):
        instance = self._instance()
        tokens = flat_tokens(instance)
        assert all(tokens[p] == "[MASK]" for p in instance.mask_positions)
