"""HTTP service contract: status codes, payload shapes, read-only behavior."""

import pytest
from fastapi.testclient import TestClient

from ragtune.embedder import init_model, model_fingerprint
from ragtune.ragpipe import EchoGenerator
from ragtune.retriever import FingerprintMismatchError, build_index
from ragtune.service import create_app


class FailingGenerator:
    def complete(self, bundle, decoding):
        raise RuntimeError("upstream model unreachable")


@pytest.fixture()
def client(small_model, tiny_corpus):
    index = build_index(small_model, tiny_corpus)
    app = create_app(small_model, index, EchoGenerator(), default_k=3)
    return TestClient(app)


class TestHealth:
    def test_reports_fingerprint_and_doc_count(self, client, small_model, tiny_corpus):
        response = client.get("/v1/health")
        assert response.status_code == 200
        payload = response.json()
        assert payload["status"] == "ok"
        assert payload["model_fingerprint"] == model_fingerprint(small_model)
        assert payload["n_docs"] == len(tiny_corpus)
        assert isinstance(payload["version"], str) and payload["version"]


class TestQuery:
    def test_valid_query_returns_answer_with_ranked_contexts(self, client, tiny_corpus):
        response = client.post("/v1/query", json={"query": "how do i pay the renewal fee", "k": 3})
        assert response.status_code == 200
        payload = response.json()
        contexts = payload["contexts"]
        assert 1 <= len(contexts) <= 3
        scores = [c["score"] for c in contexts]
        assert scores == sorted(scores, reverse=True)
        answers = {p.answer for p in tiny_corpus}
        assert all(c["text"] in answers for c in contexts)
        # echo generator answers with the top context verbatim
        assert payload["answer"] == contexts[0]["text"]

    def test_k_defaults_when_omitted(self, client):
        response = client.post("/v1/query", json={"query": "patent term"})
        assert response.status_code == 200
        assert len(response.json()["contexts"]) <= 3

    def test_invalid_json_body_is_400(self, client):
        response = client.post(
            "/v1/query", content=b"{not json", headers={"content-type": "application/json"}
        )
        assert response.status_code == 400

    def test_non_object_body_is_400(self, client):
        assert client.post("/v1/query", json=["query"]).status_code == 400

    def test_missing_query_field_is_400(self, client):
        assert client.post("/v1/query", json={"k": 3}).status_code == 400

    def test_non_string_query_is_400(self, client):
        assert client.post("/v1/query", json={"query": 42}).status_code == 400

    @pytest.mark.parametrize("k", [0, -1, "3", 2.5, True])
    def test_bad_k_is_400(self, client, k):
        assert client.post("/v1/query", json={"query": "patent", "k": k}).status_code == 400

    @pytest.mark.parametrize("text", ["", "   \t "])
    def test_degenerate_query_is_422(self, client, text):
        response = client.post("/v1/query", json={"query": text})
        assert response.status_code == 422
        assert "error" in response.json()

    def test_generator_failure_is_502_with_contexts(self, small_model, tiny_corpus):
        index = build_index(small_model, tiny_corpus)
        app = create_app(small_model, index, FailingGenerator())
        broken = TestClient(app)
        response = broken.post("/v1/query", json={"query": "renewal fee"})
        assert response.status_code == 502
        payload = response.json()
        assert "generator failure" in payload["error"]
        assert len(payload["contexts"]) > 0
        assert {"doc_id", "score", "text"} <= set(payload["contexts"][0])

    def test_requests_do_not_mutate_model_or_index(self, small_model, tiny_corpus):
        index = build_index(small_model, tiny_corpus)
        app = create_app(small_model, index, EchoGenerator())
        local = TestClient(app)
        before_model = model_fingerprint(small_model)
        before_vectors = index.vectors.tobytes()
        for _ in range(3):
            local.post("/v1/query", json={"query": "the filing fee"})
        assert model_fingerprint(small_model) == before_model
        assert index.vectors.tobytes() == before_vectors


class TestStartupGuard:
    def test_mismatched_model_refused_at_create_time(self, small_model, tiny_corpus):
        index = build_index(small_model, tiny_corpus)
        stranger = init_model(
            feat_dim=small_model.feat_dim,
            emb_dim=small_model.emb_dim,
            hash_seed=small_model.hash_seed,
            seed=123,
        )
        with pytest.raises(FingerprintMismatchError):
            create_app(stranger, index, EchoGenerator())
