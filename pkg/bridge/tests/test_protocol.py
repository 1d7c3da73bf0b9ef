"""Conformance against frozen request/response fixtures plus error paths.

Fixture responses were derived by hand, not captured from the server: the
copy translator puts probability 0.99 on the copied token and splits the
remaining 0.01 over the rest of its vocabulary, so the greedy copy of a
two-token source scores log(0.99) accumulated three times and the epsilon
EOS candidate scores log(0.005); the alpha=0 n-gram corpus makes every next
token certain, so top_k=1 walks the training sentence whatever the seed.
"""
from __future__ import annotations

import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from simulstream.models import CopyMt
from simulstream_bridge import app_from_flags, create_app
from simulstream_bridge.backends import EchoLm

FIXTURES = Path(__file__).parent / "fixtures"


def canonical(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def roundtrip(client: TestClient, path: str, name: str) -> None:
    blob = json.loads((FIXTURES / name).read_text(encoding="utf-8"))
    response = client.post(path, json=blob["request"])
    assert response.status_code == 200, response.text
    assert canonical(response.json()) == canonical(blob["response"])


@pytest.fixture()
def echo_client() -> TestClient:
    return TestClient(create_app(lm=EchoLm(), mt=CopyMt(epsilon=0.01)))


@pytest.fixture()
def ngram_client(tmp_path) -> TestClient:
    corpus = tmp_path / "lm.txt"
    corpus.write_text("a b c\na b c\n", encoding="utf-8")
    return TestClient(
        app_from_flags(f"ngram:corpus={corpus},order=3,alpha=0.0", "copy")
    )


def test_health(echo_client):
    response = echo_client.get("/v1/health")
    assert response.status_code == 200
    assert response.json() == {"status": "ok"}


def test_echo_continuation_fixture(echo_client):
    roundtrip(echo_client, "/v1/continuations", "continuations_echo.json")


def test_ngram_continuation_fixture(ngram_client):
    roundtrip(ngram_client, "/v1/continuations", "continuations_ngram.json")


def test_copy_translate_fixture(echo_client):
    roundtrip(echo_client, "/v1/translate", "translate_copy.json")


def test_prefix_translate_fixture(echo_client):
    roundtrip(echo_client, "/v1/translate", "translate_prefix.json")


def test_continuation_count_matches_n(echo_client):
    body = {
        "request_id": "c-9", "context": "x y",
        "n": 5, "max_len": 1, "top_k": 1, "seed": 0,
    }
    got = echo_client.post("/v1/continuations", json=body).json()
    assert got["request_id"] == "c-9"
    assert len(got["continuations"]) == 5
    assert len(set(got["continuations"])) == 1


def test_beam_one_returns_single_candidate(echo_client):
    body = {
        "request_id": "t-9", "source": "u v w", "target_prefix": "",
        "beam": 1, "max_len": 4, "mode": "candidates",
    }
    got = echo_client.post("/v1/translate", json=body).json()
    assert got["request_id"] == "t-9"
    assert len(got["candidates"]) == 1


def test_candidates_extend_prefix_and_rank_by_score(echo_client):
    body = {
        "request_id": "t-10", "source": "u v w", "target_prefix": "u v",
        "beam": 3, "max_len": 2, "mode": "candidates",
    }
    got = echo_client.post("/v1/translate", json=body).json()
    scores = [c["log_score"] for c in got["candidates"]]
    assert scores == sorted(scores, reverse=True)
    for cand in got["candidates"]:
        assert cand["tokens"][:2] == ["u", "v"]


def test_missing_field_is_400(echo_client):
    body = {"request_id": "c-3", "context": "a", "max_len": 2, "top_k": 1, "seed": 0}
    response = echo_client.post("/v1/continuations", json=body)
    assert response.status_code == 400
    assert response.json()["error"] == "malformed request"


def test_wrong_type_is_400(echo_client):
    body = {
        "request_id": "c-4", "context": "a",
        "n": "four", "max_len": 2, "top_k": 1, "seed": 0,
    }
    assert echo_client.post("/v1/continuations", json=body).status_code == 400


def test_unknown_mode_is_400(echo_client):
    body = {
        "request_id": "t-3", "source": "a", "target_prefix": "",
        "beam": 1, "max_len": 1, "mode": "greedy",
    }
    assert echo_client.post("/v1/translate", json=body).status_code == 400


def test_unloaded_models_answer_503():
    client = TestClient(create_app())
    assert client.get("/v1/health").status_code == 200
    cont = {
        "request_id": "c-5", "context": "a",
        "n": 1, "max_len": 1, "top_k": 1, "seed": 0,
    }
    assert client.post("/v1/continuations", json=cont).status_code == 503
    trans = {
        "request_id": "t-5", "source": "a", "target_prefix": "",
        "beam": 1, "max_len": 1, "mode": "candidates",
    }
    assert client.post("/v1/translate", json=trans).status_code == 503
