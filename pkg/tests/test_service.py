import json

import pytest
from fastapi.testclient import TestClient

from conftest import CORPUS
from kiwi.backend import MockBackend, TransportError
from kiwi.schema import RELATION_SCHEMA
from kiwi.service import create_app
from kiwi.spanmark import TEMPLATE_VERSION


@pytest.fixture
def lexicon():
    return json.loads((CORPUS / "lexicon.json").read_text())


@pytest.fixture
def client(lexicon):
    return TestClient(create_app(backend=MockBackend(lexicon)))


def test_annotate_happy_path(client):
    r = client.post("/api/v1/annotate",
                    json={"text": "Hgb 10.6 gm / dL was stable ."})
    assert r.status_code == 200
    body = r.json()
    assert set(body) == {"annotation", "diagnostics", "timings"}
    ann = body["annotation"]
    assert ann["schema_version"] == 1
    types = {m["type"] for m in ann["mentions"]}
    assert types == {"test", "labvalue"}
    assert len(ann["relations"]) == 1


def test_annotate_ner_only(client):
    r = client.post("/api/v1/annotate",
                    json={"text": "Hgb 10.6 gm / dL", "tasks": ["ner"]})
    assert r.status_code == 200
    ann = r.json()["annotation"]
    assert {m["kind"] for m in ann["mentions"]} == {"main"}
    assert ann["relations"] == []


def test_empty_text_422(client):
    assert client.post("/api/v1/annotate", json={"text": ""}).status_code == 422
    assert client.post("/api/v1/annotate", json={"text": " \n "}).status_code == 422


def test_malformed_json_400(client):
    r = client.post("/api/v1/annotate", content=b"{oops",
                    headers={"content-type": "application/json"})
    assert r.status_code == 400


def test_missing_text_400(client):
    r = client.post("/api/v1/annotate", json={"tasks": ["ner"]})
    assert r.status_code == 400


def test_bad_task_400(client):
    r = client.post("/api/v1/annotate",
                    json={"text": "x", "tasks": ["ner", "translate"]})
    assert r.status_code == 400
    r = client.post("/api/v1/annotate", json={"text": "x", "tasks": []})
    assert r.status_code == 400


def test_gold_re_input_400(client):
    r = client.post("/api/v1/annotate",
                    json={"text": "x", "re_input": "gold"})
    assert r.status_code == 400


def test_oversized_request_400(lexicon, monkeypatch):
    monkeypatch.setenv("KIWI_MAX_TEXT_BYTES", "200")
    app = create_app(backend=MockBackend(lexicon))
    client = TestClient(app)
    r = client.post("/api/v1/annotate", json={"text": "y" * 500})
    assert r.status_code == 400


class _DownBackend:
    def generate(self, prompt):
        raise TransportError("connection refused")

    def ping(self):
        return False

    def describe(self):
        return "down"


def test_backend_unavailable_503():
    client = TestClient(create_app(backend=_DownBackend()))
    r = client.post("/api/v1/annotate", json={"text": "Hgb 10.6"})
    assert r.status_code == 503


def test_no_backend_configured_503(monkeypatch):
    monkeypatch.delenv("KIWI_BACKEND_URL", raising=False)
    client = TestClient(create_app())
    r = client.post("/api/v1/annotate", json={"text": "Hgb 10.6"})
    assert r.status_code == 503


def test_backend_from_env(monkeypatch, tmp_path, lexicon):
    lex = tmp_path / "lex.json"
    lex.write_text(json.dumps(lexicon))
    monkeypatch.setenv("KIWI_BACKEND_URL", f"mock:{lex}")
    client = TestClient(create_app())
    r = client.post("/api/v1/annotate", json={"text": "Patient denies fever ."})
    assert r.status_code == 200
    assert len(r.json()["annotation"]["mentions"]) == 2


def test_schema_endpoint(client):
    r = client.get("/api/v1/schema")
    assert r.status_code == 200
    body = r.json()
    assert body["main_types"] == ["problem", "test", "drug", "treatment"]
    assert len(body["modifier_types"]) == 16
    assert body["relations"] == {
        main.value: [m.value for m in mods]
        for main, mods in RELATION_SCHEMA.items()
    }


def test_healthz(client):
    r = client.get("/healthz")
    assert r.status_code == 200
    body = r.json()
    assert body["status"] == "ok"
    assert body["backend_reachable"] is True
    assert body["template_version"] == TEMPLATE_VERSION


def test_healthz_with_down_backend():
    client = TestClient(create_app(backend=_DownBackend()))
    body = client.get("/healthz").json()
    assert body["status"] == "ok"
    assert body["backend_reachable"] is False


def test_annotation_payload_matches_batch_serialization(client, lexicon):
    text = "Started Ortho Micronor 0.35 MG daily ."
    r = client.post("/api/v1/annotate", json={"text": text})
    from kiwi.formats import to_json
    from kiwi.pipeline import annotate_batch
    from kiwi.schema import Document
    from kiwi.segment import segment

    doc = Document("request", text, tuple(segment(text)))
    run = annotate_batch([doc], MockBackend(lexicon))
    assert r.json()["annotation"] == json.loads(to_json(run.annotations[0]))


def test_cors_configurable(lexicon, monkeypatch):
    monkeypatch.setenv("KIWI_CORS_ORIGINS", "https://viewer.example")
    app = create_app(backend=MockBackend(lexicon))
    client = TestClient(app)
    r = client.options(
        "/api/v1/annotate",
        headers={
            "Origin": "https://viewer.example",
            "Access-Control-Request-Method": "POST",
        },
    )
    assert r.headers.get("access-control-allow-origin") == "https://viewer.example"
