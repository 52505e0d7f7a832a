"""HTTP annotation service.

POST /api/v1/annotate runs the extraction pipeline on one note.
GET /api/v1/schema describes entity types and permitted relations.
GET /healthz reports liveness and backend reachability.

Configured by environment: KIWI_BACKEND_URL (generation backend,
"mock:" or "mock:<lexicon.json>" for the offline stand-in),
KIWI_CORS_ORIGINS (comma-separated, default "*"),
KIWI_MAX_TEXT_BYTES (request size cap, default 100000).
"""

from __future__ import annotations

import json
import os

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .backend import Backend, BackendConfig, BackendUnavailableError, make_backend
from .formats import to_json
from .pipeline import annotate_batch
from .schema import (
    RELATION_SCHEMA,
    Document,
    MainEntityType,
    ModifierType,
)
from .segment import segment
from .spanmark import TEMPLATE_VERSION

DEFAULT_MAX_TEXT_BYTES = 100_000


class AnnotateRequest(BaseModel):
    text: str
    tasks: list[str] = Field(default=["ner", "re"])
    re_input: str = "pipeline"


def _error(status: int, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"detail": detail})


def create_app(backend: Backend | None = None,
               config: BackendConfig | None = None) -> FastAPI:
    cfg = config or BackendConfig()
    max_text_bytes = int(
        os.environ.get("KIWI_MAX_TEXT_BYTES", str(DEFAULT_MAX_TEXT_BYTES))
    )
    app = FastAPI(title="kiwi annotation service", version="1")

    origins = os.environ.get("KIWI_CORS_ORIGINS", "*")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[o.strip() for o in origins.split(",") if o.strip()],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def resolve_backend() -> Backend:
        nonlocal backend
        if backend is None:
            url = os.environ.get("KIWI_BACKEND_URL", "")
            if not url:
                raise BackendUnavailableError("no backend configured")
            backend = make_backend(url, cfg)
        return backend

    @app.post("/api/v1/annotate")
    async def annotate(request: Request):
        body = await request.body()
        if len(body) > max_text_bytes:
            return _error(400, f"request larger than {max_text_bytes} bytes")
        try:
            payload = AnnotateRequest.model_validate(json.loads(body))
        except json.JSONDecodeError:
            return _error(400, "request body is not valid JSON")
        except ValueError as exc:
            return _error(400, f"malformed request: {exc}")

        if not payload.text.strip():
            return _error(422, "text must not be empty")
        bad = [t for t in payload.tasks if t not in ("ner", "re")]
        if bad or not payload.tasks:
            return _error(400, f"tasks must be a non-empty subset of ner, re; got {payload.tasks}")
        if payload.re_input == "gold":
            return _error(400, "re_input=gold needs gold annotations; use the batch tool")
        if payload.re_input != "pipeline":
            return _error(400, f"unknown re_input {payload.re_input!r}")

        doc = Document("request", payload.text, tuple(segment(payload.text)))
        try:
            b = resolve_backend()
            run = annotate_batch(
                [doc], b, config=cfg, tasks=tuple(payload.tasks)
            )
        except BackendUnavailableError as exc:
            return _error(503, str(exc))
        if run.failures:
            return _error(503, run.failures[0][1])

        annotation = json.loads(to_json(run.annotations[0]))
        return {
            "annotation": annotation,
            "diagnostics": [
                {
                    "stage": d.stage,
                    "sentence_start": d.sentence_start,
                    "kind": d.kind,
                    "detail": d.detail,
                }
                for d in run.diagnostics
            ],
            "timings": run.timings,
        }

    @app.get("/api/v1/schema")
    async def schema():
        return {
            "main_types": [t.value for t in MainEntityType],
            "modifier_types": [t.value for t in ModifierType],
            "relations": {
                main.value: [m.value for m in mods]
                for main, mods in RELATION_SCHEMA.items()
            },
        }

    @app.get("/healthz")
    async def healthz():
        reachable = False
        try:
            reachable = resolve_backend().ping()
        except BackendUnavailableError:
            reachable = False
        return {
            "status": "ok",
            "backend_reachable": reachable,
            "template_version": TEMPLATE_VERSION,
        }

    return app


app = create_app()


def run() -> None:
    import uvicorn

    uvicorn.run(
        "kiwi.service:app",
        host=os.environ.get("KIWI_HOST", "127.0.0.1"),
        port=int(os.environ.get("KIWI_PORT", "8756")),
        log_level="warning",
    )


if __name__ == "__main__":
    run()
