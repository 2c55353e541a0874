"""HTTP inference service.

POST /generate turns a layout-graph document into base64 PNG covers;
GET /categories exposes the checkpoint vocabulary; GET /healthz reports
liveness and readiness.  The loaded weights are immutable: request handling
runs under no_grad against shared eval-mode modules, and 503 is returned
until the checkpoint finishes loading.
"""

from __future__ import annotations

import base64
import logging
import threading
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .graphs import GraphError
from .pipeline import GenerationPipeline, InvalidGraphError, RequestError, encode_png

log = logging.getLogger(__name__)


def _bad_request(message: str, violations: list[str] | None = None) -> JSONResponse:
    body = {"error": message}
    if violations is not None:
        body["violations"] = violations
    return JSONResponse(status_code=400, content=body)


_REQUEST_FIELDS = {"graph", "seed", "variations", "title_text"}


def create_app(
    pipeline: GenerationPipeline | None = None,
    checkpoint: str | None = None,
    title_backend: str = "fallback",
    loader=None,
) -> FastAPI:
    """Build the service around an existing pipeline, a checkpoint path
    (loaded in the background after startup), or a custom loader callable."""
    state: dict = {"pipeline": pipeline, "error": None}

    if pipeline is None:
        if loader is None:
            if checkpoint is None:
                raise ValueError("need a pipeline, a checkpoint path, or a loader")

            def loader():
                return GenerationPipeline.from_checkpoint(checkpoint, title_backend)

        def _load():
            try:
                state["pipeline"] = loader()
            except Exception as exc:  # surfaced via /healthz
                log.exception("checkpoint load failed")
                state["error"] = str(exc)

        @asynccontextmanager
        async def lifespan(app: FastAPI):
            threading.Thread(target=_load, daemon=True).start()
            yield

        app = FastAPI(title="covergen", lifespan=lifespan)
    else:
        app = FastAPI(title="covergen")

    def not_ready() -> JSONResponse | None:
        if state["pipeline"] is not None:
            return None
        status = {"error": state["error"] or "model loading"}
        return JSONResponse(status_code=503, content=status)

    @app.get("/healthz")
    def healthz():
        return {
            "status": "error" if state["error"] else "ok",
            "ready": state["pipeline"] is not None,
        }

    @app.get("/categories")
    def categories():
        if (resp := not_ready()) is not None:
            return resp
        return {"categories": state["pipeline"].categories()}

    @app.post("/generate")
    async def generate(request: Request):
        if (resp := not_ready()) is not None:
            return resp
        try:
            payload = await request.json()
        except Exception:
            return _bad_request("request body is not valid JSON")
        if not isinstance(payload, dict):
            return _bad_request("request body must be a JSON object")
        for key in payload:
            if key not in _REQUEST_FIELDS:
                return _bad_request(f"/{key}: unknown field")
        if "graph" not in payload:
            return _bad_request("/graph: missing field")
        seed = payload.get("seed", 0)
        variations = payload.get("variations", 1)
        title_text = payload.get("title_text")
        if not isinstance(seed, int) or isinstance(seed, bool):
            return _bad_request("/seed: must be an integer")
        if not isinstance(variations, int) or isinstance(variations, bool):
            return _bad_request("/variations: must be an integer")
        if title_text is not None and not isinstance(title_text, str):
            return _bad_request("/title_text: must be a string")

        try:
            result = state["pipeline"].generate(
                payload["graph"], seed=seed, variations=variations, title_text=title_text
            )
        except InvalidGraphError as exc:
            return _bad_request("graph failed validation", exc.violations)
        except GraphError as exc:
            return _bad_request(f"/graph{exc}" if str(exc).startswith("/") else str(exc))
        except RequestError as exc:
            return _bad_request(str(exc))

        return {
            "images": [base64.b64encode(encode_png(img)).decode() for img in result.images],
            "boxes": {k: list(v) for k, v in result.boxes.items()},
            "seconds": result.seconds,
            "seed": result.seed,
        }

    return app
