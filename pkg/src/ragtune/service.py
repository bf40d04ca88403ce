"""Read-only retrieval QA service.

Endpoints:
    GET  /v1/health  -> package version, model and index fingerprints
    POST /v1/query   -> {"answer": ..., "contexts": [{doc_id, score, text}, ...]}

Status codes: 400 malformed request body, 422 degenerate query (embeds
to the zero vector), 502 generator failure (retrieved contexts are still
returned in the error body).
"""

from __future__ import annotations

import logging
import time

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__
from .embedder import EmbeddingModel, embed, is_degenerate
from .querygen import DecodingParams
from .ragpipe import GeneratorClient, GeneratorFailureError, answer
from .retriever import FingerprintMismatchError, VectorIndex, model_fingerprint

logger = logging.getLogger("ragtune.service")


def create_app(
    model: EmbeddingModel,
    index: VectorIndex,
    generator: GeneratorClient,
    default_k: int = 3,
    max_input_tokens: int = 4096,
    decoding: DecodingParams = DecodingParams(),
) -> FastAPI:
    if model_fingerprint(model) != index.model_fingerprint:
        raise FingerprintMismatchError(
            "refusing to serve: index was not built by the provided model"
        )
    app = FastAPI(title="ragtune", version=__version__)

    @app.get("/v1/health")
    def health():
        return {
            "status": "ok",
            "version": __version__,
            "model_fingerprint": index.model_fingerprint,
            "n_docs": len(index),
        }

    @app.post("/v1/query")
    async def query(request: Request):
        started = time.perf_counter()
        try:
            body = await request.json()
        except Exception:
            return JSONResponse({"error": "request body is not valid JSON"}, status_code=400)
        if not isinstance(body, dict) or "query" not in body:
            return JSONResponse({"error": "body must be an object with a 'query' field"}, status_code=400)
        query_text = body["query"]
        if not isinstance(query_text, str):
            return JSONResponse({"error": "'query' must be a string"}, status_code=400)
        k = body.get("k", default_k)
        if not isinstance(k, int) or isinstance(k, bool) or k < 1:
            return JSONResponse({"error": "'k' must be an integer >= 1"}, status_code=400)
        if is_degenerate(embed(model, query_text)):
            return JSONResponse(
                {"error": "query has no usable tokens and embeds to the zero vector"},
                status_code=422,
            )
        try:
            result = answer(
                query_text,
                index,
                model,
                generator,
                k=k,
                decoding=decoding,
                max_input_tokens=max_input_tokens,
            )
        except GeneratorFailureError as exc:
            contexts = [
                {"doc_id": c.doc_id, "score": c.score, "text": c.text} for c in exc.contexts
            ]
            logger.warning("generator failure for query %r: %s", query_text[:80], exc)
            return JSONResponse(
                {"error": f"generator failure: {exc}", "contexts": contexts},
                status_code=502,
            )
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        logger.info("query k=%d latency_ms=%.1f", k, elapsed_ms)
        return {
            "answer": result.answer_text,
            "contexts": [
                {"doc_id": c.doc_id, "score": c.score, "text": c.text}
                for c in result.contexts
            ],
        }

    return app
