"""FastAPI application implementing the fill-mask wire protocol.

POST /v1/fill-mask: {"tokens": [...], "mask_indices": [...], "top_k": n}
-> {"predictions": [[{"token", "score"}, ...], ...], "model_id": "..."}
with the outer list parallel to mask_indices and scores non-increasing in
[0, 1].  GET /health reports liveness.  Errors: 413 for over-length
requests (with token counts), 400 for malformed bodies naming the field.
"""

import argparse
import sys
from pathlib import Path

import uvicorn
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .backend import MASK_TOKEN, make_filler
from .config import ServerConfig, ServerConfigError, load_server_config


class FillMaskRequest(BaseModel):
    tokens: list[str]
    mask_indices: list[int]
    top_k: int


def create_app(config: ServerConfig) -> FastAPI:
    config.validate()
    filler = make_filler(config.model_id, config.seed)
    app = FastAPI(title="pcr-model-server")

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        field = ".".join(str(loc) for loc in first.get("loc", ()) if loc != "body")
        return JSONResponse(
            status_code=400,
            content={"error": f"malformed body: {first.get('msg', 'invalid')}", "field": field or "body"},
        )

    @app.get("/health")
    def health():
        return {"status": "ok", "model_id": filler.model_id}

    @app.post("/v1/fill-mask")
    def fill_mask(body: FillMaskRequest):
        if len(body.tokens) > config.max_tokens:
            return JSONResponse(
                status_code=413,
                content={
                    "error": "request too large",
                    "tokens": len(body.tokens),
                    "max_tokens": config.max_tokens,
                },
            )
        if body.top_k < 1 or body.top_k > config.top_k_ceiling:
            return JSONResponse(
                status_code=400,
                content={
                    "error": f"top_k must be in [1, {config.top_k_ceiling}]",
                    "field": "top_k",
                },
            )
        if not body.mask_indices:
            return JSONResponse(
                status_code=400,
                content={"error": "mask_indices must be non-empty", "field": "mask_indices"},
            )
        for idx in body.mask_indices:
            if not (0 <= idx < len(body.tokens)):
                return JSONResponse(
                    status_code=400,
                    content={"error": f"mask index {idx} out of range", "field": "mask_indices"},
                )
            if body.tokens[idx] != MASK_TOKEN:
                return JSONResponse(
                    status_code=400,
                    content={
                        "error": f"token at index {idx} is not the mask sentinel",
                        "field": "mask_indices",
                    },
                )
        predictions = filler.fill(body.tokens, body.mask_indices, body.top_k)
        return {
            "predictions": [
                [{"token": token, "score": score} for token, score in cands]
                for cands in predictions
            ],
            "model_id": filler.model_id,
        }

    return app


def serve(config: ServerConfig) -> None:
    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="info")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pcr-model-server")
    parser.add_argument("--config", type=Path)
    parser.add_argument("--model-id", dest="model_id")
    parser.add_argument("--host")
    parser.add_argument("--port", type=int)
    parser.add_argument("--top-k-ceiling", dest="top_k_ceiling", type=int)
    parser.add_argument("--max-tokens", dest="max_tokens", type=int)
    parser.add_argument("--seed", type=int)
    args = parser.parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k != "config" and v is not None}
    try:
        config = load_server_config(args.config, overrides=overrides)
    except ServerConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 3
    serve(config)
    return 0


if __name__ == "__main__":
    sys.exit(main())
