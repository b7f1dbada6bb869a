"""HTTP service exposing denoiser forward passes.

Endpoints: GET /v1/meta, POST /v1/forward, POST /v1/tag. Request bodies are
validated by hand so every rejection carries the offending field path; the
framework's own validation layer is bypassed on purpose.

Handlers are stateless over a shared read-only model, so any number of
requests may run in parallel.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .tagging import load_tagger
from .toy import ToyMaskedLM

DEFAULT_BATCH_LIMIT = 64


def _bad_request(message: str, field: str) -> JSONResponse:
    return JSONResponse({"error": message, "field": field}, status_code=400)


def create_app(
    model: ToyMaskedLM | None = None,
    batch_limit: int = DEFAULT_BATCH_LIMIT,
    enable_tagging: bool = True,
) -> FastAPI:
    model = model or ToyMaskedLM()
    tagger = load_tagger() if enable_tagging else None
    app = FastAPI(title="focore model server", docs_url=None, redoc_url=None)

    meta = {
        "vocab_size": model.vocab_size,
        "mask_id": model.mask_id,
        "max_len": model.max_len,
        "model_name": model.name,
        "deterministic": True,
    }

    @app.get("/v1/meta")
    def get_meta():
        return dict(meta)

    @app.post("/v1/forward")
    async def forward(request: Request):
        try:
            doc = await request.json()
        except Exception:
            return _bad_request("body is not valid JSON", "")
        if not isinstance(doc, dict):
            return _bad_request("body must be a JSON object", "")

        tokens = doc.get("tokens")
        if not isinstance(tokens, list) or not tokens:
            return _bad_request("'tokens' must be a non-empty list", "tokens")
        if len(tokens) > batch_limit:
            return JSONResponse(
                {
                    "error": f"batch of {len(tokens)} exceeds limit {batch_limit}",
                    "field": "tokens",
                },
                status_code=413,
            )
        for i, seq in enumerate(tokens):
            if not isinstance(seq, list) or not seq:
                return _bad_request(
                    "each sequence must be a non-empty list", f"tokens[{i}]"
                )
            if len(seq) > model.max_len:
                return _bad_request(
                    f"sequence length {len(seq)} exceeds max_len {model.max_len}",
                    f"tokens[{i}]",
                )
            for j, tok in enumerate(seq):
                if not isinstance(tok, int) or isinstance(tok, bool):
                    return _bad_request("token ids must be integers", f"tokens[{i}][{j}]")
                if not 0 <= tok < model.vocab_size:
                    return _bad_request(
                        f"token id {tok} outside [0, {model.vocab_size})",
                        f"tokens[{i}][{j}]",
                    )

        mode = doc.get("mode", "full")
        if mode not in ("full", "topk"):
            return _bad_request("mode must be 'full' or 'topk'", "mode")
        top_m = None
        if mode == "topk":
            top_m = doc.get("top_m")
            if not isinstance(top_m, int) or isinstance(top_m, bool):
                return _bad_request("'top_m' must be an integer", "top_m")
            if not 1 <= top_m <= model.vocab_size:
                return _bad_request(
                    f"top_m must be in [1, {model.vocab_size}]", "top_m"
                )
        unknown = set(doc) - {"tokens", "mode", "top_m"}
        if unknown:
            return _bad_request("unknown field", sorted(unknown)[0])

        try:
            results = []
            for seq in tokens:
                rows = model.log_probs(seq)
                if mode == "full":
                    results.append([[float(x) for x in row] for row in rows])
                else:
                    sparse = []
                    for row in rows:
                        order = sorted(
                            range(model.vocab_size), key=lambda v: (-row[v], v)
                        )[:top_m]
                        sparse.append([[int(v), float(row[v])] for v in order])
                    results.append(sparse)
        except Exception as exc:  # model failure -> 500 with message
            return JSONResponse({"error": str(exc)}, status_code=500)
        return {"results": results}

    @app.post("/v1/tag")
    async def tag(request: Request):
        if tagger is None:
            return JSONResponse(
                {"error": "tagging support not installed"}, status_code=501
            )
        try:
            doc = await request.json()
        except Exception:
            return _bad_request("body is not valid JSON", "")
        tokens = doc.get("tokens") if isinstance(doc, dict) else None
        if not isinstance(tokens, list) or any(
            not isinstance(t, str) for t in tokens
        ):
            return _bad_request("'tokens' must be a list of strings", "tokens")
        return {"hd": tagger(tokens)}

    return app
