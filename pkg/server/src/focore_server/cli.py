"""Server launcher: port, model shape, and batch limits via flags or env."""

from __future__ import annotations

import argparse
import os

import uvicorn

from .service import DEFAULT_BATCH_LIMIT, create_app
from .toy import ToyMaskedLM


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="focore-server",
        description="HTTP model server for the focore decoding engine",
    )
    parser.add_argument(
        "--host", default=os.environ.get("FOCORE_SERVER_HOST", "127.0.0.1")
    )
    parser.add_argument(
        "--port", type=int, default=int(os.environ.get("FOCORE_SERVER_PORT", "8731"))
    )
    parser.add_argument("--vocab-size", type=int, default=64)
    parser.add_argument("--max-len", type=int, default=256)
    parser.add_argument("--hidden", type=int, default=32)
    parser.add_argument("--weight-seed", type=int, default=1234)
    parser.add_argument("--batch-limit", type=int, default=DEFAULT_BATCH_LIMIT)
    parser.add_argument(
        "--no-tagging",
        action="store_true",
        help="always answer 501 on /v1/tag even when spaCy is installed",
    )
    parser.add_argument("--workers", type=int, default=1)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    model = ToyMaskedLM(
        vocab_size=args.vocab_size,
        max_len=args.max_len,
        hidden=args.hidden,
        weight_seed=args.weight_seed,
    )
    app = create_app(
        model, batch_limit=args.batch_limit, enable_tagging=not args.no_tagging
    )
    uvicorn.run(app, host=args.host, port=args.port, workers=args.workers)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
