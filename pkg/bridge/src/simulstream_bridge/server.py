"""Command-line entry point: build backends from flags and serve."""
from __future__ import annotations

import argparse
from typing import Optional, Sequence

from fastapi import FastAPI

from .app import create_app
from .backends import BackendSpecError, build_lm, build_mt


def app_from_flags(lm_model: Optional[str], mt_model: Optional[str]) -> FastAPI:
    lm = build_lm(lm_model) if lm_model else None
    mt = build_mt(mt_model) if mt_model else None
    return create_app(lm=lm, mt=mt)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="simulstream-bridge",
        description="serve language and translation models over HTTP",
    )
    parser.add_argument("--port", type=int, default=8100)
    parser.add_argument(
        "--lm-model", help="ngram:corpus=PATH[,order=N,alpha=F] or echo"
    )
    parser.add_argument(
        "--mt-model",
        help="copy[:epsilon=F], lexicon:lexicon=PATH[,epsilon=F] "
        "or lookahead:lexicon=PATH[,delta=N,epsilon=F]",
    )
    args = parser.parse_args(argv)
    try:
        app = app_from_flags(args.lm_model, args.mt_model)
    except BackendSpecError as exc:
        parser.error(str(exc))
    import uvicorn

    uvicorn.run(app, host="127.0.0.1", port=args.port, log_level="info")
    return 0
