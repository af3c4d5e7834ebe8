"""Run the server: `papertrail-server [--host H] [--port P]`.

Checkpoints come from the environment (PAPERTRAIL_EMBEDDER,
PAPERTRAIL_RERANKER; "hash:<dim>" for the model-free test backends).
"""

from __future__ import annotations

import argparse

import uvicorn

from .app import create_app


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="papertrail-server")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8123)
    args = parser.parse_args(argv)
    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
