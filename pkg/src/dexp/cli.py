"""Command line entry point: one subcommand per pipeline stage plus serve."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import DexpError
from .pipeline import STAGES, load_config

_STAGE_HELP = {
    "synth": "generate synthetic weekly holdings and token metadata",
    "map": "resolve token ids to issuing protocols",
    "build": "construct weekly exposure graphs from snapshots",
    "metrics": "compute weekly risk reports and early warnings",
    "stress": "run contagion scenarios on every observed week",
    "train": "fit the link/weight/node forecaster on one fold",
    "evaluate": "score forecasts against the held-out test window",
    "forecast-measure": "predict forward graphs and a risk dashboard",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="TOML config file")
    common.add_argument("--seed", type=int, default=None, help="override the global seed")
    common.add_argument("--out", type=Path, default=None, help="override the artifact directory")
    common.add_argument("--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(
        prog="dexp",
        description="inter-protocol exposure graphs: build, stress, forecast",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES:
        sub.add_parser(name, parents=[common], help=_STAGE_HELP[name])
    serve = sub.add_parser("serve", parents=[common], help="serve artifacts over HTTP")
    serve.add_argument("--port", type=int, default=None, help="override the configured port")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config, seed=args.seed, out_dir=args.out)
        if args.command == "serve":
            import uvicorn

            from .service import build_app

            port = args.port if args.port is not None else cfg.serve_port
            uvicorn.run(build_app(cfg), host="127.0.0.1", port=port)
            return 0
        summary = STAGES[args.command](cfg)
        print(json.dumps(summary, sort_keys=True, default=str))
        return 0
    except DexpError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
