"""Entry point: pick a model, then hand the process over to the serve loop."""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from .models import ModelUnavailable, load_model
from .serve import serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="estimator-bridge",
        description="Serve relative-pose estimates over stdin/stdout.",
    )
    parser.add_argument(
        "--model",
        choices=["echo", "dust3r", "mast3r"],
        default="echo",
        help="which estimator to serve (default: echo, for wiring tests)",
    )
    parser.add_argument("--checkpoint", default=None, help="model weights file")
    parser.add_argument("--device", default="cuda", help="torch device (default: cuda)")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        model = load_model(args.model, checkpoint=args.checkpoint, device=args.device)
    except ModelUnavailable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return serve(model)


if __name__ == "__main__":
    sys.exit(main())
