"""Command-line interface.

Every subcommand is a thin HTTP client of the app in ``service.py``. By
default requests go to an in-process instance over an ASGI transport, so no
server needs to be running; ``--server URL`` points the same requests at a
remote instance instead.

Exit codes: 0 success, 1 generic error, 2 empty pair selection,
3 estimator backend failure.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys
from pathlib import Path
from typing import Optional

import httpx

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_EMPTY_SELECTION = 2
EXIT_BACKEND_FAILURE = 3

_EXIT_BY_CODE = {
    "empty_selection": EXIT_EMPTY_SELECTION,
    "backend_failure": EXIT_BACKEND_FAILURE,
}


class CliError(Exception):
    def __init__(self, message: str, exit_code: int = EXIT_ERROR):
        super().__init__(message)
        self.exit_code = exit_code


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors, which would collide with
    # the empty-selection exit code; route usage errors through CliError.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(message)


async def _post_async(server: Optional[str], path: str, payload: dict) -> dict:
    if server is None:
        from .service import app

        client = httpx.AsyncClient(
            transport=httpx.ASGITransport(app=app),
            base_url="http://pose-consensus",
            timeout=None,
        )
    else:
        client = httpx.AsyncClient(base_url=server, timeout=None)
    async with client:
        try:
            response = await client.post(path, json=payload)
        except httpx.HTTPError as exc:
            raise CliError(f"request to {path} failed: {exc}") from exc
    if response.status_code >= 400:
        try:
            detail = response.json()["error"]
            code, message = detail["code"], detail["message"]
        except Exception:
            code, message = "http_error", response.text.strip()
        raise CliError(f"{code}: {message}", _EXIT_BY_CODE.get(code, EXIT_ERROR))
    return response.json()


def _post(server: Optional[str], path: str, payload: dict) -> dict:
    return asyncio.run(_post_async(server, path, payload))


def _load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"{path} is not valid JSON: {exc}") from exc


def _parse_backend(spec: str, timeout_s: float) -> dict:
    kind, sep, rest = spec.partition(":")
    if not sep or not rest:
        raise CliError(
            "backend must look like synthetic:<scenario file> or process:<command line>"
        )
    if kind == "synthetic":
        return {"kind": "synthetic", "scenario": _load_json(rest)}
    if kind == "process":
        return {"kind": "process", "command": rest, "timeout_s": timeout_s}
    raise CliError(f"unknown backend kind {kind!r}")


def _parse_buckets(spec: Optional[str]) -> Optional[list[float]]:
    if spec is None:
        return None
    try:
        return [float(edge) for edge in spec.split(",")]
    except ValueError as exc:
        raise CliError(f"bad bucket edges {spec!r}: {exc}") from exc


def _write_files(out_dir: Path, files: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in sorted(files):
        path = out_dir / name
        path.write_text(files[name], encoding="utf-8")
        print(f"wrote {path}")


def _cmd_select_pairs(args) -> int:
    payload = {
        "manifest": _load_json(args.manifest),
        "yaw_min_deg": args.yaw_min,
        "yaw_max_deg": args.yaw_max,
        "count": args.count,
        "seed": args.seed,
    }
    data = _post(args.server, "/pairs/select", payload)
    text = "".join(f"{pair_id}\n" for pair_id in data["pair_ids"])
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out} ({len(data['pair_ids'])} pairs)")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_run(args) -> int:
    cache_dir = args.cache_dir or os.environ.get("POSE_CONSENSUS_CACHE") or None
    payload = {
        "manifest": _load_json(args.manifest),
        "registry": _load_json(args.registry),
        "backend": _parse_backend(args.backend, args.timeout),
        "cache_dir": cache_dir,
        "config": {
            "k": args.k,
            "m_random": args.m_random,
            "include_uniform": not args.no_uniform,
            "seed": args.seed,
            "score_mode": args.score_mode,
            "variants": [v.strip() for v in args.variants.split(",") if v.strip()],
            "rotation_only": args.rotation_only,
            "yaw_min_deg": args.yaw_min,
            "yaw_max_deg": args.yaw_max,
            "count": args.count,
            "bucket_edges_deg": _parse_buckets(args.buckets),
            "auc_convention": "joint_max",
            "workers": args.workers,
        },
    }
    data = _post(args.server, "/runs", payload)
    _write_files(Path(args.out), data["files"])
    stats = data["stats"]
    print(
        "pairs={pairs_evaluated} requests={requests} "
        "backend_calls={backend_calls} cache_hits={cache_hits}".format(**stats)
    )
    return EXIT_OK


def _cmd_synth(args) -> int:
    payload = {
        "pairs": args.pairs,
        "yaw_min_deg": args.yaw_min,
        "yaw_max_deg": args.yaw_max,
        "consistent": args.consistent,
        "inconsistent": args.inconsistent,
        "degenerate": args.degenerate,
        "frames_per_video": args.frames_per_video,
        "seed": args.seed,
    }
    data = _post(args.server, "/synthetic/scenarios", payload)
    _write_files(Path(args.out), data["files"])
    return EXIT_OK


def _cmd_serve(args) -> int:
    try:
        import uvicorn
    except ImportError as exc:  # pragma: no cover - depends on extras
        raise CliError("uvicorn is not installed (pip install pose-consensus[serve])") from exc
    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="pose-consensus",
        description="Benchmark camera-pose estimates via multi-frame self-consistency.",
    )
    client_opts = argparse.ArgumentParser(add_help=False)
    client_opts.add_argument(
        "--server",
        metavar="URL",
        default=None,
        help="base URL of a running service (default: run in-process)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "select-pairs",
        parents=[client_opts],
        help="list pair ids whose ground-truth yaw falls in a band",
    )
    p.add_argument("--manifest", required=True, help="dataset manifest JSON")
    p.add_argument("--yaw-min", type=float, default=0.0, help="band lower edge, degrees")
    p.add_argument("--yaw-max", type=float, default=180.0, help="band upper edge, degrees")
    p.add_argument("--count", type=int, default=None, help="subsample to this many pairs")
    p.add_argument("--seed", type=int, default=0, help="seed for the subsample draw")
    p.add_argument("--out", default=None, help="write ids here instead of stdout")
    p.set_defaults(handler=_cmd_select_pairs)

    p = sub.add_parser(
        "run",
        parents=[client_opts],
        help="evaluate every selection variant over a manifest + video registry",
    )
    p.add_argument("--manifest", required=True, help="dataset manifest JSON")
    p.add_argument("--registry", required=True, help="video registry JSON")
    p.add_argument(
        "--backend",
        required=True,
        help="synthetic:<scenario file> or process:<command line>",
    )
    p.add_argument(
        "--cache-dir",
        default=None,
        help="estimate cache directory (default: $POSE_CONSENSUS_CACHE)",
    )
    p.add_argument("--k", type=int, default=5, help="frames per subset, anchors included")
    p.add_argument("--m-random", type=int, default=10, help="random subsets per video")
    p.add_argument(
        "--no-uniform",
        action="store_true",
        help="skip the deterministic evenly-spaced subset",
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--score-mode",
        choices=["total", "med-only", "bias-only"],
        default="total",
        help="which score drives video selection",
    )
    p.add_argument(
        "--variants",
        default="pair_only,medoid,average,oracle",
        help="comma-separated report variants",
    )
    p.add_argument(
        "--rotation-only",
        action="store_true",
        help="score and report rotation error only",
    )
    p.add_argument("--yaw-min", type=float, default=None, help="pair filter: min yaw, degrees")
    p.add_argument("--yaw-max", type=float, default=None, help="pair filter: max yaw, degrees")
    p.add_argument("--count", type=int, default=None, help="pair filter: subsample size")
    p.add_argument(
        "--buckets",
        default=None,
        help="comma-separated yaw bucket edges for a per-bucket breakdown",
    )
    p.add_argument("--workers", type=int, default=1, help="pairs evaluated in parallel")
    p.add_argument(
        "--timeout",
        type=float,
        default=300.0,
        help="per-estimate timeout for process backends, seconds",
    )
    p.add_argument("--out", default="out", help="directory for report files")
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser(
        "synth",
        parents=[client_opts],
        help="generate a synthetic scenario + manifest + registry",
    )
    p.add_argument("--pairs", type=int, default=8)
    p.add_argument("--yaw-min", type=float, default=50.0)
    p.add_argument("--yaw-max", type=float, default=65.0)
    p.add_argument("--consistent", type=int, default=1, help="well-behaved videos per pair")
    p.add_argument("--inconsistent", type=int, default=2, help="noisy videos per pair")
    p.add_argument(
        "--degenerate",
        type=int,
        default=1,
        help="videos per pair that are consistent around the wrong pose",
    )
    p.add_argument("--frames-per-video", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="synth", help="directory for the generated files")
    p.set_defaults(handler=_cmd_synth)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(handler=_cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.handler(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
