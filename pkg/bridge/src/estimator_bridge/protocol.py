"""The bridge's half of the wire protocol.

One JSON object per line, serialized canonically (sorted keys, compact
separators) so identical payloads are identical bytes. The bridge only ever
*parses* requests and the hello-ack, and *emits* hello and result lines;
ingestion-side tolerance (rotation projection and so on) is the host's job.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

PROTOCOL_VERSION = 1


class ProtocolError(Exception):
    """A line that violates the wire contract."""


@dataclass(frozen=True)
class Request:
    request_id: str
    frames: tuple[str, ...]


def dumps_canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _load_object(line: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"line is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ProtocolError("protocol messages must be JSON objects")
    return obj


def parse_request(line: str) -> Request:
    obj = _load_object(line)
    if obj.get("type") != "estimate":
        raise ProtocolError(f"expected an estimate request, got type {obj.get('type')!r}")
    request_id = obj.get("id")
    if not isinstance(request_id, str) or not request_id:
        raise ProtocolError("request id must be a non-empty string")
    frames = obj.get("frames")
    if not isinstance(frames, list) or len(frames) < 2:
        raise ProtocolError("request must list at least two frames")
    if not all(isinstance(f, str) and f for f in frames):
        raise ProtocolError("frame references must be non-empty strings")
    return Request(request_id=request_id, frames=tuple(frames))


def parse_hello_ack(line: str) -> None:
    obj = _load_object(line)
    if obj.get("type") != "hello-ack" or obj.get("protocol") != PROTOCOL_VERSION:
        raise ProtocolError(f"bad hello-ack: {line.strip()!r}")


def encode_hello(backend_id: str, version: str) -> str:
    return dumps_canonical(
        {
            "backend": backend_id,
            "protocol": PROTOCOL_VERSION,
            "type": "hello",
            "version": version,
        }
    )


def encode_ok_result(request_id: str, rotation, translation) -> str:
    """Serialize a successful estimate.

    ``rotation`` is anything that flattens to nine numbers, row-major;
    ``translation`` flattens to three.
    """
    flat_r = np.asarray(rotation, dtype=float).reshape(9)
    flat_t = np.asarray(translation, dtype=float).reshape(3)
    if not (np.isfinite(flat_r).all() and np.isfinite(flat_t).all()):
        raise ValueError("estimates must be finite")
    return dumps_canonical(
        {
            "id": request_id,
            "rotation": [float(v) for v in flat_r],
            "status": "ok",
            "translation": [float(v) for v in flat_t],
            "type": "result",
        }
    )


def encode_failed_result(request_id: str) -> str:
    return dumps_canonical({"id": request_id, "status": "failed", "type": "result"})
