"""Line-delimited wire protocol between the host and pose-estimator backends.

One message per line, each a JSON object serialized canonically (sorted
keys, no whitespace) so identical payloads are identical bytes:

* handshake, sent by the backend process on startup::

    {"backend":"<id>","protocol":1,"type":"hello","version":"<version>"}

  answered by the host with ``{"protocol":1,"type":"hello-ack"}``.

* request::

    {"frames":["<ref>", ...],"id":"<string>","type":"estimate"}

  ``frames[0]`` and ``frames[1]`` are the two anchor images; any further
  entries are sampled interior frames in index order.

* response::

    {"id":"<id>","rotation":[9 numbers],"status":"ok","translation":[3 numbers],"type":"result"}

  ``rotation`` is row-major. A failed estimate answers with
  ``{"id":...,"status":"failed","type":"result"}`` (pose fields omitted).

Ingestion is tolerant: backends typically compute in float32, so the
rotation only has to be within 1e-3 (Frobenius) of the rotation manifold
and is then projected exactly. The translation is reduced to its unit
direction rounded through float32. That rounding step is what makes every
downstream score bit-stable when a backend rescales its translations:
direction is the only meaningful content, and float32 is the fidelity the
wire actually carries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import DegenerateMatrix, MalformedResponse
from ..geometry import RelativePose, project_to_rotation

PROTOCOL_VERSION = 1
ROTATION_RESIDUAL_MAX = 1e-3
_DIRECTION_EPS = 1e-8


def dumps_canonical(obj) -> str:
    """Canonical JSON: sorted keys, compact separators, stable float repr."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class EstimatorRequest:
    request_id: str
    frame_refs: tuple[str, ...]

    def __post_init__(self):
        if len(self.frame_refs) < 2:
            raise ValueError("a request needs at least the two anchor frames")
        if not all(isinstance(r, str) and r for r in self.frame_refs):
            raise ValueError("frame references must be non-empty strings")


@dataclass(frozen=True)
class EstimatorResponse:
    """A parsed, ingested backend answer.

    ``rotation`` is already projected onto the rotation manifold and
    ``translation`` is the float32-rounded unit direction (or the zero
    vector when the backend reported a negligible translation). ``line``
    preserves the wire bytes exactly as received, which is what the result
    cache stores.
    """

    request_id: str
    status: str
    rotation: Optional[np.ndarray]
    translation: Optional[np.ndarray]
    line: str

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def pose(self) -> Optional[RelativePose]:
        if not self.ok:
            return None
        return RelativePose(rotation=self.rotation, translation=self.translation)


def canonical_direction(translation, eps: float = _DIRECTION_EPS) -> np.ndarray:
    """Unit direction rounded through float32; zero vector if no direction."""
    t = np.asarray(translation, dtype=float)
    norm = float(np.linalg.norm(t))
    if norm < eps:
        return np.zeros(3)
    return (t / norm).astype(np.float32).astype(float)


def encode_request(req: EstimatorRequest) -> str:
    return dumps_canonical(
        {"frames": list(req.frame_refs), "id": req.request_id, "type": "estimate"}
    )


def parse_request(line: str) -> EstimatorRequest:
    obj = _load_object(line)
    if obj.get("type") != "estimate":
        raise MalformedResponse(f"expected an estimate request, got {obj.get('type')!r}")
    frames = obj.get("frames")
    if not isinstance(frames, list) or len(frames) < 2:
        raise MalformedResponse("request must list at least two frames")
    if not all(isinstance(f, str) for f in frames):
        raise MalformedResponse("frame references must be strings")
    request_id = obj.get("id")
    if not isinstance(request_id, str) or not request_id:
        raise MalformedResponse("request id must be a non-empty string")
    return EstimatorRequest(request_id=request_id, frame_refs=tuple(frames))


def encode_ok_response(request_id: str, rotation, translation) -> str:
    r = np.asarray(rotation, dtype=float).reshape(9)
    t = np.asarray(translation, dtype=float).reshape(3)
    return dumps_canonical(
        {
            "id": request_id,
            "rotation": [float(v) for v in r],
            "status": "ok",
            "translation": [float(v) for v in t],
            "type": "result",
        }
    )


def encode_failed_response(request_id: str) -> str:
    return dumps_canonical({"id": request_id, "status": "failed", "type": "result"})


def parse_response(line: str, expected_id: Optional[str] = None) -> EstimatorResponse:
    """Validate and ingest one response line.

    Raises:
        MalformedResponse: on anything that violates the wire contract,
            including a rotation too far from the rotation manifold.
    """
    obj = _load_object(line)
    if obj.get("type") != "result":
        raise MalformedResponse(f"expected a result line, got type {obj.get('type')!r}")
    request_id = obj.get("id")
    if not isinstance(request_id, str) or not request_id:
        raise MalformedResponse("result id must be a non-empty string")
    if expected_id is not None and request_id != expected_id:
        raise MalformedResponse(f"result id {request_id!r} does not match request {expected_id!r}")
    status = obj.get("status")
    if status not in ("ok", "failed"):
        raise MalformedResponse(f"unknown result status {status!r}")

    stripped = line.rstrip("\n")
    if status == "failed":
        return EstimatorResponse(
            request_id=request_id, status="failed", rotation=None, translation=None, line=stripped
        )

    raw_rotation = _number_list(obj.get("rotation"), 9, "rotation")
    raw_translation = _number_list(obj.get("translation"), 3, "translation")
    matrix = np.array(raw_rotation, dtype=float).reshape(3, 3)
    try:
        projected = project_to_rotation(matrix)
    except DegenerateMatrix as exc:
        raise MalformedResponse(f"rotation is not projectable: {exc}") from exc
    residual = float(np.linalg.norm(matrix - projected))
    if residual >= ROTATION_RESIDUAL_MAX:
        raise MalformedResponse(
            f"rotation drifts {residual:.3e} from the manifold (limit {ROTATION_RESIDUAL_MAX:.0e})"
        )
    direction = canonical_direction(np.array(raw_translation, dtype=float))
    return EstimatorResponse(
        request_id=request_id,
        status="ok",
        rotation=projected,
        translation=direction,
        line=stripped,
    )


def encode_hello(backend_id: str, version: str) -> str:
    return dumps_canonical(
        {"backend": backend_id, "protocol": PROTOCOL_VERSION, "type": "hello", "version": version}
    )


def parse_hello(line: str) -> tuple[str, str]:
    obj = _load_object(line)
    if obj.get("type") != "hello":
        raise MalformedResponse(f"expected hello, got type {obj.get('type')!r}")
    if obj.get("protocol") != PROTOCOL_VERSION:
        raise MalformedResponse(f"unsupported protocol version {obj.get('protocol')!r}")
    backend = obj.get("backend")
    version = obj.get("version")
    if not isinstance(backend, str) or not isinstance(version, str):
        raise MalformedResponse("hello must carry string backend and version fields")
    return backend, version


def encode_hello_ack() -> str:
    return dumps_canonical({"protocol": PROTOCOL_VERSION, "type": "hello-ack"})


def parse_hello_ack(line: str) -> None:
    obj = _load_object(line)
    if obj.get("type") != "hello-ack" or obj.get("protocol") != PROTOCOL_VERSION:
        raise MalformedResponse(f"bad hello-ack: {line!r}")


def _load_object(line: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedResponse(f"line is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedResponse("protocol messages must be JSON objects")
    return obj


def _number_list(value, length: int, name: str) -> list[float]:
    if not isinstance(value, list) or len(value) != length:
        raise MalformedResponse(f"{name} must be a list of {length} numbers")
    out = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise MalformedResponse(f"{name} contains a non-number: {v!r}")
        f = float(v)
        if not np.isfinite(f):
            raise MalformedResponse(f"{name} contains a non-finite value")
        out.append(f)
    return out
