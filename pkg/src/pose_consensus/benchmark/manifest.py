"""Dataset manifests and generated-video registries.

Both are JSON documents with an explicit ``schema_version`` so fixtures
stay human-diffable. Ground-truth transforms are stored as 16 row-major
numbers; rotation blocks are ingested tolerantly (projected onto the
rotation manifold when they carry small numerical drift).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ManifestError
from ..geometry import Pose, delta_yaw, project_to_rotation
from ..errors import DegenerateMatrix

_ROTATION_DRIFT_MAX = 1e-3
_BOTTOM_ROW_ATOL = 1e-9
_UP_AXIS_ATOL = 1e-6

FACINGS = ("outward", "center")
DIRECTIONS = ("ab", "ba")


@dataclass(frozen=True)
class PairRecord:
    pair_id: str
    image_a: str
    image_b: str
    pose_a: Pose
    pose_b: Pose
    rotation_only_eval: bool


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    up_axis: np.ndarray
    facing: str
    pairs: tuple[PairRecord, ...]

    def pair_map(self) -> dict[str, PairRecord]:
        return {p.pair_id: p for p in self.pairs}

    def pair_yaw_deg(self, pair: PairRecord) -> float:
        return delta_yaw(pair.pose_a, pair.pose_b, self.up_axis)


@dataclass(frozen=True)
class VideoRecord:
    pair_id: str
    video_id: str
    generator: str
    prompt_id: str
    direction: str
    frames: tuple[str, ...]


@dataclass(frozen=True)
class VideoRegistry:
    videos: dict[str, tuple[VideoRecord, ...]]

    def for_pair(self, pair_id: str) -> tuple[VideoRecord, ...]:
        return self.videos.get(pair_id, ())


def _ingest_transform(values, what: str) -> Pose:
    arr = np.asarray(values, dtype=float)
    if arr.shape == (16,):
        arr = arr.reshape(4, 4)
    if arr.shape != (4, 4):
        raise ManifestError(f"{what} must hold 16 row-major numbers")
    if not np.all(np.isfinite(arr)):
        raise ManifestError(f"{what} contains non-finite values")
    if np.abs(arr[3] - np.array([0.0, 0.0, 0.0, 1.0])).max() > _BOTTOM_ROW_ATOL:
        raise ManifestError(f"{what} bottom row must be (0,0,0,1)")
    block = arr[:3, :3]
    try:
        rotation = project_to_rotation(block)
    except DegenerateMatrix as exc:
        raise ManifestError(f"{what} rotation block is degenerate: {exc}") from exc
    drift = float(np.linalg.norm(block - rotation))
    if drift >= _ROTATION_DRIFT_MAX:
        raise ManifestError(f"{what} rotation block drifts {drift:.3e} from a rotation")
    return Pose(rotation=rotation, translation=arr[:3, 3])


def manifest_from_dict(doc: dict) -> DatasetManifest:
    try:
        if doc.get("schema_version") != 1:
            raise ManifestError(f"unsupported schema_version {doc.get('schema_version')!r}")
        name = doc["name"]
        if not isinstance(name, str):
            raise ManifestError("manifest name must be a string")
        up = np.asarray([float(v) for v in doc["up_axis"]], dtype=float)
        if up.shape != (3,):
            raise ManifestError("up_axis must be a 3-vector")
        norm = float(np.linalg.norm(up))
        if abs(norm - 1.0) > _UP_AXIS_ATOL:
            raise ManifestError(f"up_axis norm {norm!r} is not 1 within {_UP_AXIS_ATOL:g}")
        facing = doc["facing"]
        if facing not in FACINGS:
            raise ManifestError(f"facing must be one of {FACINGS}, got {facing!r}")
        pairs = []
        seen = set()
        for entry in doc["pairs"]:
            pair_id = entry["pair_id"]
            if not isinstance(pair_id, str) or not pair_id:
                raise ManifestError("pair_id must be a non-empty string")
            if pair_id in seen:
                raise ManifestError(f"duplicate pair_id {pair_id!r}")
            seen.add(pair_id)
            pairs.append(
                PairRecord(
                    pair_id=pair_id,
                    image_a=str(entry["image_a"]),
                    image_b=str(entry["image_b"]),
                    pose_a=_ingest_transform(entry["t_a"], f"pair {pair_id} t_a"),
                    pose_b=_ingest_transform(entry["t_b"], f"pair {pair_id} t_b"),
                    rotation_only_eval=bool(entry.get("rotation_only_eval", False)),
                )
            )
        return DatasetManifest(
            name=name, up_axis=up / norm, facing=facing, pairs=tuple(pairs)
        )
    except ManifestError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"invalid manifest document: {exc}") from exc


def registry_from_dict(doc: dict) -> VideoRegistry:
    try:
        if doc.get("schema_version") != 1:
            raise ManifestError(f"unsupported schema_version {doc.get('schema_version')!r}")
        videos: dict[str, tuple[VideoRecord, ...]] = {}
        for pair_id, entries in doc["videos"].items():
            records = []
            seen = set()
            for entry in entries:
                video_id = entry["video_id"]
                if video_id in seen:
                    raise ManifestError(f"duplicate video_id {video_id!r} for pair {pair_id!r}")
                seen.add(video_id)
                direction = entry["direction"]
                if direction not in DIRECTIONS:
                    raise ManifestError(f"direction must be ab or ba, got {direction!r}")
                frames = tuple(str(f) for f in entry["frames"])
                if not frames:
                    raise ManifestError(f"video {video_id!r} has an empty frame list")
                records.append(
                    VideoRecord(
                        pair_id=str(pair_id),
                        video_id=str(video_id),
                        generator=str(entry["generator"]),
                        prompt_id=str(entry["prompt_id"]),
                        direction=direction,
                        frames=frames,
                    )
                )
            videos[str(pair_id)] = tuple(records)
        return VideoRegistry(videos=videos)
    except ManifestError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ManifestError(f"invalid registry document: {exc}") from exc


def load_manifest(path) -> DatasetManifest:
    return manifest_from_dict(_read_json(path))


def load_registry(path) -> VideoRegistry:
    return registry_from_dict(_read_json(path))


def _read_json(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ManifestError(f"{path} must hold a JSON object")
    return doc


def manifest_to_dict(manifest: DatasetManifest) -> dict:
    return {
        "schema_version": 1,
        "name": manifest.name,
        "up_axis": [float(v) for v in manifest.up_axis],
        "facing": manifest.facing,
        "pairs": [
            {
                "pair_id": p.pair_id,
                "image_a": p.image_a,
                "image_b": p.image_b,
                "t_a": [float(v) for v in p.pose_a.matrix.reshape(16)],
                "t_b": [float(v) for v in p.pose_b.matrix.reshape(16)],
                "rotation_only_eval": p.rotation_only_eval,
            }
            for p in manifest.pairs
        ],
    }


def registry_to_dict(registry: VideoRegistry) -> dict:
    return {
        "schema_version": 1,
        "videos": {
            pair_id: [
                {
                    "video_id": v.video_id,
                    "generator": v.generator,
                    "prompt_id": v.prompt_id,
                    "direction": v.direction,
                    "frames": list(v.frames),
                }
                for v in records
            ]
            for pair_id, records in registry.videos.items()
        },
    }
