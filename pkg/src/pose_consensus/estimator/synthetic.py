"""Synthetic pose-estimator: a desk-scale stand-in for video generation plus
a real multi-image estimator.

Each pair has a ground-truth relative pose and a list of per-video noise
specs. Estimates are drawn around the ground truth (or around a displaced
center for deliberately-wrong videos) with half-normal angular noise. All
draws come from counter-based generators keyed by
``(seed, pair, video, subset)``, so any estimate can be recomputed in
isolation and repeated identical requests produce identical bytes.

Video quality taxonomy:

* ``consistent``    - every subset lands near the ground truth (σ small).
* ``inconsistent``  - each subset gets its own random center plus its own
                      draw, so estimates scatter widely.
* ``degenerate_wrong`` - estimates cluster tightly around
                      ``center_offset ∘ ground_truth``: self-consistent and
                      confidently wrong, the failure mode the baseline-bias
                      term exists to catch.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import ManifestError
from ..geometry import RelativePose, dist_rot, rotation_about_axis
from ..sampling import FrameSubset
from . import protocol
from .protocol import EstimatorRequest, EstimatorResponse

QUALITIES = ("consistent", "inconsistent", "degenerate_wrong")


@dataclass(frozen=True)
class VideoSpec:
    """Noise model for one generated video. Sigmas are radians."""

    quality: str
    center_offset: RelativePose
    sigma_rot: float
    sigma_dir: float

    def __post_init__(self):
        if self.quality not in QUALITIES:
            raise ValueError(f"unknown video quality {self.quality!r}")
        if self.sigma_rot < 0 or self.sigma_dir < 0:
            raise ValueError("noise sigmas must be non-negative")
        if self.quality == "degenerate_wrong":
            off_angle = dist_rot(self.center_offset.rotation, np.eye(3))
            off_shift = float(np.linalg.norm(self.center_offset.translation))
            if off_angle < 1e-12 and off_shift < 1e-12:
                raise ValueError("degenerate_wrong needs a non-identity center_offset")


@dataclass(frozen=True)
class SyntheticScenario:
    """Ground truth and noise model for a single pair."""

    pair_id: str
    ground_truth: RelativePose
    pair_sigma_rot: float
    pair_sigma_dir: float
    videos: tuple[VideoSpec, ...]
    seed: int

    def __post_init__(self):
        if self.pair_sigma_rot < 0 or self.pair_sigma_dir < 0:
            raise ValueError("noise sigmas must be non-negative")


@dataclass(frozen=True)
class ScenarioSet:
    """All pair scenarios of one synthetic experiment, sharing one seed.

    The shared seed is part of the serialized form (and therefore of
    ``version_digest``), so every scenario must carry it: a stray per-pair
    seed would change emitted estimates without changing the digest, which
    would poison result caches keyed on it.
    """

    seed: int
    pairs: dict[str, SyntheticScenario]

    def __post_init__(self):
        for pid, sc in self.pairs.items():
            if sc.pair_id != pid:
                raise ValueError(f"scenario keyed {pid!r} names itself {sc.pair_id!r}")
            if sc.seed != self.seed:
                raise ValueError(
                    f"scenario {pid!r} has seed {sc.seed}, set-wide seed is {self.seed}"
                )

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "seed": self.seed,
            "pairs": {
                pid: {
                    "ground_truth": _pose_to_dict(sc.ground_truth),
                    "pair_sigma_rot": sc.pair_sigma_rot,
                    "pair_sigma_dir": sc.pair_sigma_dir,
                    "videos": [
                        {
                            "quality": v.quality,
                            "center_offset": _pose_to_dict(v.center_offset),
                            "sigma_rot": v.sigma_rot,
                            "sigma_dir": v.sigma_dir,
                        }
                        for v in sc.videos
                    ],
                }
                for pid, sc in self.pairs.items()
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioSet":
        try:
            if doc.get("schema_version") != 1:
                raise ValueError(f"unsupported schema_version {doc.get('schema_version')!r}")
            seed = int(doc["seed"])
            pairs = {}
            for pid, p in doc["pairs"].items():
                pairs[pid] = SyntheticScenario(
                    pair_id=pid,
                    ground_truth=_pose_from_dict(p["ground_truth"]),
                    pair_sigma_rot=float(p["pair_sigma_rot"]),
                    pair_sigma_dir=float(p["pair_sigma_dir"]),
                    videos=tuple(
                        VideoSpec(
                            quality=v["quality"],
                            center_offset=_pose_from_dict(v["center_offset"]),
                            sigma_rot=float(v["sigma_rot"]),
                            sigma_dir=float(v["sigma_dir"]),
                        )
                        for v in p["videos"]
                    ),
                    seed=seed,
                )
            return cls(seed=seed, pairs=pairs)
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"invalid scenario document: {exc}") from exc

    @classmethod
    def load(cls, path) -> "ScenarioSet":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ManifestError(f"cannot read scenario file {path}: {exc}") from exc
        return cls.from_dict(doc)

    def version_digest(self) -> str:
        payload = protocol.dumps_canonical(self.to_dict())
        return hashlib.sha256(payload.encode()).hexdigest()[:12]


def _pose_to_dict(pose: RelativePose) -> dict:
    return {
        "rotation": [float(v) for v in pose.rotation.reshape(9)],
        "translation": [float(v) for v in pose.translation],
    }


def _pose_from_dict(doc: dict) -> RelativePose:
    rotation = np.array([float(v) for v in doc["rotation"]], dtype=float).reshape(3, 3)
    translation = np.array([float(v) for v in doc["translation"]], dtype=float)
    return RelativePose(rotation=rotation, translation=translation)


# --- frame reference scheme ------------------------------------------------

def anchor_refs(pair_id: str) -> tuple[str, str]:
    return (f"synth://{pair_id}/anchor/a", f"synth://{pair_id}/anchor/b")


def frame_ref(pair_id: str, video_ordinal: int, frame_index: int) -> str:
    return f"synth://{pair_id}/video/{video_ordinal}/frame/{frame_index:03d}"


_ANCHOR_RE = re.compile(r"^synth://(?P<pair>[^/]+)/anchor/(?P<side>[ab])$")
_FRAME_RE = re.compile(
    r"^synth://(?P<pair>[^/]+)/video/(?P<video>\d+)/frame/(?P<idx>\d+)$"
)


def _locate_request(frame_refs: tuple[str, ...]) -> tuple[str, Optional[int], tuple[int, ...]]:
    a = _ANCHOR_RE.match(frame_refs[0])
    b = _ANCHOR_RE.match(frame_refs[1])
    if not a or not b or a["side"] != "a" or b["side"] != "b" or a["pair"] != b["pair"]:
        raise ValueError(f"anchor references are malformed: {frame_refs[:2]}")
    pair_id = a["pair"]
    if len(frame_refs) == 2:
        return pair_id, None, ()
    video = None
    indices = []
    for ref in frame_refs[2:]:
        m = _FRAME_RE.match(ref)
        if not m or m["pair"] != pair_id:
            raise ValueError(f"interior frame reference is malformed: {ref!r}")
        ordinal = int(m["video"])
        if video is None:
            video = ordinal
        elif video != ordinal:
            raise ValueError("a request must not mix frames from different videos")
        indices.append(int(m["idx"]))
    return pair_id, video, tuple(indices)


# --- noise machinery --------------------------------------------------------

def _rng(seed: int, pair_id: str, video_token: str, draw_token: str) -> np.random.Generator:
    material = f"synth|{seed}|{pair_id}|{video_token}|{draw_token}".encode()
    digest = hashlib.sha256(material).digest()
    key = np.frombuffer(digest[:16], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _random_unit(rng: np.random.Generator) -> np.ndarray:
    while True:
        v = rng.normal(size=3)
        norm = float(np.linalg.norm(v))
        if norm > 1e-9:
            return v / norm


def _perturb_rotation(rng, rotation: np.ndarray, sigma: float) -> np.ndarray:
    if sigma <= 0.0:
        return rotation
    axis = _random_unit(rng)
    angle = abs(float(rng.normal())) * sigma
    return rotation_about_axis(axis, angle) @ rotation


def _perturb_direction(rng, translation: np.ndarray, sigma: float) -> np.ndarray:
    norm = float(np.linalg.norm(translation))
    if norm < 1e-12:
        return np.zeros(3)
    direction = translation / norm
    if sigma <= 0.0:
        return direction
    while True:
        v = _random_unit(rng)
        perp = v - float(np.dot(v, direction)) * direction
        perp_norm = float(np.linalg.norm(perp))
        if perp_norm > 1e-9:
            break
    angle = abs(float(rng.normal())) * sigma
    return rotation_about_axis(perp / perp_norm, angle) @ direction


def _noisy_pose(rng, base: RelativePose, sigma_rot: float, sigma_dir: float):
    rotation = _perturb_rotation(rng, base.rotation, sigma_rot)
    direction = _perturb_direction(rng, base.translation, sigma_dir)
    return rotation, direction


def _compose_offset(offset: RelativePose, base: RelativePose) -> RelativePose:
    rotation = offset.rotation @ base.rotation
    translation = offset.rotation @ base.translation + offset.translation
    return RelativePose(rotation=rotation, translation=translation)


def _sample_line(
    scenario: SyntheticScenario,
    video_ordinal: Optional[int],
    subset: FrameSubset,
    request_id: str,
) -> str:
    gt = scenario.ground_truth
    if video_ordinal is None:
        rng = _rng(scenario.seed, scenario.pair_id, "pair", "anchors")
        rotation, direction = _noisy_pose(rng, gt, scenario.pair_sigma_rot, scenario.pair_sigma_dir)
        return protocol.encode_ok_response(request_id, rotation, direction)

    spec = scenario.videos[video_ordinal]
    subset_token = ",".join(str(i) for i in subset.interior_indices) or "anchors"
    video_token = f"video{video_ordinal}"
    if spec.quality == "consistent":
        rng = _rng(scenario.seed, scenario.pair_id, video_token, subset_token)
        rotation, direction = _noisy_pose(rng, gt, spec.sigma_rot, spec.sigma_dir)
    elif spec.quality == "inconsistent":
        center_rng = _rng(scenario.seed, scenario.pair_id, video_token, subset_token + "|center")
        center_rot, center_dir = _noisy_pose(center_rng, gt, spec.sigma_rot, spec.sigma_dir)
        center = RelativePose(rotation=center_rot, translation=center_dir)
        draw_rng = _rng(scenario.seed, scenario.pair_id, video_token, subset_token + "|draw")
        rotation, direction = _noisy_pose(draw_rng, center, spec.sigma_rot, spec.sigma_dir)
    else:  # degenerate_wrong
        center = _compose_offset(spec.center_offset, gt)
        rng = _rng(scenario.seed, scenario.pair_id, video_token, subset_token)
        rotation, direction = _noisy_pose(rng, center, spec.sigma_rot, spec.sigma_dir)
    return protocol.encode_ok_response(request_id, rotation, direction)


def synthetic_sample(
    scenario: SyntheticScenario,
    video_ordinal: Optional[int],
    subset: FrameSubset,
    request_id: str = "synthetic",
) -> EstimatorResponse:
    """One simulated estimate, fully determined by scenario + coordinates.

    ``video_ordinal=None`` means the pair-only baseline, which uses the
    pair-level noise instead of any video spec.
    """
    line = _sample_line(scenario, video_ordinal, subset, request_id)
    return protocol.parse_response(line, expected_id=request_id)


class SyntheticBackend:
    """Estimator backend that serves scenario draws by frame reference.

    Understands only the ``synth://`` reference scheme emitted by the
    scenario generator; anything else is a caller bug and raises.
    """

    backend_id = "synthetic"

    def __init__(self, scenarios: ScenarioSet) -> None:
        self._scenarios = scenarios
        self.backend_version = scenarios.version_digest()

    def estimate_line(self, request: EstimatorRequest) -> str:
        pair_id, video_ordinal, indices = _locate_request(request.frame_refs)
        scenario = self._scenarios.pairs.get(pair_id)
        if scenario is None:
            raise ValueError(f"request references unknown pair {pair_id!r}")
        if video_ordinal is not None and video_ordinal >= len(scenario.videos):
            raise ValueError(f"pair {pair_id!r} has no video ordinal {video_ordinal}")
        subset = FrameSubset(
            pair_anchor=(request.frame_refs[0], request.frame_refs[1]),
            interior_indices=indices,
        )
        return _sample_line(scenario, video_ordinal, subset, request.request_id)

    def close(self) -> None:
        pass
