"""Generator for self-contained synthetic experiments.

Produces a matching triple of documents: a scenario file driving the
synthetic estimator, a dataset manifest with ground-truth transforms, and
a video registry whose frame references are virtual (``synth://...``), so
no image files are needed anywhere. Pair poses are built so the heading
change between the two cameras lands inside a requested yaw band while the
absolute poses themselves are fully random.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .benchmark.manifest import (
    DatasetManifest,
    PairRecord,
    VideoRecord,
    VideoRegistry,
    manifest_to_dict,
    registry_to_dict,
)
from .estimator.synthetic import (
    ScenarioSet,
    SyntheticScenario,
    VideoSpec,
    anchor_refs,
    frame_ref,
)
from .geometry import Pose, RelativePose, random_rotation, rotation_about_axis

UP_AXIS = (0.0, 1.0, 0.0)


@dataclass(frozen=True)
class SynthParams:
    """Knobs for the generated experiment. Angles are degrees."""

    pairs: int = 8
    yaw_min_deg: float = 50.0
    yaw_max_deg: float = 65.0
    consistent: int = 1
    inconsistent: int = 2
    degenerate: int = 1
    sigma_rot_consistent_deg: float = 2.0
    sigma_dir_consistent_deg: float = 2.0
    sigma_rot_inconsistent_deg: float = 25.0
    sigma_dir_inconsistent_deg: float = 25.0
    sigma_rot_degenerate_deg: float = 0.5
    sigma_dir_degenerate_deg: float = 0.5
    degenerate_offset_deg: float = 60.0
    pair_sigma_rot_deg: float = 8.0
    pair_sigma_dir_deg: float = 8.0
    frames_per_video: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.pairs < 0:
            raise ValueError("pairs must be non-negative")
        if not self.yaw_min_deg < self.yaw_max_deg:
            raise ValueError("need yaw_min < yaw_max")
        if min(self.consistent, self.inconsistent, self.degenerate) < 0:
            raise ValueError("video counts must be non-negative")
        if self.frames_per_video < 2:
            raise ValueError("videos need at least their two endpoint frames")


def _pair_rng(seed: int, index: int) -> np.random.Generator:
    digest = hashlib.sha256(f"fixture|{seed}|{index}".encode()).digest()
    return np.random.Generator(np.random.Philox(key=np.frombuffer(digest[:16], dtype=np.uint64)))


def _video_spec(params: SynthParams, quality: str, rng: np.random.Generator) -> VideoSpec:
    identity = RelativePose.identity()
    if quality == "consistent":
        return VideoSpec(
            quality=quality,
            center_offset=identity,
            sigma_rot=math.radians(params.sigma_rot_consistent_deg),
            sigma_dir=math.radians(params.sigma_dir_consistent_deg),
        )
    if quality == "inconsistent":
        return VideoSpec(
            quality=quality,
            center_offset=identity,
            sigma_rot=math.radians(params.sigma_rot_inconsistent_deg),
            sigma_dir=math.radians(params.sigma_dir_inconsistent_deg),
        )
    # degenerate_wrong: a confidently wrong heading, e.g. the camera path
    # orbiting the opposite way around the scene
    sign = 1.0 if rng.random() < 0.5 else -1.0
    offset = RelativePose(
        rotation=rotation_about_axis(UP_AXIS, sign * math.radians(params.degenerate_offset_deg)),
        translation=np.zeros(3),
    )
    return VideoSpec(
        quality=quality,
        center_offset=offset,
        sigma_rot=math.radians(params.sigma_rot_degenerate_deg),
        sigma_dir=math.radians(params.sigma_dir_degenerate_deg),
    )


def generate(params: SynthParams) -> tuple[ScenarioSet, DatasetManifest, VideoRegistry]:
    scenarios: dict[str, SyntheticScenario] = {}
    pair_records: list[PairRecord] = []
    registry_videos: dict[str, tuple[VideoRecord, ...]] = {}

    qualities = (
        ["consistent"] * params.consistent
        + ["inconsistent"] * params.inconsistent
        + ["degenerate_wrong"] * params.degenerate
    )

    for i in range(params.pairs):
        rng = _pair_rng(params.seed, i)
        pair_id = f"pair_{i:04d}"

        yaw_deg = float(rng.uniform(params.yaw_min_deg, params.yaw_max_deg))
        sign = 1.0 if rng.random() < 0.5 else -1.0
        r_rel = rotation_about_axis(UP_AXIS, sign * math.radians(yaw_deg))
        t_rel = rng.normal(size=3)
        t_rel = t_rel / np.linalg.norm(t_rel)
        gt = RelativePose(rotation=r_rel, translation=t_rel)

        r_a = random_rotation(rng)
        t_a = rng.normal(size=3)
        pose_a = Pose(rotation=r_a, translation=t_a)
        pose_b = Pose(rotation=r_rel @ r_a, translation=r_rel @ t_a + t_rel)

        order = list(rng.permutation(len(qualities)))
        specs = tuple(_video_spec(params, qualities[j], rng) for j in order)

        scenarios[pair_id] = SyntheticScenario(
            pair_id=pair_id,
            ground_truth=gt,
            pair_sigma_rot=math.radians(params.pair_sigma_rot_deg),
            pair_sigma_dir=math.radians(params.pair_sigma_dir_deg),
            videos=specs,
            seed=params.seed,
        )

        image_a, image_b = anchor_refs(pair_id)
        pair_records.append(
            PairRecord(
                pair_id=pair_id,
                image_a=image_a,
                image_b=image_b,
                pose_a=pose_a,
                pose_b=pose_b,
                rotation_only_eval=False,
            )
        )
        registry_videos[pair_id] = tuple(
            VideoRecord(
                pair_id=pair_id,
                video_id=f"v{ordinal}",
                generator="synthetic",
                prompt_id=f"p{ordinal // 2}",
                direction="ab" if ordinal % 2 == 0 else "ba",
                frames=tuple(
                    frame_ref(pair_id, ordinal, j)
                    for j in range(1, params.frames_per_video + 1)
                ),
            )
            for ordinal in range(len(specs))
        )

    scenario_set = ScenarioSet(seed=params.seed, pairs=scenarios)
    manifest = DatasetManifest(
        name=f"synthetic-seed{params.seed}",
        up_axis=np.asarray(UP_AXIS),
        facing="outward",
        pairs=tuple(pair_records),
    )
    registry = VideoRegistry(videos=registry_videos)
    return scenario_set, manifest, registry


def render_files(
    scenario_set: ScenarioSet,
    manifest: DatasetManifest,
    registry: VideoRegistry,
) -> dict[str, str]:
    """The three documents as {filename: content}, byte-stable."""

    def dump(doc: dict) -> str:
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    return {
        "scenario.json": dump(scenario_set.to_dict()),
        "manifest.json": dump(manifest_to_dict(manifest)),
        "registry.json": dump(registry_to_dict(registry)),
    }


def write_files(out_dir, files: dict[str, str]) -> list[Path]:
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, content in sorted(files.items()):
        path = root / name
        path.write_text(content)
        paths.append(path)
    return paths
