"""Self-consistency scoring and pose aggregation over video samples.

A video is scored by how tightly its per-subset pose estimates cluster
(``d_med``: the medoid's mean distance to the other samples) and by how far
that cluster sits from the two-image baseline estimate (``d_bias``). The sum
``d_total`` is what selection minimizes by default: a video whose estimates
agree with each other but sit far from the baseline is suspect, because a
consistently wrong interpolation (think: the camera orbiting the wrong way)
clusters just as tightly as a correct one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    InsufficientSamples,
    MissingPairBaseline,
    NoSamples,
    NoVideos,
)
from .geometry import (
    RelativePose,
    dist_pose,
    pairwise_pose_distances,
    project_to_rotation,
)
from .sampling import PAIR_ONLY, FrameSubset


class ScoreMode(enum.Enum):
    """Which quantity drives video selection."""

    TOTAL = "total"
    MED_ONLY = "med_only"
    BIAS_ONLY = "bias_only"


@dataclass(frozen=True)
class EstimateSample:
    """One pose estimate from one frame subset (or from the bare pair)."""

    pair_id: str
    video_id: str  # PAIR_ONLY for the two-image baseline estimate
    subset: Optional[FrameSubset]
    pose: Optional[RelativePose]
    status: str  # "ok" | "estimator_failed"

    def __post_init__(self):
        if self.status not in ("ok", "estimator_failed"):
            raise ValueError(f"unknown sample status {self.status!r}")
        if (self.pose is not None) != (self.status == "ok"):
            raise ValueError("pose must be present exactly when status is ok")


@dataclass(frozen=True)
class VideoScore:
    video_id: str
    d_med: float
    d_bias: Optional[float]
    d_total: Optional[float]
    medoid_index: int  # position in the video's full sample list
    medoid_pose: RelativePose


@dataclass(frozen=True)
class ConsensusResult:
    pair_id: str
    variant: str  # "medoid" | "average" | "oracle" | "pair_only"
    selected_video_id: Optional[str]
    pose: RelativePose
    per_video_scores: tuple[VideoScore, ...] = field(default_factory=tuple)


def medoid(samples: Sequence[RelativePose], rotation_only: bool = False) -> tuple[int, float]:
    """Index and score of the sample closest on average to all the others.

    The score is the mean of the medoid's distances to the other samples
    (the diagonal is excluded). Ties go to the lowest index.

    Raises:
        InsufficientSamples: with fewer than two samples.
    """
    m = len(samples)
    if m < 2:
        raise InsufficientSamples(f"medoid needs at least 2 samples, got {m}")
    rotations = np.stack([s.rotation for s in samples])
    translations = np.stack([s.translation for s in samples])
    dist = pairwise_pose_distances(rotations, translations, rotation_only=rotation_only)
    means = dist.sum(axis=1) / (m - 1)  # diagonal is exactly zero
    index = int(np.argmin(means))  # argmin returns the first minimum
    return index, float(means[index])


def score_video(
    samples: Sequence[EstimateSample],
    pair_only_pose: Optional[RelativePose],
    score_mode: ScoreMode = ScoreMode.TOTAL,
    rotation_only: bool = False,
) -> VideoScore:
    """Cluster-tightness and baseline-agreement score for one video.

    ``samples`` is the video's full sample list; failed estimates are
    ignored but the returned ``medoid_index`` still refers to a position in
    the full list.
    """
    ok = [(i, s) for i, s in enumerate(samples) if s.status == "ok"]
    if len(ok) < 2:
        raise InsufficientSamples(
            f"video needs at least 2 usable samples, got {len(ok)}"
        )
    if pair_only_pose is None and score_mode in (ScoreMode.TOTAL, ScoreMode.BIAS_ONLY):
        raise MissingPairBaseline(f"score mode {score_mode.value} needs the pair-only pose")

    poses = [s.pose for _, s in ok]
    local_index, d_med = medoid(poses, rotation_only=rotation_only)
    medoid_pose = poses[local_index]

    d_bias = None
    d_total = None
    if pair_only_pose is not None:
        d_bias = dist_pose(medoid_pose, pair_only_pose, rotation_only=rotation_only).total_rad
        d_total = d_med + d_bias

    video_ids = {s.video_id for _, s in ok}
    if len(video_ids) != 1:
        raise ValueError(f"samples span multiple videos: {sorted(video_ids)}")
    return VideoScore(
        video_id=ok[0][1].video_id,
        d_med=d_med,
        d_bias=d_bias,
        d_total=d_total,
        medoid_index=ok[local_index][0],
        medoid_pose=medoid_pose,
    )


def _selection_key(score: VideoScore, mode: ScoreMode) -> float:
    if mode is ScoreMode.TOTAL:
        value = score.d_total
    elif mode is ScoreMode.MED_ONLY:
        value = score.d_med
    else:
        value = score.d_bias
    if value is None:
        raise MissingPairBaseline(
            f"video {score.video_id!r} has no {mode.value} score (pair baseline missing)"
        )
    return value


def select_best(
    videos: Sequence[VideoScore],
    pair_id: str,
    score_mode: ScoreMode = ScoreMode.TOTAL,
) -> ConsensusResult:
    """Pick the video with the lowest selection key; ties go to the earliest.

    Raises:
        NoVideos: on an empty list.
    """
    if not videos:
        raise NoVideos(f"pair {pair_id!r} has no scored videos to select from")
    best_ordinal = min(range(len(videos)), key=lambda i: (_selection_key(videos[i], score_mode), i))
    best = videos[best_ordinal]
    return ConsensusResult(
        pair_id=pair_id,
        variant="medoid",
        selected_video_id=best.video_id,
        pose=best.medoid_pose,
        per_video_scores=tuple(videos),
    )


def average_pose(samples: Sequence[RelativePose]) -> RelativePose:
    """Chordal-mean rotation and sign-aligned mean translation direction.

    The rotation is the projection of the elementwise mean matrix onto the
    rotation group. Because translation directions are only defined up to
    sign, each one is flipped to agree with the first usable sample before
    averaging; samples with (near-)zero translation are skipped, and if none
    remain the result carries a zero translation, which downstream distance
    code treats as "no direction defined".
    """
    if not samples:
        raise InsufficientSamples("average_pose needs at least one sample")
    mean_rot = np.mean([s.rotation for s in samples], axis=0)
    rotation = _project_always(mean_rot)

    units = []
    for s in samples:
        norm = float(np.linalg.norm(s.translation))
        if norm < 1e-8:
            continue
        units.append(s.translation / norm)
    if not units:
        return RelativePose(rotation=rotation, translation=np.zeros(3))
    reference = units[0]
    aligned = [u if float(np.dot(u, reference)) >= 0.0 else -u for u in units]
    mean_dir = np.mean(aligned, axis=0)
    norm = float(np.linalg.norm(mean_dir))
    if norm < 1e-8:
        return RelativePose(rotation=rotation, translation=np.zeros(3))
    return RelativePose(rotation=rotation, translation=mean_dir / norm)


def _project_always(matrix: np.ndarray) -> np.ndarray:
    """Polar projection that never raises: averaging must always produce
    *some* rotation, even for a rank-deficient mean (the choice is then
    arbitrary but deterministic)."""
    u, _, vt = np.linalg.svd(matrix)
    d = float(np.sign(np.linalg.det(u @ vt)))
    if d == 0.0:
        d = 1.0
    return u @ np.diag([1.0, 1.0, d]) @ vt


def oracle_select(
    samples: Sequence[EstimateSample],
    ground_truth: RelativePose,
    rotation_only: bool = False,
) -> ConsensusResult:
    """Lower-bound selector: the sample closest to the ground truth.

    Raises:
        NoSamples: if no sample has status ok.
    """
    ok = [s for s in samples if s.status == "ok"]
    if not ok:
        raise NoSamples("oracle selection needs at least one usable sample")
    errors = [dist_pose(s.pose, ground_truth, rotation_only=rotation_only).total_rad for s in ok]
    best = min(range(len(ok)), key=lambda i: (errors[i], i))
    chosen = ok[best]
    return ConsensusResult(
        pair_id=chosen.pair_id,
        variant="oracle",
        selected_video_id=chosen.video_id,
        pose=chosen.pose,
    )
