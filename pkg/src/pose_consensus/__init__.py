"""Camera-pose estimation benchmark built around multi-frame self-consistency.

Given an image pair plus candidate videos that interpolate between the two
views, the library scores each video by how consistently a two-view pose
estimator answers across sampled frame subsets, selects the most trustworthy
video, and reports the medoid pose estimate against ground truth.
"""

__version__ = "0.1.0"

from .consensus import (
    ConsensusResult,
    EstimateSample,
    ScoreMode,
    VideoScore,
    average_pose,
    medoid,
    oracle_select,
    score_video,
    select_best,
)
from .geometry import (
    Pose,
    PoseDistance,
    RelativePose,
    delta_yaw,
    dist_pose,
    dist_rot,
    dist_trans,
    relative_pose,
)
from .pipeline import RunConfig, RunResult, run_benchmark
from .sampling import PAIR_ONLY, FrameSubset, SamplingPlan, build_plan

__all__ = [
    "__version__",
    "ConsensusResult",
    "EstimateSample",
    "ScoreMode",
    "VideoScore",
    "average_pose",
    "medoid",
    "oracle_select",
    "score_video",
    "select_best",
    "Pose",
    "PoseDistance",
    "RelativePose",
    "delta_yaw",
    "dist_pose",
    "dist_rot",
    "dist_trans",
    "relative_pose",
    "RunConfig",
    "RunResult",
    "run_benchmark",
    "PAIR_ONLY",
    "FrameSubset",
    "SamplingPlan",
    "build_plan",
]
