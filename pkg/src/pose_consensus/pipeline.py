"""End-to-end orchestration: estimate, score, select, evaluate, report.

Per pair the pipeline makes one pair-only baseline estimate plus one
estimate per (video, frame subset), scores every usable video, and then
materializes the requested output variants:

* ``pair_only`` - the baseline estimate itself.
* ``medoid``    - medoid pose of the best-scoring video.
* ``average``   - average over all usable video samples.
* ``oracle``    - the sample closest to ground truth (a selection upper
                  bound; needs ground truth, which manifests carry).

Failure policy: failed estimates are dropped from their video; a video
with fewer than two usable samples is excluded from scoring; if every
video is excluded, video-based variants fall back to the pair-only pose;
if even the baseline failed, the affected variant rows are omitted (with a
note). Everything is deterministic given (inputs, seed, cache state), and
pairs are always emitted in pair_id order regardless of worker count.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .benchmark.manifest import DatasetManifest, PairRecord, VideoRecord, VideoRegistry
from .benchmark.metrics import Aggregates, ErrorRow, YawBucket, aggregate, pair_errors, yaw_sweep
from .benchmark.reports import render_curve_csv, render_per_pair_csv, render_summary
from .benchmark.selection import select_pairs
from .consensus import (
    ConsensusResult,
    EstimateSample,
    ScoreMode,
    VideoScore,
    average_pose,
    oracle_select,
    score_video,
    select_best,
)
from .errors import EmptyReport, InsufficientSamples, MalformedResponse, VideoTooShort
from .estimator import (
    CountingBackend,
    EstimatorBackend,
    EstimatorRequest,
    ResultCache,
    cached_estimate,
    request_key,
)
from .geometry import RelativePose, relative_pose
from .sampling import PAIR_ONLY, FrameSubset, SamplingPlan, build_plan

logger = logging.getLogger(__name__)

VARIANTS = ("pair_only", "medoid", "average", "oracle")


@dataclass(frozen=True)
class RunConfig:
    k: int = 5
    m_random: int = 10
    include_uniform: bool = True
    seed: int = 0
    score_mode: ScoreMode = ScoreMode.TOTAL
    variants: tuple[str, ...] = VARIANTS
    rotation_only: bool = False
    yaw_min_deg: Optional[float] = None
    yaw_max_deg: Optional[float] = None
    count: Optional[int] = None
    bucket_edges_deg: Optional[tuple[float, ...]] = None
    auc_convention: str = "joint_max"
    workers: int = 1

    def __post_init__(self):
        if not self.variants:
            raise ValueError("at least one output variant is required")
        unknown = set(self.variants) - set(VARIANTS)
        if unknown:
            raise ValueError(f"unknown variants: {sorted(unknown)}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


@dataclass
class PairEvaluation:
    pair_id: str
    rows: list[ErrorRow]
    scores: list[VideoScore]
    requests: int
    notes: list[str] = field(default_factory=list)


@dataclass
class RunResult:
    rows: list[ErrorRow]
    aggregates: dict[str, Aggregates]
    yaw_buckets: Optional[dict[str, list[YawBucket]]]
    files: dict[str, str]
    stats: dict
    notes: list[str]


def _request(backend: EstimatorBackend, frame_refs: tuple[str, ...]) -> EstimatorRequest:
    # Content-derived ids keep response bytes identical across runs.
    rid = request_key(backend.backend_id, backend.backend_version, frame_refs)
    return EstimatorRequest(request_id=rid, frame_refs=frame_refs)


def evaluate_pair(
    pair: PairRecord,
    videos: Sequence[VideoRecord],
    backend: EstimatorBackend,
    cache: Optional[ResultCache],
    config: RunConfig,
) -> PairEvaluation:
    anchors = (pair.image_a, pair.image_b)
    gt = relative_pose(pair.pose_a, pair.pose_b)
    rotation_only = config.rotation_only or pair.rotation_only_eval
    plan = SamplingPlan(
        k=config.k,
        m_random=config.m_random,
        include_uniform=config.include_uniform,
        seed=config.seed,
    )
    notes: list[str] = []
    requests = 0

    def fetch(refs: tuple[str, ...]):
        nonlocal requests
        requests += 1
        return cached_estimate(cache, backend, _request(backend, refs))

    # Pair-only baseline.
    baseline_pose: Optional[RelativePose] = None
    try:
        response = fetch(anchors)
        if response.ok:
            baseline_pose = response.pose
        else:
            notes.append(f"{pair.pair_id}: pair-only estimate failed")
    except MalformedResponse as exc:
        notes.append(f"{pair.pair_id}: pair-only estimate malformed ({exc})")

    # Per-video samples, in registry order.
    samples_by_video: list[tuple[VideoRecord, list[EstimateSample]]] = []
    for video in videos:
        try:
            subsets = build_plan(video, plan, anchors)
        except VideoTooShort as exc:
            notes.append(f"{pair.pair_id}/{video.video_id}: skipped ({exc})")
            continue
        samples: list[EstimateSample] = []
        for subset in subsets:
            refs = anchors + tuple(video.frames[i - 1] for i in subset.interior_indices)
            status, pose = "estimator_failed", None
            try:
                response = fetch(refs)
                if response.ok:
                    status, pose = "ok", response.pose
            except MalformedResponse as exc:
                notes.append(f"{pair.pair_id}/{video.video_id}: malformed response ({exc})")
            samples.append(
                EstimateSample(
                    pair_id=pair.pair_id,
                    video_id=video.video_id,
                    subset=subset,
                    pose=pose,
                    status=status,
                )
            )
        samples_by_video.append((video, samples))

    # Scoring. If the baseline is gone, bias-dependent modes degrade to the
    # spread-only score rather than dropping the pair.
    effective_mode = config.score_mode
    if baseline_pose is None and config.score_mode is not ScoreMode.MED_ONLY:
        effective_mode = ScoreMode.MED_ONLY
        notes.append(f"{pair.pair_id}: no baseline; scoring med-only")
    scores: list[VideoScore] = []
    for video, samples in samples_by_video:
        try:
            scores.append(
                score_video(samples, baseline_pose, effective_mode, rotation_only)
            )
        except InsufficientSamples:
            notes.append(f"{pair.pair_id}/{video.video_id}: fewer than 2 usable samples")

    video_ok_samples = [
        s for _, samples in samples_by_video for s in samples if s.status == "ok"
    ]

    def fall_back(variant: str) -> Optional[ConsensusResult]:
        if baseline_pose is None:
            notes.append(f"{pair.pair_id}: variant {variant} dropped (no estimates at all)")
            return None
        notes.append(f"{pair.pair_id}: variant {variant} fell back to the pair-only pose")
        return ConsensusResult(
            pair_id=pair.pair_id, variant=variant, selected_video_id=None, pose=baseline_pose
        )

    results: dict[str, Optional[ConsensusResult]] = {}
    for variant in config.variants:
        if variant == "pair_only":
            if baseline_pose is None:
                notes.append(f"{pair.pair_id}: variant pair_only dropped (baseline failed)")
                results[variant] = None
            else:
                results[variant] = ConsensusResult(
                    pair_id=pair.pair_id,
                    variant="pair_only",
                    selected_video_id=PAIR_ONLY,
                    pose=baseline_pose,
                )
        elif variant == "medoid":
            results[variant] = (
                select_best(scores, pair.pair_id, effective_mode)
                if scores
                else fall_back("medoid")
            )
        elif variant == "average":
            if video_ok_samples:
                pose = average_pose([s.pose for s in video_ok_samples])
                results[variant] = ConsensusResult(
                    pair_id=pair.pair_id, variant="average", selected_video_id=None, pose=pose
                )
            else:
                results[variant] = fall_back("average")
        else:  # oracle
            results[variant] = (
                oracle_select(video_ok_samples, gt, rotation_only)
                if video_ok_samples
                else fall_back("oracle")
            )

    rows = []
    for variant in config.variants:
        result = results.get(variant)
        if result is None:
            continue
        rot_err, trans_err = pair_errors(result, gt, rotation_only)
        rows.append(
            ErrorRow(
                pair_id=pair.pair_id,
                variant=variant,
                rot_err_deg=rot_err,
                trans_err_deg=trans_err,
                selected_video_id=result.selected_video_id,
            )
        )
    return PairEvaluation(
        pair_id=pair.pair_id, rows=rows, scores=scores, requests=requests, notes=notes
    )


def run_benchmark(
    manifest: DatasetManifest,
    registry: VideoRegistry,
    backend: EstimatorBackend,
    cache: Optional[ResultCache],
    config: RunConfig,
) -> RunResult:
    pair_map = manifest.pair_map()
    if config.yaw_min_deg is not None or config.yaw_max_deg is not None or config.count is not None:
        lo = config.yaw_min_deg if config.yaw_min_deg is not None else 0.0
        hi = config.yaw_max_deg if config.yaw_max_deg is not None else 180.0
        pair_ids = select_pairs(manifest, lo, hi, config.count, config.seed)
    else:
        pair_ids = sorted(pair_map)
    pairs = [pair_map[pid] for pid in pair_ids]

    counting = CountingBackend(backend)

    def work(pair: PairRecord) -> PairEvaluation:
        return evaluate_pair(pair, registry.for_pair(pair.pair_id), counting, cache, config)

    if config.workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            evaluations = list(pool.map(work, pairs))
    else:
        evaluations = [work(p) for p in pairs]
    evaluations.sort(key=lambda e: e.pair_id)

    rows: list[ErrorRow] = []
    notes: list[str] = []
    total_requests = 0
    for ev in evaluations:
        rows.extend(ev.rows)
        notes.extend(ev.notes)
        total_requests += ev.requests
    for note in notes:
        logger.warning("%s", note)

    aggregates: dict[str, Aggregates] = {}
    for variant in config.variants:
        variant_rows = [r for r in rows if r.variant == variant]
        try:
            aggregates[variant] = aggregate(variant_rows, auc_convention=config.auc_convention)
        except EmptyReport:
            notes.append(f"variant {variant}: no rows to aggregate")

    yaw_buckets: Optional[dict[str, list[YawBucket]]] = None
    if config.bucket_edges_deg:
        yaw_buckets = {
            variant: yaw_sweep(
                [r for r in rows if r.variant == variant],
                manifest,
                config.bucket_edges_deg,
                auc_convention=config.auc_convention,
            )
            for variant in aggregates
        }

    stats = {
        "pairs_evaluated": len(pairs),
        "requests": total_requests,
        "backend_calls": counting.calls,
        "cache_hits": total_requests - counting.calls,
        "notes": sorted(notes),
    }
    files = _render_files(manifest, config, backend, rows, aggregates, yaw_buckets, stats)
    return RunResult(
        rows=rows,
        aggregates=aggregates,
        yaw_buckets=yaw_buckets,
        files=files,
        stats=stats,
        notes=notes,
    )


def _render_files(
    manifest: DatasetManifest,
    config: RunConfig,
    backend: EstimatorBackend,
    rows: list[ErrorRow],
    aggregates: dict[str, Aggregates],
    yaw_buckets: Optional[dict[str, list[YawBucket]]],
    stats: dict,
) -> dict[str, str]:
    import json

    config_echo = {
        "k": config.k,
        "m_random": config.m_random,
        "include_uniform": config.include_uniform,
        "seed": config.seed,
        "score_mode": config.score_mode.value,
        "variants": list(config.variants),
        "rotation_only": config.rotation_only,
        "yaw_min_deg": config.yaw_min_deg,
        "yaw_max_deg": config.yaw_max_deg,
        "count": config.count,
        "bucket_edges_deg": list(config.bucket_edges_deg) if config.bucket_edges_deg else None,
        "auc_convention": config.auc_convention,
        "backend_id": backend.backend_id,
        "backend_version": backend.backend_version,
    }
    files = {
        "per_pair.csv": render_per_pair_csv(rows),
        "summary.json": render_summary(
            dataset=manifest.name,
            config=config_echo,
            variants=aggregates,
            yaw_buckets=yaw_buckets,
        ),
        # run_stats.json describes the run (cache behaviour included), not
        # the results; warm-cache reruns change it while every other file
        # stays byte-identical.
        "run_stats.json": json.dumps(stats, sort_keys=True, indent=2) + "\n",
    }
    for variant in aggregates:
        variant_rows = [r for r in rows if r.variant == variant]
        files[f"curve_{variant}.csv"] = render_curve_csv(variant_rows)
    return files
