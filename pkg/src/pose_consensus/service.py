"""HTTP service wrapping the core library.

Every CLI command is a thin client of this app, so anything the command
line can do is equally available over HTTP. Inputs that are files on the
client side (manifests, registries, scenarios) travel inline as parsed
JSON documents; the response carries report files as strings for the
client to write out.

Note on ``/runs`` with a ``process`` backend: the estimator command is
launched on whatever machine serves this app (which is the local process
for the default in-process CLI transport).
"""

from __future__ import annotations

from typing import Literal, Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .benchmark import manifest_from_dict, registry_from_dict
from .benchmark.metrics import ErrorRow, aggregate
from .benchmark.selection import select_pairs
from .consensus import EstimateSample, ScoreMode, score_video
from .errors import (
    BackendTimeout,
    BackendUnavailable,
    EmptyReport,
    EmptySelection,
    InsufficientSamples,
    ManifestError,
    MalformedResponse,
    MissingPairBaseline,
    NotARotation,
    PoseConsensusError,
    VideoTooShort,
)
from .estimator import ProcessBackend, ResultCache, ScenarioSet, SyntheticBackend
from .geometry import RelativePose, dist_pose
from .pipeline import RunConfig, run_benchmark
from .synth import SynthParams, generate, render_files


class PoseModel(BaseModel):
    rotation: list[float] = Field(min_length=9, max_length=9)
    translation: list[float] = Field(min_length=3, max_length=3)

    def to_pose(self) -> RelativePose:
        return RelativePose(
            rotation=np.array(self.rotation, dtype=float).reshape(3, 3),
            translation=np.array(self.translation, dtype=float),
        )


class DistanceRequest(BaseModel):
    pose_a: PoseModel
    pose_b: PoseModel
    rotation_only: bool = False


class DistanceResponse(BaseModel):
    rot_rad: float
    trans_rad: float
    total_rad: float
    trans_defined: bool


class SelectPairsRequest(BaseModel):
    manifest: dict
    yaw_min_deg: float = 0.0
    yaw_max_deg: float = 180.0
    count: Optional[int] = None
    seed: int = 0


class SelectPairsResponse(BaseModel):
    pair_ids: list[str]


class ScoreVideoRequest(BaseModel):
    samples: list[PoseModel]
    pair_only_pose: Optional[PoseModel] = None
    score_mode: str = "total"
    rotation_only: bool = False


class ScoreVideoResponse(BaseModel):
    d_med: float
    d_bias: Optional[float]
    d_total: Optional[float]
    medoid_index: int


class RowModel(BaseModel):
    pair_id: str
    variant: str = "medoid"
    rot_err_deg: float
    trans_err_deg: Optional[float] = None
    selected_video_id: Optional[str] = None


class AggregateRequest(BaseModel):
    rows: list[RowModel]
    auc_convention: str = "joint_max"


class AggregateResponse(BaseModel):
    aggregates: dict


class SynthRequest(BaseModel):
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


class SynthResponse(BaseModel):
    files: dict[str, str]


class BackendSpec(BaseModel):
    kind: Literal["synthetic", "process"]
    scenario: Optional[dict] = None
    command: Optional[str] = None
    timeout_s: float = 300.0


class RunConfigModel(BaseModel):
    k: int = 5
    m_random: int = 10
    include_uniform: bool = True
    seed: int = 0
    score_mode: str = "total"
    variants: list[str] = ["pair_only", "medoid", "average", "oracle"]
    rotation_only: bool = False
    yaw_min_deg: Optional[float] = None
    yaw_max_deg: Optional[float] = None
    count: Optional[int] = None
    bucket_edges_deg: Optional[list[float]] = None
    auc_convention: str = "joint_max"
    workers: int = 1


class RunRequest(BaseModel):
    manifest: dict
    registry: dict
    backend: BackendSpec
    cache_dir: Optional[str] = None
    config: RunConfigModel = RunConfigModel()


class RunResponse(BaseModel):
    files: dict[str, str]
    stats: dict


def parse_score_mode(value: str) -> ScoreMode:
    try:
        return ScoreMode(value.replace("-", "_"))
    except ValueError:
        raise ManifestError(f"unknown score mode {value!r}") from None


def _error_payload(code: str, exc: Exception, status: int) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"error": {"code": code, "message": str(exc)}},
    )


def create_app() -> FastAPI:
    app = FastAPI(title="pose-consensus", version=__version__)

    @app.exception_handler(PoseConsensusError)
    async def _domain_error(request: Request, exc: PoseConsensusError):
        if isinstance(exc, EmptySelection):
            return _error_payload("empty_selection", exc, 422)
        if isinstance(exc, (BackendUnavailable, BackendTimeout, MalformedResponse)):
            return _error_payload("backend_failure", exc, 502)
        if isinstance(
            exc,
            (
                ManifestError,
                NotARotation,
                EmptyReport,
                MissingPairBaseline,
                InsufficientSamples,
                VideoTooShort,
            ),
        ):
            return _error_payload("bad_input", exc, 400)
        return _error_payload("internal", exc, 500)

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        return _error_payload("bad_input", exc, 400)

    @app.get("/health")
    async def health() -> dict:
        return {"status": "ok", "service": "pose-consensus", "version": __version__}

    @app.post("/geometry/distance", response_model=DistanceResponse)
    async def geometry_distance(req: DistanceRequest) -> DistanceResponse:
        d = dist_pose(req.pose_a.to_pose(), req.pose_b.to_pose(), rotation_only=req.rotation_only)
        return DistanceResponse(
            rot_rad=d.rot_rad,
            trans_rad=d.trans_rad,
            total_rad=d.total_rad,
            trans_defined=d.trans_defined,
        )

    @app.post("/pairs/select", response_model=SelectPairsResponse)
    async def pairs_select(req: SelectPairsRequest) -> SelectPairsResponse:
        manifest = manifest_from_dict(req.manifest)
        ids = select_pairs(manifest, req.yaw_min_deg, req.yaw_max_deg, req.count, req.seed)
        return SelectPairsResponse(pair_ids=ids)

    @app.post("/consensus/score", response_model=ScoreVideoResponse)
    async def consensus_score(req: ScoreVideoRequest) -> ScoreVideoResponse:
        samples = [
            EstimateSample(
                pair_id="request",
                video_id="request",
                subset=None,
                pose=p.to_pose(),
                status="ok",
            )
            for p in req.samples
        ]
        baseline = req.pair_only_pose.to_pose() if req.pair_only_pose else None
        score = score_video(
            samples, baseline, parse_score_mode(req.score_mode), req.rotation_only
        )
        return ScoreVideoResponse(
            d_med=score.d_med,
            d_bias=score.d_bias,
            d_total=score.d_total,
            medoid_index=score.medoid_index,
        )

    @app.post("/metrics/aggregate", response_model=AggregateResponse)
    async def metrics_aggregate(req: AggregateRequest) -> AggregateResponse:
        rows = [
            ErrorRow(
                pair_id=r.pair_id,
                variant=r.variant,
                rot_err_deg=r.rot_err_deg,
                trans_err_deg=r.trans_err_deg,
                selected_video_id=r.selected_video_id,
            )
            for r in req.rows
        ]
        agg = aggregate(rows, auc_convention=req.auc_convention)
        return AggregateResponse(aggregates=agg.to_dict())

    @app.post("/synthetic/scenarios", response_model=SynthResponse)
    async def synthetic_scenarios(req: SynthRequest) -> SynthResponse:
        params = SynthParams(**req.model_dump())
        scenario_set, manifest, registry = generate(params)
        return SynthResponse(files=render_files(scenario_set, manifest, registry))

    @app.post("/runs", response_model=RunResponse)
    async def runs(req: RunRequest) -> RunResponse:
        manifest = manifest_from_dict(req.manifest)
        registry = registry_from_dict(req.registry)
        if req.backend.kind == "synthetic":
            if req.backend.scenario is None:
                raise ManifestError("synthetic backend needs a scenario document")
            backend = SyntheticBackend(ScenarioSet.from_dict(req.backend.scenario))
        else:
            if not req.backend.command:
                raise ManifestError("process backend needs a command")
            backend = ProcessBackend(req.backend.command, timeout_s=req.backend.timeout_s)
        cache = ResultCache(req.cache_dir) if req.cache_dir else None
        cfg = req.config
        config = RunConfig(
            k=cfg.k,
            m_random=cfg.m_random,
            include_uniform=cfg.include_uniform,
            seed=cfg.seed,
            score_mode=parse_score_mode(cfg.score_mode),
            variants=tuple(cfg.variants),
            rotation_only=cfg.rotation_only,
            yaw_min_deg=cfg.yaw_min_deg,
            yaw_max_deg=cfg.yaw_max_deg,
            count=cfg.count,
            bucket_edges_deg=tuple(cfg.bucket_edges_deg) if cfg.bucket_edges_deg else None,
            auc_convention=cfg.auc_convention,
            workers=cfg.workers,
        )
        try:
            result = run_benchmark(manifest, registry, backend, cache, config)
        finally:
            backend.close()
        return RunResponse(files=result.files, stats=result.stats)

    return app


app = create_app()
