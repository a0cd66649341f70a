"""The evaluation metric suite.

Errors are reported per pair and variant in degrees. Accuracies use a
strict ``<`` at each threshold; the 30-point area-under-curve metric spans
integer thresholds 1..30 and, by default, gates each pair on the worse of
its rotation and translation errors (pairs evaluated rotation-only count
with their rotation error alone).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from ..consensus import ConsensusResult
from ..errors import EmptyReport
from ..geometry import RelativePose, dist_rot, dist_trans
from .manifest import DatasetManifest

ACC_THRESHOLDS = (5, 15, 30)
AUC_MAX_DEG = 30
AUC_CONVENTIONS = ("joint_max", "mean_per_quantity")


@dataclass(frozen=True)
class ErrorRow:
    pair_id: str
    variant: str
    rot_err_deg: float
    trans_err_deg: Optional[float]
    selected_video_id: Optional[str]


@dataclass(frozen=True)
class Aggregates:
    count: int
    mre: float
    mte: Optional[float]
    r_acc: dict[int, float]
    t_acc: Optional[dict[int, float]]
    auc30: float

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "mre": self.mre,
            "mte": self.mte,
            "r_acc": {str(t): v for t, v in self.r_acc.items()},
            "t_acc": None if self.t_acc is None else {str(t): v for t, v in self.t_acc.items()},
            "auc30": self.auc30,
        }


def pair_errors(
    result: ConsensusResult,
    gt: RelativePose,
    rotation_only: bool = False,
) -> tuple[float, Optional[float]]:
    """Rotation and translation error of one result against ground truth.

    The translation error is absent when the pair is evaluated
    rotation-only or when either side has no defined translation direction.
    """
    rot = math.degrees(dist_rot(result.pose.rotation, gt.rotation))
    if rotation_only:
        return rot, None
    trans_rad, defined = dist_trans(result.pose.translation, gt.translation)
    return rot, math.degrees(trans_rad) if defined else None


def aggregate(
    rows: Sequence[ErrorRow],
    thresholds: Sequence[int] = ACC_THRESHOLDS,
    auc_convention: str = "joint_max",
) -> Aggregates:
    """Summary metrics over per-pair rows (one variant's rows at a time).

    Raises:
        EmptyReport: when ``rows`` is empty.
    """
    if not rows:
        raise EmptyReport("cannot aggregate zero rows")
    if auc_convention not in AUC_CONVENTIONS:
        raise ValueError(f"unknown AUC convention {auc_convention!r}")
    n = len(rows)
    rot = [r.rot_err_deg for r in rows]
    trans = [r.trans_err_deg for r in rows if r.trans_err_deg is not None]
    mre = sum(rot) / n
    mte = sum(trans) / len(trans) if trans else None
    r_acc = {int(t): 100.0 * _count_below(rot, t) / n for t in thresholds}
    t_acc = (
        {int(t): 100.0 * _count_below(trans, t) / len(trans) for t in thresholds}
        if trans
        else None
    )
    return Aggregates(
        count=n, mre=mre, mte=mte, r_acc=r_acc, t_acc=t_acc,
        auc30=_auc30(rows, auc_convention),
    )


def _count_below(values: Iterable[float], threshold: float) -> int:
    return sum(1 for v in values if v < threshold)


def _joint_error(row: ErrorRow) -> float:
    if row.trans_err_deg is None:
        return row.rot_err_deg
    return max(row.rot_err_deg, row.trans_err_deg)


def _auc30(rows: Sequence[ErrorRow], convention: str) -> float:
    n = len(rows)
    if convention == "joint_max":
        joint = [_joint_error(r) for r in rows]
        total = sum(_count_below(joint, tau) / n for tau in range(1, AUC_MAX_DEG + 1))
        return 100.0 * total / AUC_MAX_DEG
    # mean_per_quantity: average the two per-quantity areas
    rot = [r.rot_err_deg for r in rows]
    trans = [r.trans_err_deg for r in rows if r.trans_err_deg is not None]
    auc_rot = 100.0 * sum(
        _count_below(rot, tau) / n for tau in range(1, AUC_MAX_DEG + 1)
    ) / AUC_MAX_DEG
    if not trans:
        return auc_rot
    auc_trans = 100.0 * sum(
        _count_below(trans, tau) / len(trans) for tau in range(1, AUC_MAX_DEG + 1)
    ) / AUC_MAX_DEG
    return (auc_rot + auc_trans) / 2.0


def accuracy_curve(rows: Sequence[ErrorRow]) -> list[tuple[int, float, Optional[float], float]]:
    """Per-threshold accuracies for thresholds 1..30 degrees.

    Returns tuples ``(threshold_deg, rot_acc, trans_acc, joint_acc)``;
    ``trans_acc`` is None when no row carries a translation error.
    """
    if not rows:
        raise EmptyReport("cannot build a curve from zero rows")
    n = len(rows)
    rot = [r.rot_err_deg for r in rows]
    trans = [r.trans_err_deg for r in rows if r.trans_err_deg is not None]
    joint = [_joint_error(r) for r in rows]
    curve = []
    for tau in range(1, AUC_MAX_DEG + 1):
        rot_acc = 100.0 * _count_below(rot, tau) / n
        trans_acc = 100.0 * _count_below(trans, tau) / len(trans) if trans else None
        joint_acc = 100.0 * _count_below(joint, tau) / n
        curve.append((tau, rot_acc, trans_acc, joint_acc))
    return curve


@dataclass(frozen=True)
class YawBucket:
    lo_deg: float
    hi_deg: float
    count: int
    aggregates: Optional[Aggregates]


def yaw_sweep(
    rows: Sequence[ErrorRow],
    manifest: DatasetManifest,
    bucket_edges_deg: Sequence[float],
    auc_convention: str = "joint_max",
) -> list[YawBucket]:
    """Aggregate rows bucketed by their pair's heading change.

    Buckets are half-open ``[e_i, e_{i+1})``; rows whose yaw falls outside
    every bucket are dropped; empty buckets appear with count 0 and no
    aggregates.
    """
    edges = [float(e) for e in bucket_edges_deg]
    if len(edges) < 2 or any(a >= b for a, b in zip(edges, edges[1:])):
        raise ValueError("bucket edges must be strictly increasing with at least two values")
    yaw_by_pair = {p.pair_id: manifest.pair_yaw_deg(p) for p in manifest.pairs}
    buckets: list[list[ErrorRow]] = [[] for _ in range(len(edges) - 1)]
    for row in rows:
        yaw = yaw_by_pair.get(row.pair_id)
        if yaw is None:
            continue
        for i in range(len(edges) - 1):
            if edges[i] <= yaw < edges[i + 1]:
                buckets[i].append(row)
                break
    return [
        YawBucket(
            lo_deg=edges[i],
            hi_deg=edges[i + 1],
            count=len(bucket),
            aggregates=aggregate(bucket, auc_convention=auc_convention) if bucket else None,
        )
        for i, bucket in enumerate(buckets)
    ]
