"""Report rendering: per-pair CSV, summary JSON, accuracy-curve CSVs.

Float fields are written with ``repr`` so a parsed report reproduces the
original values bit-for-bit; rendering the same inputs always produces the
same bytes. Nothing time- or host-dependent belongs in these files.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Optional, Sequence

from ..errors import EmptyReport
from .metrics import Aggregates, ErrorRow, YawBucket, accuracy_curve

PER_PAIR_FIELDS = ("pair_id", "variant", "rot_err_deg", "trans_err_deg", "selected_video_id")
CURVE_FIELDS = ("threshold_deg", "rot_acc", "trans_acc", "joint_acc")


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else repr(value)


def render_per_pair_csv(rows: Sequence[ErrorRow]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(PER_PAIR_FIELDS)
    for r in rows:
        writer.writerow(
            [r.pair_id, r.variant, repr(r.rot_err_deg), _fmt(r.trans_err_deg),
             r.selected_video_id or ""]
        )
    return out.getvalue()


def parse_per_pair_csv(text: str) -> list[ErrorRow]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyReport("per-pair table has no header") from None
    if tuple(header) != PER_PAIR_FIELDS:
        raise ValueError(f"unexpected per-pair header: {header!r}")
    rows = []
    for record in reader:
        if not record:
            continue
        pair_id, variant, rot, trans, selected = record
        rows.append(
            ErrorRow(
                pair_id=pair_id,
                variant=variant,
                rot_err_deg=float(rot),
                trans_err_deg=float(trans) if trans else None,
                selected_video_id=selected or None,
            )
        )
    return rows


def render_curve_csv(rows: Sequence[ErrorRow]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CURVE_FIELDS)
    for tau, rot_acc, trans_acc, joint_acc in accuracy_curve(rows):
        writer.writerow([tau, repr(rot_acc), _fmt(trans_acc), repr(joint_acc)])
    return out.getvalue()


def _bucket_to_dict(bucket: YawBucket) -> dict:
    return {
        "lo_deg": bucket.lo_deg,
        "hi_deg": bucket.hi_deg,
        "count": bucket.count,
        "aggregates": bucket.aggregates.to_dict() if bucket.aggregates else None,
    }


def render_summary(
    *,
    dataset: str,
    config: dict,
    variants: dict[str, Aggregates],
    yaw_buckets: Optional[dict[str, list[YawBucket]]] = None,
) -> str:
    doc = {
        "schema_version": 1,
        "dataset": dataset,
        "config": config,
        "variants": {name: agg.to_dict() for name, agg in variants.items()},
    }
    if yaw_buckets is not None:
        doc["yaw_buckets"] = {
            name: [_bucket_to_dict(b) for b in buckets]
            for name, buckets in yaw_buckets.items()
        }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def write_files(out_dir, files: dict[str, str]) -> list[Path]:
    """Write each report to ``out_dir``; returns the paths written."""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    written = []
    for name, content in sorted(files.items()):
        path = root / name
        path.write_text(content)
        written.append(path)
    return written
