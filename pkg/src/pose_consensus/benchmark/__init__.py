"""Dataset ingestion, pair selection, metrics, and report emission."""

from .manifest import (
    DatasetManifest,
    PairRecord,
    VideoRecord,
    VideoRegistry,
    load_manifest,
    load_registry,
    manifest_from_dict,
    manifest_to_dict,
    registry_from_dict,
    registry_to_dict,
)
from .metrics import (
    ACC_THRESHOLDS,
    AUC_CONVENTIONS,
    Aggregates,
    ErrorRow,
    YawBucket,
    accuracy_curve,
    aggregate,
    pair_errors,
    yaw_sweep,
)
from .reports import (
    parse_per_pair_csv,
    render_curve_csv,
    render_per_pair_csv,
    render_summary,
    write_files,
)
from .selection import select_pairs

__all__ = [
    "DatasetManifest",
    "PairRecord",
    "VideoRecord",
    "VideoRegistry",
    "load_manifest",
    "load_registry",
    "manifest_from_dict",
    "manifest_to_dict",
    "registry_from_dict",
    "registry_to_dict",
    "ACC_THRESHOLDS",
    "AUC_CONVENTIONS",
    "Aggregates",
    "ErrorRow",
    "YawBucket",
    "accuracy_curve",
    "aggregate",
    "pair_errors",
    "yaw_sweep",
    "parse_per_pair_csv",
    "render_curve_csv",
    "render_per_pair_csv",
    "render_summary",
    "write_files",
    "select_pairs",
]
