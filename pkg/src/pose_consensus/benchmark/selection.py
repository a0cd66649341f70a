"""Pair selection by heading change."""

from __future__ import annotations

import hashlib
from typing import Optional

import numpy as np

from ..errors import EmptySelection
from .manifest import DatasetManifest


def select_pairs(
    manifest: DatasetManifest,
    yaw_min_deg: float,
    yaw_max_deg: float,
    count: Optional[int],
    seed: int,
) -> list[str]:
    """Seeded random subset of the pairs whose yaw falls in the given band.

    The candidate list is sorted by pair_id before the draw, so the result
    is independent of how the manifest file happens to order its pairs. The
    returned ids are sorted. ``count=None`` keeps every eligible pair.

    Raises:
        EmptySelection: when no pair falls inside the band.
    """
    if not yaw_min_deg < yaw_max_deg:
        raise ValueError(f"need yaw_min < yaw_max, got [{yaw_min_deg}, {yaw_max_deg}]")
    eligible = sorted(
        p.pair_id
        for p in manifest.pairs
        if yaw_min_deg <= manifest.pair_yaw_deg(p) <= yaw_max_deg
    )
    if not eligible:
        raise EmptySelection(
            f"no pair of {manifest.name!r} has yaw in [{yaw_min_deg}, {yaw_max_deg}] degrees"
        )
    if count is None or count >= len(eligible):
        chosen = eligible
    else:
        digest = hashlib.sha256(f"select|{seed}".encode()).digest()
        key = np.frombuffer(digest[:16], dtype=np.uint64)
        rng = np.random.Generator(np.random.Philox(key=key))
        order = rng.permutation(len(eligible))
        chosen = [eligible[i] for i in order[: max(count, 0)]]
    return sorted(chosen)
