"""Frame-subset planning for generated videos.

Each interpolation video gets a fixed set of frame subsets: one uniformly
spaced subset plus a number of random ones. Every subset always anchors on
the two original input images; only interior frames of the video (indices
2..N-1, 1-based) are ever sampled, because the first and last frames are
re-encoded copies of the anchors.

Randomness is counter-based: each subset is drawn from its own generator
keyed by (seed, pair_id, video_id, ordinal), so plans are identical no
matter in which order (or on how many workers) videos are processed.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Protocol, Sequence

import numpy as np

from .errors import VideoTooShort

#: Sentinel video id for the estimate made from the two input images alone.
PAIR_ONLY = "__pair_only__"


@dataclass(frozen=True)
class SamplingPlan:
    """How many subsets to draw per video and how large each one is."""

    k: int = 5
    m_random: int = 10
    include_uniform: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be at least 2 (the two anchor images)")
        if self.m_random < 0:
            raise ValueError("m_random must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    @property
    def total_subsets(self) -> int:
        return self.m_random + (1 if self.include_uniform else 0)


@dataclass(frozen=True)
class FrameSubset:
    """A selection of frames to hand to the pose estimator.

    ``pair_anchor`` holds the two original image references (first image
    first); ``interior_indices`` are distinct 1-based indices into the
    video, strictly increasing, each in ``[2, n_frames - 1]``.
    """

    pair_anchor: tuple[str, str]
    interior_indices: tuple[int, ...]

    def __post_init__(self):
        if len(self.pair_anchor) != 2:
            raise ValueError("pair_anchor must hold exactly two image references")
        idx = self.interior_indices
        if any(idx[i] >= idx[i + 1] for i in range(len(idx) - 1)):
            raise ValueError("interior_indices must be strictly increasing")
        if any(i < 2 for i in idx):
            raise ValueError("interior indices start at 2 (index 1 is an anchor copy)")


class _VideoLike(Protocol):
    pair_id: str
    video_id: str
    frames: Sequence[str]


def _subset_generator(seed: int, pair_id: str, video_id: str, ordinal: int) -> np.random.Generator:
    """Philox generator keyed by a digest of the full subset coordinates."""
    material = f"subset|{seed}|{pair_id}|{video_id}|{ordinal}".encode()
    digest = hashlib.sha256(material).digest()
    key = np.frombuffer(digest[:16], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def uniform_subset(n_frames: int, g: int, anchors: tuple[str, str]) -> FrameSubset:
    """Evenly spaced interior frames.

    Index ``j`` (1-based, ``j = 1..g``) lands at
    ``round(1 + j * (n_frames - 1) / (g + 1))`` with round-half-away-from-zero,
    clamped into ``[2, n_frames - 1]``; a clamped collision shifts right to
    the next free slot. Exact rational arithmetic keeps the rounding
    platform-independent.
    """
    if g < 0:
        raise ValueError("g must be non-negative")
    if n_frames < g + 2:
        raise VideoTooShort(f"{n_frames} frames cannot host {g} interior picks plus endpoints")
    taken: list[int] = []
    for j in range(1, g + 1):
        exact = 1 + Fraction(j * (n_frames - 1), g + 1)
        idx = math.floor(exact + Fraction(1, 2))  # half rounds away from zero
        idx = min(max(idx, 2), n_frames - 1)
        while idx in taken:
            idx += 1
            if idx > n_frames - 1:
                raise VideoTooShort(f"no free interior slot left in a {n_frames}-frame video")
        taken.append(idx)
    return FrameSubset(pair_anchor=anchors, interior_indices=tuple(sorted(taken)))


def random_subsets(
    n_frames: int,
    g: int,
    count_m: int,
    stream_key: tuple[str, str],
    seed: int,
    anchors: tuple[str, str],
) -> list[FrameSubset]:
    """``count_m`` independent uniform draws of ``g`` distinct interior frames.

    Each draw is fully determined by ``(seed, stream_key, ordinal)``;
    repeated subsets across ordinals are allowed and expected.
    """
    if n_frames < g + 2:
        raise VideoTooShort(f"{n_frames} frames cannot host {g} interior picks plus endpoints")
    pair_id, video_id = stream_key
    interior = np.arange(2, n_frames)  # 1-based indices 2..n_frames-1
    out = []
    for ordinal in range(count_m):
        rng = _subset_generator(seed, pair_id, video_id, ordinal)
        picks = rng.choice(interior, size=g, replace=False) if g else np.empty(0, dtype=int)
        out.append(
            FrameSubset(
                pair_anchor=anchors,
                interior_indices=tuple(int(i) for i in np.sort(picks)),
            )
        )
    return out


def build_plan(video: _VideoLike, plan: SamplingPlan, anchors: tuple[str, str]) -> list[FrameSubset]:
    """All subsets for one video: the uniform one first, then the random ones."""
    n_frames = len(video.frames)
    g = plan.k - 2
    if n_frames < plan.k:
        raise VideoTooShort(
            f"video {video.video_id!r} has {n_frames} frames, plan needs {plan.k}"
        )
    subsets: list[FrameSubset] = []
    if plan.include_uniform:
        subsets.append(uniform_subset(n_frames, g, anchors))
    subsets.extend(
        random_subsets(n_frames, g, plan.m_random, (video.pair_id, video.video_id), plan.seed, anchors)
    )
    return subsets
