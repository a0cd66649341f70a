"""Turning per-frame reconstruction output into one relative pose.

Reconstruction models hand back a camera-to-world transform per input
frame, usually in float32. The host wants a single world-to-camera relative
transform between the two anchor frames (frame 0 and frame 1), with a
rotation that is exactly orthonormal.
"""

from __future__ import annotations

import numpy as np


def orthonormalize(matrix: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix in the Frobenius sense (via SVD)."""
    m = np.asarray(matrix, dtype=float)
    if m.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
    u, _, vt = np.linalg.svd(m)
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] = -u[:, -1]
        r = u @ vt
    return r


def relative_from_cam_to_world(pose_a, pose_b) -> tuple[np.ndarray, np.ndarray]:
    """Relative world-to-camera transform B∘A⁻¹ from camera-to-world inputs.

    Args:
        pose_a: 4x4 camera-to-world transform of the first anchor frame.
        pose_b: 4x4 camera-to-world transform of the second anchor frame.

    Returns:
        ``(rotation, translation)`` mapping camera-A coordinates to
        camera-B coordinates, rotation re-orthonormalized.
    """
    a = _as_transform(pose_a, "pose_a")
    b = _as_transform(pose_b, "pose_b")
    rel = np.linalg.inv(b) @ a
    return orthonormalize(rel[:3, :3]), rel[:3, 3].copy()


def _as_transform(value, name: str) -> np.ndarray:
    m = np.asarray(value, dtype=float)
    if m.shape != (4, 4):
        raise ValueError(f"{name} must be a 4x4 transform, got shape {m.shape}")
    if not np.allclose(m[3], (0.0, 0.0, 0.0, 1.0), atol=1e-6):
        raise ValueError(f"{name} bottom row must be [0, 0, 0, 1]")
    return m
