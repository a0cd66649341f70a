"""Rigid-pose primitives: rotations, relative poses, and pose distances.

Conventions used throughout the package:

* Poses are world-to-camera: ``x_cam = R @ x_world + t``.
* Rotation matrices are 3x3, row-major when flattened.
* Translations between two cameras are treated as meaningful only up to
  scale and sign, so the translation distance compares directions on the
  half-sphere and is reported in radians in ``[0, pi/2]``.
* Rotation distance is the geodesic angle on SO(3), radians in ``[0, pi]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation as _SciRotation

from .errors import DegenerateMatrix, NotARotation

ROTATION_ATOL = 1e-9
TRANSLATION_EPS = 1e-8


def _as_float_array(value, shape, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def validate_rotation(matrix, atol: float = ROTATION_ATOL) -> np.ndarray:
    """Check that ``matrix`` is a rotation and return it as a float array.

    A rotation must satisfy ``R.T @ R == I`` within ``atol`` (elementwise)
    and have determinant +1 within ``atol``.

    Raises:
        NotARotation: if either condition fails.
    """
    r = _as_float_array(matrix, (3, 3), "rotation")
    residual = np.abs(r.T @ r - np.eye(3)).max()
    if residual > atol:
        raise NotARotation(f"orthonormality residual {residual:.3e} exceeds {atol:.1e}")
    det = float(np.linalg.det(r))
    if abs(det - 1.0) > atol:
        raise NotARotation(f"determinant {det!r} is not +1 within {atol:.1e}")
    return r


@dataclass(frozen=True)
class Pose:
    """An absolute world-to-camera pose."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", validate_rotation(self.rotation))
        object.__setattr__(
            self, "translation", _as_float_array(self.translation, (3,), "translation")
        )

    @classmethod
    def from_matrix(cls, matrix) -> "Pose":
        """Build a pose from a 4x4 row-major homogeneous transform."""
        m = _as_float_array(matrix, (4, 4), "transform")
        if not np.allclose(m[3], (0.0, 0.0, 0.0, 1.0), atol=1e-9):
            raise ValueError(f"transform bottom row must be [0, 0, 0, 1], got {m[3]}")
        return cls(rotation=m[:3, :3], translation=m[:3, 3])

    @property
    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m


@dataclass(frozen=True)
class RelativePose:
    """The transform mapping camera-A coordinates into camera-B coordinates.

    ``translation`` may be any finite vector, including zero; consumers that
    care about direction must go through :func:`dist_trans`, which reports
    whether a direction was defined at all.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", validate_rotation(self.rotation))
        object.__setattr__(
            self, "translation", _as_float_array(self.translation, (3,), "translation")
        )

    @classmethod
    def identity(cls) -> "RelativePose":
        return cls(rotation=np.eye(3), translation=np.zeros(3))

    @property
    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m


@dataclass(frozen=True)
class PoseDistance:
    """Decomposed distance between two relative poses, all in radians.

    ``total_rad`` is ``rot_rad + trans_rad`` when a translation direction was
    defined on both sides, otherwise just ``rot_rad``.
    """

    rot_rad: float
    trans_rad: float
    total_rad: float
    trans_defined: bool


def relative_pose(a: Pose, b: Pose) -> RelativePose:
    """Relative transform from camera A to camera B.

    Computed as ``R_rel = R_b @ R_a.T`` and ``t_rel = t_b - R_rel @ t_a``,
    which is exactly the rigid composition ``T_b @ inv(T_a)``.
    """
    r_rel = b.rotation @ a.rotation.T
    t_rel = b.translation - r_rel @ a.translation
    return RelativePose(rotation=r_rel, translation=t_rel)


def dist_rot(r1, r2) -> float:
    """Geodesic angle between two rotations, radians in ``[0, pi]``."""
    a = np.asarray(r1, dtype=float)
    b = np.asarray(r2, dtype=float)
    trace = float(np.sum(a * b))  # == trace(r2 @ r1.T)
    cos_theta = np.clip((trace - 1.0) / 2.0, -1.0, 1.0)
    return float(np.arccos(cos_theta))


def dist_trans(t1, t2, eps: float = TRANSLATION_EPS) -> tuple[float, bool]:
    """Angle between two translation directions, ignoring scale and sign.

    Returns ``(angle_rad, defined)``. The angle lives in ``[0, pi/2]``
    because antiparallel directions are identified. If either vector has
    norm below ``eps`` there is no direction to compare: the result is
    ``(0.0, False)``.
    """
    a = _as_float_array(t1, (3,), "t1")
    b = _as_float_array(t2, (3,), "t2")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na < eps or nb < eps:
        return 0.0, False
    cos_theta = np.clip(abs(float(np.dot(a / na, b / nb))), 0.0, 1.0)
    return float(np.arccos(cos_theta)), True


def dist_pose(a: RelativePose, b: RelativePose, rotation_only: bool = False) -> PoseDistance:
    """Combined rotation + translation distance between two relative poses.

    With ``rotation_only=True`` the translation term is skipped entirely and
    the total equals the rotation angle.
    """
    rot = dist_rot(a.rotation, b.rotation)
    if rotation_only:
        return PoseDistance(rot_rad=rot, trans_rad=0.0, total_rad=rot, trans_defined=False)
    trans, defined = dist_trans(a.translation, b.translation)
    total = rot + trans if defined else rot
    return PoseDistance(rot_rad=rot, trans_rad=trans, total_rad=total, trans_defined=defined)


def twist_angle(rotation, axis) -> float:
    """Signed rotation (radians) of ``rotation`` about ``axis``.

    This is the twist component of the swing-twist split: the quaternion is
    projected onto the axis and renormalised. The sign follows the
    right-hand rule around ``axis``; the value is in ``[-pi, pi]``.
    """
    r = np.asarray(rotation, dtype=float)
    u = _as_float_array(axis, (3,), "axis")
    norm = float(np.linalg.norm(u))
    if norm < 1e-12:
        raise ValueError("axis must be non-zero")
    u = u / norm
    x, y, z, w = _SciRotation.from_matrix(r).as_quat()
    if w < 0.0:
        x, y, z, w = -x, -y, -z, -w
    projected = x * u[0] + y * u[1] + z * u[2]
    return 2.0 * math.atan2(projected, w)


def delta_yaw(a: Pose, b: Pose, up_axis=(0.0, 1.0, 0.0)) -> float:
    """Heading change between two cameras, degrees in ``[0, 180]``.

    The relative rotation is decomposed about ``up_axis`` and only the
    component about that axis is kept, so tilting the cameras up or down
    does not register as yaw. Invariant to a shared world rotation about
    ``up_axis`` and symmetric in its arguments.
    """
    r_rel = b.rotation @ a.rotation.T
    return abs(math.degrees(twist_angle(r_rel, up_axis)))


def project_to_rotation(matrix, rank_tol: float = 1e-9) -> np.ndarray:
    """Nearest rotation matrix (Frobenius sense) to an arbitrary 3x3 matrix.

    Uses the SVD polar factor with a determinant correction so the result is
    always a proper rotation, never a reflection.

    Raises:
        DegenerateMatrix: if the input is numerically rank deficient, in
            which case the nearest rotation is not unique.
    """
    m = _as_float_array(matrix, (3, 3), "matrix")
    u, s, vt = np.linalg.svd(m)
    if s[-1] <= rank_tol * max(s[0], 1.0):
        raise DegenerateMatrix(f"singular values {s!r} indicate rank deficiency")
    d = np.sign(np.linalg.det(u @ vt))
    if d == 0:  # pragma: no cover - excluded by the rank check above
        raise DegenerateMatrix("polar factor has zero determinant")
    r = u @ np.diag([1.0, 1.0, d]) @ vt
    return validate_rotation(r, atol=1e-8)


def rotation_about_axis(axis, angle_rad: float) -> np.ndarray:
    """Rotation matrix for a right-handed turn of ``angle_rad`` about ``axis``."""
    u = _as_float_array(axis, (3,), "axis")
    norm = float(np.linalg.norm(u))
    if norm < 1e-12:
        raise ValueError("axis must be non-zero")
    return _SciRotation.from_rotvec(u / norm * angle_rad).as_matrix()


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed rotation matrix (via a random unit quaternion)."""
    q = rng.normal(size=4)
    q = q / np.linalg.norm(q)
    return _SciRotation.from_quat(q).as_matrix()


def pairwise_pose_distances(
    rotations: np.ndarray,
    translations: np.ndarray,
    rotation_only: bool = False,
    eps: float = TRANSLATION_EPS,
) -> np.ndarray:
    """All-pairs total pose distance for stacked samples.

    Args:
        rotations: array of shape ``(m, 3, 3)``.
        translations: array of shape ``(m, 3)``.
        rotation_only: skip the translation term entirely.
        eps: norm threshold below which a translation has no direction.

    Returns:
        Symmetric ``(m, m)`` array of total distances with a zero diagonal.
        Pairs where either translation direction is undefined fall back to
        the rotation term alone, matching :func:`dist_pose`.
    """
    r = np.asarray(rotations, dtype=float)
    t = np.asarray(translations, dtype=float)
    if r.ndim != 3 or r.shape[1:] != (3, 3):
        raise ValueError(f"rotations must have shape (m, 3, 3), got {r.shape}")
    if t.shape != (r.shape[0], 3):
        raise ValueError(f"translations must have shape ({r.shape[0]}, 3), got {t.shape}")

    traces = np.einsum("aij,bij->ab", r, r)
    rot = np.arccos(np.clip((traces - 1.0) / 2.0, -1.0, 1.0))
    # The diagonal trace sums nine squared entries, so it lands near 3 but
    # not exactly on it, and arccos near 1 blows the ulp up to ~1e-8. The
    # self-distance is zero by definition; make it exactly zero.
    np.fill_diagonal(rot, 0.0)
    if rotation_only:
        return rot

    norms = np.linalg.norm(t, axis=1)
    defined = norms >= eps
    unit = np.zeros_like(t)
    unit[defined] = t[defined] / norms[defined, None]
    cos = np.clip(np.abs(unit @ unit.T), 0.0, 1.0)
    trans = np.arccos(cos)
    np.fill_diagonal(trans, 0.0)
    both = np.outer(defined, defined)
    return rot + np.where(both, trans, 0.0)
