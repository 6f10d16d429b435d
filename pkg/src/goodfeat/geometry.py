"""Rigid-body poses, pinhole cameras, and measurement Jacobians.

Conventions used throughout the package:

* A pose maps world coordinates into the camera frame, ``p_cam = R p + t``.
* Tangent vectors are length-6 arrays laid out translation-first:
  ``xi = [v, w]`` with ``v`` in meters and ``w`` in radians.
* Pose updates are applied on the left, ``x <- exp(xi) * x``.
* Pixel coordinates follow the usual image convention, ``u`` rightward and
  ``v`` downward, with the image spanning ``[0, width) x [0, height)``.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import BehindCamera

# Below this rotation angle the closed-form exp/log coefficients are
# replaced by their Taylor expansions to avoid 0/0.
_SMALL_ANGLE = 1e-8


def skew(w):
    """Return the 3x3 cross-product matrix of a length-3 vector."""
    w = np.asarray(w, dtype=float)
    return np.array(
        [
            [0.0, -w[2], w[1]],
            [w[2], 0.0, -w[0]],
            [-w[1], w[0], 0.0],
        ]
    )


def _rotation_coefficients(theta):
    """Coefficients A = sin(t)/t, B = (1-cos(t))/t^2, C = (1-A)/t^2."""
    if theta < _SMALL_ANGLE:
        t2 = theta * theta
        a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0
        b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0
        c = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
    else:
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / theta**2
        c = (1.0 - a) / theta**2
    return a, b, c


def _check_rotation(r):
    """Validate an orthonormality drift and repair tiny drift in place.

    Returns a proper rotation matrix. Drift below 1e-9 passes through,
    drift up to 1e-6 is projected back onto SO(3), anything larger is an
    error in the caller.
    """
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got {r.shape}")
    drift = np.linalg.norm(r.T @ r - np.eye(3))
    if drift > 1e-6:
        raise ValueError(f"matrix is not a rotation (orthonormality drift {drift:.3e})")
    if drift > 1e-9:
        u, _, vt = np.linalg.svd(r)
        r = u @ vt
    if np.linalg.det(r) < 0.0:
        raise ValueError("matrix has determinant -1, not a proper rotation")
    return r


@dataclasses.dataclass(frozen=True)
class Pose:
    """A world-to-camera rigid transform, ``p_cam = rotation @ p + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = _check_rotation(self.rotation)
        t = np.asarray(self.translation, dtype=float)
        if t.shape != (3,):
            raise ValueError(f"translation must have shape (3,), got {t.shape}")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity():
        return Pose(np.eye(3), np.zeros(3))

    def compose(self, other):
        """Return self * other, the transform applying ``other`` first."""
        return Pose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self):
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation)

    def transform(self, points):
        """Map world points of shape (3,) or (n, 3) into the camera frame."""
        points = np.asarray(points, dtype=float)
        return points @ self.rotation.T + self.translation

    def matrix(self):
        """Return the 4x4 homogeneous transform."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m


def se3_exp(xi):
    """Exponential map from a translation-first tangent vector to a Pose."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (6,):
        raise ValueError(f"tangent vector must have shape (6,), got {xi.shape}")
    v, w = xi[:3], xi[3:]
    theta = np.linalg.norm(w)
    a, b, c = _rotation_coefficients(theta)
    wx = skew(w)
    wx2 = wx @ wx
    r = np.eye(3) + a * wx + b * wx2
    vmat = np.eye(3) + b * wx + c * wx2
    return Pose(r, vmat @ v)


def se3_log(pose):
    """Logarithm map, the inverse of :func:`se3_exp`.

    Accurate for rotation angles below ``pi - 1e-6``; the rotation angle is
    recovered from atan2 of the skew-symmetric part against the trace.
    """
    r = pose.rotation
    # vee(R - R^T) has norm 2 sin(theta) about the rotation axis.
    axis2 = np.array(
        [r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]]
    )
    sin_theta = 0.5 * np.linalg.norm(axis2)
    cos_theta = 0.5 * (np.trace(r) - 1.0)
    theta = np.arctan2(sin_theta, cos_theta)
    if theta >= np.pi - 1e-6:
        raise ValueError(f"rotation angle {theta:.9f} too close to pi for a stable log")
    if theta < _SMALL_ANGLE:
        w = 0.5 * axis2
    else:
        w = theta / (2.0 * sin_theta) * axis2
    wx = skew(w)
    wx2 = wx @ wx
    a, b, _ = _rotation_coefficients(theta)
    if theta < _SMALL_ANGLE:
        t2 = theta * theta
        d = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    else:
        d = (1.0 - 0.5 * a / b) / theta**2
    vinv = np.eye(3) - 0.5 * wx + d * wx2
    return np.concatenate([vinv @ pose.translation, w])


@dataclasses.dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics, image size, and an optional rectified stereo rig.

    ``baseline`` is the horizontal separation of the right camera in meters;
    zero means monocular. ``min_depth`` is the smallest camera-frame depth
    considered observable.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    baseline: float = 0.0
    min_depth: float = 0.1

    def __post_init__(self):
        if self.fx <= 0.0 or self.fy <= 0.0:
            raise ValueError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")
        if self.baseline < 0.0:
            raise ValueError("baseline must be non-negative")
        if self.min_depth <= 0.0:
            raise ValueError("min_depth must be positive")

    def in_image(self, pixels):
        """Boolean mask of pixels inside [0, width) x [0, height)."""
        pixels = np.asarray(pixels, dtype=float)
        u, v = pixels[..., 0], pixels[..., 1]
        return (u >= 0.0) & (u < self.width) & (v >= 0.0) & (v < self.height)


def _require_side(camera, side):
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    if side == "right" and camera.baseline <= 0.0:
        raise ValueError("right-side projection requires a positive baseline")


def project_points(camera, pose, points, side="left"):
    """Project world points of shape (n, 3) without depth checks.

    Returns ``(pixels, depths)`` with shapes (n, 2) and (n,). Callers decide
    visibility from the depths and :meth:`CameraModel.in_image`; depths at or
    below zero yield non-finite pixels.
    """
    _require_side(camera, side)
    p_cam = pose.transform(np.atleast_2d(np.asarray(points, dtype=float)))
    x, y, z = p_cam[:, 0], p_cam[:, 1], p_cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        if side == "right":
            u = camera.fx * (x - camera.baseline) / z + camera.cx
        else:
            u = camera.fx * x / z + camera.cx
        v = camera.fy * y / z + camera.cy
    return np.stack([u, v], axis=1), z


def project_world(camera, pose, point, side="left"):
    """Project a single world point, raising BehindCamera on shallow depth."""
    pixels, depths = project_points(camera, pose, np.asarray(point, dtype=float)[None, :], side)
    if depths[0] < camera.min_depth:
        raise BehindCamera(f"depth {depths[0]:.6f} m is below min_depth {camera.min_depth} m")
    return pixels[0]


def measurement_jacobians_batch(camera, pose, points, side="left"):
    """Jacobians of the projection for world points of shape (n, 3).

    Returns ``(h_x, h_p)`` with shapes (n, 2, 6) and (n, 2, 3): the
    derivative of the pixel with respect to a left-multiplied pose
    perturbation and with respect to the world point. All points must
    satisfy the camera's minimum depth.
    """
    _require_side(camera, side)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    p_cam = pose.transform(points)
    x, y, z = p_cam[:, 0], p_cam[:, 1], p_cam[:, 2]
    if np.any(z < camera.min_depth):
        count = int(np.sum(z < camera.min_depth))
        raise BehindCamera(f"{count} point(s) below min_depth {camera.min_depth} m")
    n = points.shape[0]
    inv_z = 1.0 / z
    inv_z2 = inv_z * inv_z
    x_eff = x - camera.baseline if side == "right" else x

    # Derivative of the pixel with respect to the camera-frame point.
    j_proj = np.zeros((n, 2, 3))
    j_proj[:, 0, 0] = camera.fx * inv_z
    j_proj[:, 0, 2] = -camera.fx * x_eff * inv_z2
    j_proj[:, 1, 1] = camera.fy * inv_z
    j_proj[:, 1, 2] = -camera.fy * y * inv_z2

    # d(p_cam)/d(xi) for a left perturbation is [I | -skew(p_cam)].
    j_cam = np.zeros((n, 3, 6))
    j_cam[:, 0, 0] = 1.0
    j_cam[:, 1, 1] = 1.0
    j_cam[:, 2, 2] = 1.0
    j_cam[:, 0, 4] = p_cam[:, 2]
    j_cam[:, 0, 5] = -p_cam[:, 1]
    j_cam[:, 1, 3] = -p_cam[:, 2]
    j_cam[:, 1, 5] = p_cam[:, 0]
    j_cam[:, 2, 3] = p_cam[:, 1]
    j_cam[:, 2, 4] = -p_cam[:, 0]

    h_x = np.einsum("nij,njk->nik", j_proj, j_cam)
    h_p = np.einsum("nij,jk->nik", j_proj, pose.rotation)
    return h_x, h_p


def measurement_jacobians(camera, pose, point, side="left"):
    """Single-point convenience wrapper returning (2, 6) and (2, 3) arrays."""
    h_x, h_p = measurement_jacobians_batch(
        camera, pose, np.asarray(point, dtype=float)[None, :], side
    )
    return h_x[0], h_p[0]
