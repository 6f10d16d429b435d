"""Whitened Gauss-Newton pose refinement from matched observations.

The solver minimizes the squared whitened reprojection residual over the
six pose parameters. Whitening weights are frozen at the initial pose, so
each run minimizes one fixed weighted least-squares objective; updates are
applied on the left of the current pose.
"""

from __future__ import annotations

import dataclasses
import typing

import numpy as np

from . import geometry
from .errors import BehindCamera, Diverged, NotPositiveDefinite, RankDeficient
from .uncertainty import _check_covariance


@dataclasses.dataclass(frozen=True)
class MatchedObservation:
    """One matched feature: its map point, measured pixel, and pixel noise.

    ``side`` selects the camera of a rectified stereo rig; monocular setups
    use only ``"left"``. ``pyramid_level`` records the detection level that
    produced ``sigma_z`` and is carried for bookkeeping.
    """

    map_point: np.ndarray
    pixel: np.ndarray
    sigma_z: np.ndarray
    pyramid_level: int = 0
    side: str = "left"

    def __post_init__(self):
        p = np.asarray(self.map_point, dtype=float)
        z = np.asarray(self.pixel, dtype=float)
        if p.shape != (3,) or z.shape != (2,):
            raise ValueError("map_point must be (3,) and pixel (2,)")
        if self.side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {self.side!r}")
        if self.pyramid_level < 0:
            raise ValueError("pyramid_level must be non-negative")
        p.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "map_point", p)
        object.__setattr__(self, "pixel", z)
        object.__setattr__(self, "sigma_z", _check_covariance(self.sigma_z, 2, "sigma_z"))


@dataclasses.dataclass(frozen=True)
class SolveReport:
    """Result of one Gauss-Newton run at the returned pose."""

    pose: geometry.Pose
    iterations: int
    final_cost: float
    converged: bool


class PoseError(typing.NamedTuple):
    translational: float
    rotational_deg: float


def pose_error(estimate, truth):
    """Translation distance in meters and rotation angle in degrees."""
    dt = float(np.linalg.norm(estimate.translation - truth.translation))
    r_rel = estimate.rotation @ truth.rotation.T
    cos_theta = np.clip(0.5 * (np.trace(r_rel) - 1.0), -1.0, 1.0)
    return PoseError(dt, float(np.degrees(np.arccos(cos_theta))))


def _whitening_factors(camera, pose, points, sides, sigma_z, sigma_p):
    """Per-observation 2x2 lower Cholesky factors of the residual covariance."""
    sigma_r = sigma_z.copy()
    if sigma_p is not None:
        for side in ("left", "right"):
            mask = sides == side
            if not np.any(mask):
                continue
            _, h_p = geometry.measurement_jacobians_batch(camera, pose, points[mask], side)
            sigma_r[mask] += np.einsum("nij,jk,nlk->nil", h_p, sigma_p, h_p)
    try:
        return np.linalg.cholesky(sigma_r)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"residual covariance is not positive definite: {exc}")


def _forward_substitute(w, rhs):
    """Solve w @ out = rhs for stacked 2-row right-hand sides."""
    out = np.empty_like(rhs)
    if rhs.ndim == 3:
        out[:, 0] = rhs[:, 0] / w[:, 0, 0, None]
        out[:, 1] = (rhs[:, 1] - w[:, 1, 0, None] * out[:, 0]) / w[:, 1, 1, None]
    else:
        out[:, 0] = rhs[:, 0] / w[:, 0, 0]
        out[:, 1] = (rhs[:, 1] - w[:, 1, 0] * out[:, 0]) / w[:, 1, 1]
    return out


def gauss_newton(camera, observations, init, max_iter=20, tol=1e-8, sigma_p=None):
    """Refine a pose against matched observations.

    ``sigma_p`` is an optional 3x3 map-point covariance shared by all
    observations; None means the map is treated as exact. Raises
    RankDeficient when fewer than 3 observations are given or the normal
    matrix is singular, BehindCamera when a point violates the minimum
    depth at the initial pose, and Diverged when the cost rises on two
    consecutive iterations or an iterate pushes a point behind the camera.
    """
    observations = list(observations)
    if len(observations) < 3:
        raise RankDeficient(f"{len(observations)} observation(s), need at least 3")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    points = np.array([o.map_point for o in observations])
    pixels = np.array([o.pixel for o in observations])
    sides = np.array([o.side for o in observations])
    sigma_z = np.array([o.sigma_z for o in observations])
    if sigma_p is not None:
        sigma_p = np.asarray(sigma_p, dtype=float)

    w = _whitening_factors(camera, init, points, sides, sigma_z, sigma_p)
    side_masks = [(side, sides == side) for side in ("left", "right") if np.any(sides == side)]

    def residuals(pose):
        res = np.empty((len(observations), 2))
        for side, mask in side_masks:
            pix, depth = geometry.project_points(camera, pose, points[mask], side)
            if np.any(depth < camera.min_depth):
                raise BehindCamera(f"point depth below {camera.min_depth} m")
            res[mask] = pixels[mask] - pix
        return _forward_substitute(w, res)

    def jacobian(pose):
        rows = np.empty((len(observations), 2, 6))
        for side, mask in side_masks:
            h_x, _ = geometry.measurement_jacobians_batch(camera, pose, points[mask], side)
            rows[mask] = h_x
        return _forward_substitute(w, rows)

    x = init
    prev_cost, strikes = None, 0
    iterations, converged = 0, False
    for it in range(max_iter):
        try:
            res = residuals(x)
            rows = jacobian(x)
        except BehindCamera:
            if it == 0:
                raise
            raise Diverged("an iterate moved a point behind the camera")
        cost = float(np.sum(res**2))
        if prev_cost is not None and cost > prev_cost:
            strikes += 1
            if strikes >= 2:
                raise Diverged(f"cost increased on two consecutive iterations ({cost:.6g})")
        else:
            strikes = 0
        prev_cost = cost
        a = rows.reshape(-1, 6)
        b = res.reshape(-1)
        q = a.T @ a
        if np.linalg.matrix_rank(q) < 6:
            raise RankDeficient("normal matrix has rank below 6")
        try:
            delta = np.linalg.solve(q, a.T @ b)
        except np.linalg.LinAlgError:
            raise RankDeficient("normal matrix is singular")
        x = geometry.se3_exp(delta).compose(x)
        iterations = it + 1
        if np.linalg.norm(delta) < tol:
            converged = True
            break
    try:
        final_cost = float(np.sum(residuals(x) ** 2))
    except BehindCamera:
        raise Diverged("final pose pushed a point behind the camera")
    return SolveReport(pose=x, iterations=iterations, final_cost=final_cost, converged=converged)
