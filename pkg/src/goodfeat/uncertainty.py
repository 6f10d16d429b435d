"""Measurement noise models, residual whitening, and pose covariance.

A feature's residual covariance combines its pixel measurement noise with
its map-point uncertainty pushed through the point Jacobian,

    sigma_r = sigma_z + H_p sigma_p H_p^T.

Whitening multiplies the pose Jacobian rows by the inverse Cholesky factor
of sigma_r, so that stacked whitened rows feed an ordinary least-squares
solve and their Gram matrix is the pose information matrix.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from . import geometry
from .errors import NotPositiveDefinite, RankDeficient


def _check_covariance(m, size, name, *, allow_semidefinite=False):
    m = np.asarray(m, dtype=float)
    if m.shape != (size, size):
        raise ValueError(f"{name} must have shape ({size}, {size}), got {m.shape}")
    if not np.allclose(m, m.T, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    floor = -1e-12 if allow_semidefinite else 1e-15
    if np.min(np.linalg.eigvalsh(m)) < floor:
        kind = "positive semidefinite" if allow_semidefinite else "positive definite"
        raise ValueError(f"{name} must be {kind}")
    m = m.copy()
    m.setflags(write=False)
    return m


@dataclasses.dataclass(frozen=True)
class NoiseModel:
    """Per-feature noise: pixel covariance, map covariance, pyramid scaling.

    ``sigma_z`` must be positive definite. ``sigma_p`` may be positive
    semidefinite so that a noise-free map is expressible; the combined
    residual covariance is what must stay invertible.
    """

    sigma_z: np.ndarray
    sigma_p: np.ndarray
    pyramid_scale_factor: float = 1.2

    def __post_init__(self):
        object.__setattr__(self, "sigma_z", _check_covariance(self.sigma_z, 2, "sigma_z"))
        object.__setattr__(
            self,
            "sigma_p",
            _check_covariance(self.sigma_p, 3, "sigma_p", allow_semidefinite=True),
        )
        if self.pyramid_scale_factor <= 1.0:
            raise ValueError("pyramid_scale_factor must exceed 1")

    @staticmethod
    def isotropic(pixel_sigma, map_sigma, pyramid_scale_factor=1.2):
        """Build a model from scalar pixel and map standard deviations."""
        if pixel_sigma <= 0.0:
            raise ValueError("pixel_sigma must be positive")
        if map_sigma < 0.0:
            raise ValueError("map_sigma must be non-negative")
        return NoiseModel(
            pixel_sigma**2 * np.eye(2),
            map_sigma**2 * np.eye(3),
            pyramid_scale_factor,
        )


def scale_level_cov(level, scale_factor=1.2, base_sigma_px=1.0):
    """Pixel covariance for a detection at a pyramid level.

    The standard deviation grows by ``scale_factor`` per level on top of
    ``base_sigma_px``, so the covariance is ``(base * factor**level)^2 I``.
    """
    if not isinstance(level, (int, np.integer)) or level < 0:
        raise ValueError(f"level must be a non-negative integer, got {level!r}")
    if scale_factor <= 1.0:
        raise ValueError("scale_factor must exceed 1")
    if base_sigma_px <= 0.0:
        raise ValueError("base_sigma_px must be positive")
    sigma = base_sigma_px * scale_factor**level
    return sigma**2 * np.eye(2)


@dataclasses.dataclass(frozen=True)
class FeatureBlock:
    """Whitened pose-Jacobian rows of one feature: (2, 6) or (4, 6) stereo."""

    feature_id: int
    rows: np.ndarray
    stereo_matched: bool = False

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.shape not in ((2, 6), (4, 6)):
            raise ValueError(f"rows must have shape (2, 6) or (4, 6), got {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise ValueError("rows must be finite")
        rows = rows.copy()
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    def gram(self):
        """Return rows^T rows, the feature's 6x6 information contribution."""
        return self.rows.T @ self.rows


def whiten_rows_batch(h_x, h_p, sigma_z, sigma_p):
    """Whiten pose-Jacobian rows for n features at once.

    ``h_x`` is (n, 2, 6), ``h_p`` is (n, 2, 3); ``sigma_z`` may be (2, 2) or
    (n, 2, 2) and ``sigma_p`` may be (3, 3) or (n, 3, 3). Returns the
    whitened rows with shape (n, 2, 6).
    """
    h_x = np.asarray(h_x, dtype=float)
    h_p = np.asarray(h_p, dtype=float)
    n = h_x.shape[0]
    sigma_z = np.broadcast_to(np.asarray(sigma_z, dtype=float), (n, 2, 2))
    sigma_p = np.broadcast_to(np.asarray(sigma_p, dtype=float), (n, 3, 3))
    sigma_r = sigma_z + np.einsum("nij,njk,nlk->nil", h_p, sigma_p, h_p)
    sigma_r = 0.5 * (sigma_r + np.transpose(sigma_r, (0, 2, 1)))
    try:
        w = np.linalg.cholesky(sigma_r)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"residual covariance is not positive definite: {exc}")
    recon = np.einsum("nij,nkj->nik", w, w)
    scale = max(1.0, float(np.max(np.abs(sigma_r))))
    if np.max(np.abs(recon - sigma_r)) > 1e-10 * scale:
        raise NotPositiveDefinite("Cholesky factor failed its reconstruction check")
    # Forward substitution of the 2x2 lower factor against both rows.
    rows = np.empty_like(h_x)
    rows[:, 0, :] = h_x[:, 0, :] / w[:, 0, 0, None]
    rows[:, 1, :] = (h_x[:, 1, :] - w[:, 1, 0, None] * rows[:, 0, :]) / w[:, 1, 1, None]
    return rows


def residual_whiten(h_x, h_p, sigma_z, sigma_p, feature_id=-1):
    """Whiten one feature's rows, returning a :class:`FeatureBlock`."""
    h_x = np.asarray(h_x, dtype=float)
    h_p = np.asarray(h_p, dtype=float)
    if h_x.shape != (2, 6) or h_p.shape != (2, 3):
        raise ValueError("h_x must be (2, 6) and h_p must be (2, 3)")
    rows = whiten_rows_batch(h_x[None], h_p[None], sigma_z, sigma_p)
    return FeatureBlock(feature_id, rows[0])


def feature_blocks(camera, pose, points, noise, ids=None, side="left"):
    """Whitened blocks for world points of shape (n, 3) under one pose.

    All points must project in front of the camera; visibility filtering is
    the caller's job. ``ids`` defaults to positional indices.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    h_x, h_p = geometry.measurement_jacobians_batch(camera, pose, points, side)
    rows = whiten_rows_batch(h_x, h_p, noise.sigma_z, noise.sigma_p)
    if ids is None:
        ids = range(points.shape[0])
    return [FeatureBlock(int(i), rows[j]) for j, i in enumerate(ids)]


def pose_covariance(blocks):
    """Covariance of the six pose parameters implied by whitened blocks.

    Inverts the stacked information matrix; raises RankDeficient when the
    blocks do not constrain all six degrees of freedom.
    """
    if len(blocks) == 0:
        raise RankDeficient("no feature blocks")
    stacked = np.concatenate([b.rows for b in blocks], axis=0)
    if np.linalg.matrix_rank(stacked) < 6:
        raise RankDeficient("stacked whitened Jacobian has rank below 6")
    info = stacked.T @ stacked
    cov = np.linalg.inv(info)
    return 0.5 * (cov + cov.T)
