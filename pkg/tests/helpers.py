"""Shared instance generators for the selection and acceptance tests."""

import numpy as np

from goodfeat import FeatureBlock, NoiseModel, Pose, default_camera, feature_blocks


def heterogeneous_instance(rng, n, scale_sigma=3.0, stereo_fraction=0.2):
    """Random blocks whose information content spans several decades.

    Row magnitudes follow a lognormal law, so some features carry orders of
    magnitude more information than others — the regime where a
    diagonal-based pruning bound actually gets traction.
    """
    scales = np.exp(rng.normal(0.0, scale_sigma, n))
    blocks = []
    for i in range(n):
        shape = (4, 6) if rng.random() < stereo_fraction else (2, 6)
        blocks.append(FeatureBlock(i, rng.normal(size=shape) * scales[i]))
    return tuple(blocks)


def gaussian_instance(rng, n, stereo_fraction=0.0):
    """Homogeneous random blocks with unit-scale Gaussian rows."""
    blocks = []
    for i in range(n):
        shape = (4, 6) if rng.random() < stereo_fraction else (2, 6)
        blocks.append(FeatureBlock(i, rng.normal(size=shape)))
    return tuple(blocks)


def camera_instance(rng, n, depth_lo=0.5, depth_hi=50.0):
    """Feature blocks from a synthetic camera view with a wide depth range."""
    cam = default_camera()
    u = rng.uniform(0.0, cam.width, n)
    v = rng.uniform(0.0, cam.height, n)
    z = np.exp(rng.uniform(np.log(depth_lo), np.log(depth_hi), n))
    pts = np.stack([(u - cam.cx) * z / cam.fx, (v - cam.cy) * z / cam.fy, z],
                   axis=1)
    noise = NoiseModel.isotropic(1.0, 0.02)
    return feature_blocks(cam, Pose.identity(), pts, noise)
