"""Synthetic pose-estimation scenarios with known ground truth.

A scenario back-projects uniformly drawn pixels and depths through an
identity camera to build a 3D point cloud, perturbs a copy of the cloud
with Gaussian map noise (that copy is what an estimator gets to use), moves
the camera by a random motion, and records the noisy projections of the
true points under the moved camera. Every measurement's pre-noise
projection lies inside the image; points that leave the view or come too
close are flagged invisible.

Generation is deterministic in the config: one RNG seeded from
``config.seed`` draws, in order, pixel u coordinates, pixel v coordinates,
depths, the motion tangent (translation then rotation), map noise, and
pixel noise.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from . import geometry
from .errors import Degenerate
from .geometry import CameraModel, Pose


def default_camera():
    """A VGA camera with 460 px focal length, monocular, 0.1 m depth cutoff."""
    return CameraModel(fx=460.0, fy=460.0, cx=320.0, cy=240.0, width=640, height=480)


@dataclasses.dataclass(frozen=True)
class ScenarioConfig:
    """Knobs of one synthetic scenario.

    ``motion_scale`` bounds the uniform per-axis camera motion as
    (meters, radians). ``map_sigma`` and ``pixel_sigma`` are Gaussian
    standard deviations of the map perturbation and the measurement noise.
    """

    n_points: int = 200
    depth_range: tuple = (2.0, 10.0)
    motion_scale: tuple = (0.1, 0.05)
    map_sigma: float = 0.02
    pixel_sigma: float = 0.5
    camera: CameraModel = dataclasses.field(default_factory=default_camera)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "depth_range", tuple(float(d) for d in self.depth_range))
        object.__setattr__(self, "motion_scale", tuple(float(s) for s in self.motion_scale))
        if self.n_points < 1:
            raise ValueError("n_points must be at least 1")
        lo, hi = self.depth_range
        if not 0.0 < lo < hi:
            raise ValueError(f"depth_range must satisfy 0 < lo < hi, got {self.depth_range}")
        if len(self.motion_scale) != 2 or min(self.motion_scale) < 0.0:
            raise ValueError("motion_scale must be two non-negative numbers")
        if self.map_sigma < 0.0 or self.pixel_sigma < 0.0:
            raise ValueError("noise sigmas must be non-negative")
        if not isinstance(self.camera, CameraModel):
            raise ValueError("camera must be a CameraModel")


@dataclasses.dataclass(frozen=True)
class Scenario:
    """One generated world: true points, noisy map, pose, and measurements.

    ``pixels`` holds the noisy measurement of each point's projection under
    ``true_pose``; rows of invisible points are NaN and ``visible`` is the
    authoritative mask.
    """

    config: ScenarioConfig
    true_pose: Pose
    points_true: np.ndarray
    points_map: np.ndarray
    pixels: np.ndarray
    visible: np.ndarray

    def __post_init__(self):
        for name in ("points_true", "points_map", "pixels", "visible"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.config.n_points
        shapes = {
            "points_true": (n, 3),
            "points_map": (n, 3),
            "pixels": (n, 2),
            "visible": (n,),
        }
        for name, shape in shapes.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} must have shape {shape}")

    def visible_indices(self):
        return np.flatnonzero(self.visible)


def generate_scenario(config):
    """Generate a scenario from its config; see the module docstring.

    Raises Degenerate when fewer than 10 points stay visible under the
    true pose.
    """
    cam = config.camera
    rng = np.random.default_rng(config.seed)
    n = config.n_points
    u = rng.uniform(0.0, cam.width, n)
    v = rng.uniform(0.0, cam.height, n)
    z = rng.uniform(config.depth_range[0], config.depth_range[1], n)
    points_true = np.stack(
        [(u - cam.cx) * z / cam.fx, (v - cam.cy) * z / cam.fy, z], axis=1
    )
    xi = np.concatenate(
        [
            rng.uniform(-1.0, 1.0, 3) * config.motion_scale[0],
            rng.uniform(-1.0, 1.0, 3) * config.motion_scale[1],
        ]
    )
    true_pose = geometry.se3_exp(xi)
    points_map = points_true + rng.normal(0.0, config.map_sigma, (n, 3))
    pixel_noise = rng.normal(0.0, config.pixel_sigma, (n, 2))

    projected, depths = geometry.project_points(cam, true_pose, points_true)
    visible = (depths >= cam.min_depth) & cam.in_image(projected)
    if int(np.sum(visible)) < 10:
        raise Degenerate(f"only {int(np.sum(visible))} of {n} points visible")
    pixels = projected + pixel_noise
    pixels[~visible] = np.nan
    return Scenario(
        config=config,
        true_pose=true_pose,
        points_true=points_true,
        points_map=points_map,
        pixels=pixels,
        visible=visible,
    )


def _config_to_dict(config):
    d = dataclasses.asdict(config)
    d["depth_range"] = list(config.depth_range)
    d["motion_scale"] = list(config.motion_scale)
    return d


def _config_from_dict(d):
    d = dict(d)
    d["camera"] = CameraModel(**d["camera"])
    d["depth_range"] = tuple(d["depth_range"])
    d["motion_scale"] = tuple(d["motion_scale"])
    return ScenarioConfig(**d)


def scenario_to_text(scenario):
    """Serialize a scenario to a line-oriented text block.

    Floats are written with 17 significant digits, which round-trips IEEE
    doubles exactly, so import followed by export is the identity.
    """
    lines = ["goodfeat-scenario v1"]
    lines.append("config " + json.dumps(_config_to_dict(scenario.config), sort_keys=True))
    pose_vals = np.concatenate(
        [scenario.true_pose.rotation.reshape(-1), scenario.true_pose.translation]
    )
    lines.append("pose " + " ".join(f"{x:.17g}" for x in pose_vals))
    lines.append(f"points {scenario.config.n_points}")
    for i in range(scenario.config.n_points):
        vals = np.concatenate(
            [scenario.points_true[i], scenario.points_map[i], scenario.pixels[i]]
        )
        flag = int(scenario.visible[i])
        lines.append(f"{i} {flag} " + " ".join(f"{x:.17g}" for x in vals))
    return "\n".join(lines) + "\n"


def scenario_from_text(text):
    """Parse the output of :func:`scenario_to_text`."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "goodfeat-scenario v1":
        raise ValueError("not a goodfeat scenario (missing header)")
    if not lines[1].startswith("config ") or not lines[2].startswith("pose "):
        raise ValueError("malformed scenario: expected config and pose lines")
    config = _config_from_dict(json.loads(lines[1][len("config "):]))
    pose_vals = np.array([float(x) for x in lines[2].split()[1:]])
    if pose_vals.shape != (12,):
        raise ValueError("pose line must hold 12 numbers")
    true_pose = Pose(pose_vals[:9].reshape(3, 3), pose_vals[9:])
    n = int(lines[3].split()[1])
    if len(lines) != 4 + n:
        raise ValueError(f"expected {n} point lines, found {len(lines) - 4}")
    points_true = np.empty((n, 3))
    points_map = np.empty((n, 3))
    pixels = np.empty((n, 2))
    visible = np.empty(n, dtype=bool)
    for row, line in enumerate(lines[4:]):
        parts = line.split()
        if int(parts[0]) != row:
            raise ValueError(f"point ids must be consecutive, got {parts[0]} at row {row}")
        visible[row] = bool(int(parts[1]))
        vals = np.array([float(x) for x in parts[2:]])
        if vals.shape != (8,):
            raise ValueError(f"point line {row} must hold 8 numbers")
        points_true[row] = vals[:3]
        points_map[row] = vals[3:6]
        pixels[row] = vals[6:]
    return Scenario(
        config=config,
        true_pose=true_pose,
        points_true=points_true,
        points_map=points_map,
        pixels=pixels,
        visible=visible,
    )


def scenarios_equal(a, b, tol=0.0):
    """Exact (or tolerance-based) equality of two scenarios' arrays."""
    if a.config != b.config:
        return False
    pairs = [
        (a.true_pose.rotation, b.true_pose.rotation),
        (a.true_pose.translation, b.true_pose.translation),
        (a.points_true, b.points_true),
        (a.points_map, b.points_map),
        (a.pixels, b.pixels),
    ]
    for x, y in pairs:
        diff = np.abs(x - y)
        finite_mismatch = np.isnan(x) != np.isnan(y)
        if np.any(finite_mismatch):
            return False
        if np.any(diff[~np.isnan(x)] > tol):
            return False
    return bool(np.array_equal(a.visible, b.visible))
