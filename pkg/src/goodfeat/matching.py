"""Active feature matching: selection interleaved with window matching.

Instead of matching every map point and selecting afterwards, the matcher
ranks candidates by their information gain and spends matching effort only
on the current best candidate. Each candidate starts with an identity pixel
covariance prior; once a measurement is found, the block is re-whitened
with the covariance implied by the measurement's pyramid level and added to
the accumulator, which re-ranks everything that follows.

The stereo variant defers left-right association until after a map point is
matched in the left frame: only accepted candidates get a right-frame
lookup, and a right match grows the block from 2x6 to 4x6.

Matching itself is simulated: the simulator knows the true correspondence
and reports it iff it falls inside a fixed Chebyshev window around the
predicted projection and a Bernoulli draw does not miss. Clutter
measurements carry no correspondence and can never match.
"""

from __future__ import annotations

import dataclasses
import math
import time

import numpy as np

from . import geometry
from .selection import _batch_logdet, _draw_sample, sample_size
from .uncertainty import _check_covariance, scale_level_cov, whiten_rows_batch


@dataclasses.dataclass(frozen=True)
class MapPoint:
    """A mapped landmark: position, its covariance, and the expected level."""

    id: int
    position: np.ndarray
    sigma_p: np.ndarray
    expected_level: int = 0

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float)
        if p.shape != (3,):
            raise ValueError("position must have shape (3,)")
        p.setflags(write=False)
        object.__setattr__(self, "position", p)
        object.__setattr__(
            self, "sigma_p", _check_covariance(self.sigma_p, 3, "sigma_p", allow_semidefinite=True)
        )
        if self.expected_level < 0:
            raise ValueError("expected_level must be non-negative")


@dataclasses.dataclass(frozen=True)
class Measurement:
    """One detected keypoint; ``true_point_id`` is None for clutter."""

    pixel: np.ndarray
    level: int = 0
    true_point_id: int | None = None

    def __post_init__(self):
        z = np.asarray(self.pixel, dtype=float)
        if z.shape != (2,) or not np.all(np.isfinite(z)):
            raise ValueError("pixel must be a finite 2-vector")
        z.setflags(write=False)
        object.__setattr__(self, "pixel", z)
        if self.level < 0:
            raise ValueError("level must be non-negative")


@dataclasses.dataclass(frozen=True)
class FrameMeasurements:
    """Keypoints of one frame; ``right`` stays empty for monocular rigs."""

    left: tuple
    right: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "left", tuple(self.left))
        object.__setattr__(self, "right", tuple(self.right))


@dataclasses.dataclass(frozen=True)
class MatcherSim:
    """Simulated matcher behavior: window size, miss rate, clutter, seed.

    ``window_radius`` may be zero, in which case only an exact pixel
    coincidence matches.
    """

    window_radius: float
    miss_probability: float = 0.0
    clutter: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.window_radius < 0.0:
            raise ValueError("window_radius must be non-negative")
        if not 0.0 <= self.miss_probability < 1.0:
            raise ValueError("miss_probability must be in [0, 1)")
        if self.clutter < 0:
            raise ValueError("clutter must be non-negative")


@dataclasses.dataclass(frozen=True)
class MatchTriple:
    """An accepted association; ``right`` is None when only the left matched."""

    point_id: int
    left: Measurement
    right: Measurement | None = None


@dataclasses.dataclass(frozen=True)
class MatchSet:
    """Accepted matches in acceptance order plus effort bookkeeping.

    ``gain_evaluations`` counts candidate log-determinant evaluations and
    ``match_attempts`` counts window-match queries, both of which consume
    the time budget. ``wall_time`` is real elapsed time.
    """

    triples: tuple
    gain_evaluations: int = 0
    match_attempts: int = 0
    wall_time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "triples", tuple(self.triples))
        ids = [t.point_id for t in self.triples]
        if len(ids) != len(set(ids)):
            raise ValueError("a map point may be matched at most once")

    def point_ids(self):
        return tuple(t.point_id for t in self.triples)


def _window_accept(predicted, measurement, sim, rng):
    """Shared accept logic: in-window check then a Bernoulli miss draw.

    The RNG is consumed only when a candidate measurement exists in-window
    and the miss probability is nonzero, so seeded runs are reproducible
    given the query order alone.
    """
    if measurement is None:
        return None
    if np.max(np.abs(measurement.pixel - predicted)) > sim.window_radius:
        return None
    if sim.miss_probability > 0.0 and rng.random() >= 1.0 - sim.miss_probability:
        return None
    return measurement


def window_match(point, pose_guess, measurements, sim, camera, side="left", rng=None):
    """Look up one point's measurement within the prediction window.

    Returns the true corresponding measurement iff it exists, lies within
    ``sim.window_radius`` (Chebyshev) of the projection of the point under
    ``pose_guess``, and the miss draw succeeds; otherwise None. A fresh RNG
    is seeded from ``sim.seed`` unless one is passed in.
    """
    if rng is None:
        rng = np.random.default_rng(sim.seed)
    predicted = geometry.project_world(camera, pose_guess, point.position, side)
    found = None
    for meas in measurements:
        if meas.true_point_id == point.id:
            found = meas
            break
    return _window_accept(predicted, found, sim, rng)


def _active_matching(
    points,
    frame,
    k,
    t_max,
    epsilon,
    sim,
    camera,
    pose_guess,
    stereo,
    seed,
    prior_lambda,
    scale_factor,
    base_sigma_px,
    clock,
    trace,
):
    start = time.perf_counter()
    points = tuple(points)
    if k < 0:
        raise ValueError("k must be non-negative")
    if t_max is None:
        t_max = math.inf
    if t_max < 0.0:
        raise ValueError("t_max must be non-negative")

    def result(accepted, evals, attempts):
        return MatchSet(
            triples=tuple(accepted),
            gain_evaluations=evals,
            match_attempts=attempts,
            wall_time=time.perf_counter() - start,
        )

    if k == 0 or len(points) == 0:
        return result([], 0, 0)

    # Candidates are the points in front of the camera at the prediction.
    positions = np.array([p.position for p in points])
    projected, depths = geometry.project_points(camera, pose_guess, positions)
    cand_ids = np.flatnonzero(depths >= camera.min_depth)
    n = len(cand_ids)
    if n == 0:
        return result([], 0, 0)
    positions = positions[cand_ids]
    predictions = projected[cand_ids]
    sigma_ps = np.array([points[i].sigma_p for i in cand_ids])

    # Identity pixel-covariance prior until a measurement fixes the level.
    h_x, h_p = geometry.measurement_jacobians_batch(camera, pose_guess, positions)
    prior_rows = whiten_rows_batch(h_x, h_p, np.eye(2), sigma_ps)
    grams = np.einsum("nij,nik->njk", prior_rows, prior_rows)
    if stereo:
        predictions_right, _ = geometry.project_points(camera, pose_guess, positions, "right")

    left_by_id = {m.true_point_id: m for m in frame.left if m.true_point_id is not None}
    right_by_id = {m.true_point_id: m for m in frame.right if m.true_point_id is not None}

    sampler = np.random.default_rng(seed)
    matcher = np.random.default_rng(sim.seed)
    m_acc = prior_lambda * np.eye(6)
    available = np.arange(n)
    accepted = []
    evals = attempts = 0
    t_accu = 0.0
    s = sample_size(n, min(k, n), epsilon)

    while len(accepted) < k and len(available) > 0 and t_accu < t_max:
        sample = [int(c) for c in _draw_sample(sampler, available, s)]
        sampled_this_round = set(sample)
        t0 = clock()
        gains = list(_batch_logdet(m_acc[None, :, :] + grams[sample]))
        t_accu += clock() - t0
        evals += len(sample)
        while sample and t_accu < t_max:
            # Highest raw updated log det wins; lexsort breaks exact ties
            # toward the lowest candidate index, matching the selectors.
            pick = int(np.lexsort((np.array(sample), -np.array(gains)))[0])
            ci = sample[pick]
            pid = points[cand_ids[ci]].id
            t0 = clock()
            meas = _window_accept(predictions[ci], left_by_id.get(pid), sim, matcher)
            t_accu += clock() - t0
            attempts += 1
            if meas is not None:
                sigma_z = scale_level_cov(meas.level, scale_factor, base_sigma_px)
                rows = whiten_rows_batch(
                    h_x[ci : ci + 1], h_p[ci : ci + 1], sigma_z, sigma_ps[ci : ci + 1]
                )[0]
                right_meas = None
                if stereo:
                    t0 = clock()
                    right_meas = _window_accept(
                        predictions_right[ci], right_by_id.get(pid), sim, matcher
                    )
                    t_accu += clock() - t0
                    attempts += 1
                if right_meas is not None:
                    h_x_r, h_p_r = geometry.measurement_jacobians_batch(
                        camera, pose_guess, positions[ci : ci + 1], "right"
                    )
                    sigma_z_r = scale_level_cov(right_meas.level, scale_factor, base_sigma_px)
                    rows_r = whiten_rows_batch(h_x_r, h_p_r, sigma_z_r, sigma_ps[ci : ci + 1])[0]
                    rows = np.vstack([rows, rows_r])
                if trace is not None:
                    record = {
                        "sample_ids": tuple(int(points[cand_ids[c]].id) for c in sample),
                        "gains": tuple(float(g) for g in gains),
                        "picked": pick,
                        "accepted_id": int(pid),
                        "logdet_before": float(_batch_logdet(m_acc[None, :, :])[0]),
                    }
                m_acc = m_acc + rows.T @ rows
                if trace is not None:
                    record["logdet_after"] = float(_batch_logdet(m_acc[None, :, :])[0])
                    trace.append(record)
                accepted.append(MatchTriple(int(pid), meas, right_meas))
                available = available[available != ci]
                break
            # Failure: the candidate is out for good; keep the sample full
            # from candidates not yet sampled this round, ending the round
            # when none remain.
            del sample[pick], gains[pick]
            available = available[available != ci]
            pool = np.setdiff1d(available, list(sampled_this_round))
            if len(pool) == 0:
                break
            new = int(_draw_sample(sampler, pool, 1)[0])
            sampled_this_round.add(new)
            t0 = clock()
            gain = float(_batch_logdet(m_acc[None, :, :] + grams[new : new + 1])[0])
            t_accu += clock() - t0
            evals += 1
            sample.append(new)
            gains.append(gain)
    return result(accepted, evals, attempts)


def good_feature_matching_mono(
    points,
    frame,
    k,
    t_max,
    epsilon,
    sim,
    camera,
    pose_guess,
    *,
    seed=0,
    prior_lambda=1e-6,
    scale_factor=1.2,
    base_sigma_px=1.0,
    clock=time.perf_counter,
    trace=None,
):
    """Actively match up to ``k`` map points against a monocular frame.

    Each round samples (n / k) log(1 / epsilon) unmatched candidates, tries
    to match the one with the highest information gain, and on failure
    permanently drops it and tops the sample up. Terminates when k matches
    are accepted, candidates run out, or the accumulated evaluation plus
    matching time reaches ``t_max`` (checked at both loop heads, so
    ``t_max=0`` yields an empty MatchSet). ``seed`` drives the sampling
    stream and ``sim.seed`` the matcher's miss draws; ``clock`` is
    injectable for deterministic budget tests. A partial MatchSet is a
    normal outcome, returned in acceptance order. When ``trace`` is a list,
    one record per accepted match is appended with the sampled ids, their
    gains, the picked position, and the accumulator log determinant before
    and after the update.
    """
    return _active_matching(
        points, frame, k, t_max, epsilon, sim, camera, pose_guess,
        False, seed, prior_lambda, scale_factor, base_sigma_px, clock, trace,
    )


def good_feature_matching_stereo(
    points,
    frame,
    k,
    t_max,
    epsilon,
    sim,
    camera,
    pose_guess,
    *,
    seed=0,
    prior_lambda=1e-6,
    scale_factor=1.2,
    base_sigma_px=1.0,
    clock=time.perf_counter,
    trace=None,
):
    """Stereo variant: a right-frame match is attempted only after a left
    match succeeds, and a right hit stacks two more whitened rows onto the
    block (4x6) before it enters the accumulator. Requires a positive
    baseline; a right miss keeps the mono 2x6 block and a triple without a
    right measurement.
    """
    if camera.baseline <= 0.0:
        raise ValueError("stereo matching requires a camera with a positive baseline")
    return _active_matching(
        points, frame, k, t_max, epsilon, sim, camera, pose_guess,
        True, seed, prior_lambda, scale_factor, base_sigma_px, clock, trace,
    )


def map_points_from_scenario(scenario, sigma_p=None, expected_level=0):
    """MapPoints for every scenario point, positioned at the noisy map.

    ``sigma_p`` defaults to the scenario's map noise covariance,
    map_sigma^2 I (possibly zero).
    """
    if sigma_p is None:
        sigma_p = scenario.config.map_sigma**2 * np.eye(3)
    return tuple(
        MapPoint(id=i, position=scenario.points_map[i], sigma_p=sigma_p, expected_level=expected_level)
        for i in range(scenario.config.n_points)
    )


def simulate_frame(scenario, camera, sim, *, seed=0, max_level=0, pixel_sigma=None):
    """Detected keypoints of one frame of a scenario.

    Left measurements reuse the scenario's noisy pixels for its visible
    points; right measurements (when ``camera.baseline > 0``) project the
    true points into the right camera and add fresh Gaussian noise of
    ``pixel_sigma`` (default: the scenario's). Measurements whose noisy
    pixel leaves the image are dropped, keeping every reported pixel in
    bounds. Pyramid levels are drawn uniformly in [0, max_level], and
    ``sim.clutter`` unmatched decoys are added per side.

    The RNG seeded by ``seed`` draws, in order: left levels (if
    ``max_level > 0``), right pixel noise, right levels (stereo with
    ``max_level > 0``), left clutter, right clutter.
    """
    rng = np.random.default_rng(seed)
    if pixel_sigma is None:
        pixel_sigma = scenario.config.pixel_sigma
    vis = scenario.visible_indices()
    if max_level > 0:
        left_levels = rng.integers(0, max_level + 1, size=len(vis))
    else:
        left_levels = np.zeros(len(vis), dtype=int)
    left = [
        Measurement(scenario.pixels[i], int(lvl), int(i))
        for i, lvl in zip(vis, left_levels)
        if camera.in_image(scenario.pixels[i])
    ]

    right = []
    if camera.baseline > 0.0:
        projected, depths = geometry.project_points(
            camera, scenario.true_pose, scenario.points_true, "right"
        )
        noise = rng.normal(0.0, pixel_sigma, projected.shape)
        visible_right = (depths >= camera.min_depth) & camera.in_image(projected)
        noisy = projected + noise
        if max_level > 0:
            right_levels = rng.integers(0, max_level + 1, size=scenario.config.n_points)
        else:
            right_levels = np.zeros(scenario.config.n_points, dtype=int)
        right = [
            Measurement(noisy[i], int(right_levels[i]), int(i))
            for i in np.flatnonzero(visible_right)
            if camera.in_image(noisy[i])
        ]

    for side_list in (left, right) if camera.baseline > 0.0 else (left,):
        for _ in range(sim.clutter):
            pixel = np.array(
                [rng.uniform(0.0, camera.width), rng.uniform(0.0, camera.height)]
            )
            side_list.append(Measurement(pixel, 0, None))
    return FrameMeasurements(left=tuple(left), right=tuple(right))
