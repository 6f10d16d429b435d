"""Monte-Carlo experiment runners producing reproducible CSV reports.

Four experiment kinds are supported:

* ``pose_opt_metrics``  compares subset-selection metrics (plus Random and
  All baselines) by downstream Gauss-Newton pose error across pixel-noise
  levels and subset sizes.
* ``lazier_benchmark``  measures how closely the randomized selector tracks
  the deterministic one, in downstream pose error, in metric value, and in
  gain evaluations.
* ``matching_sim``  runs active matching end to end against the simulated
  matcher and compares with a match-everything baseline.
* ``bounds_curve``  tabulates the closed-form guarantees of the randomized
  selector over an epsilon grid.

Per-trial seeds derive from ``(base_seed, grid_index, trial_index, stream)``
through numpy's SeedSequence, so grid points are statistically independent
and reruns are bit-identical apart from wall-time columns. Within
``pose_opt_metrics`` the scenario stream depends only on the noise level
and trial, never on the metric or subset size, so every strategy faces the
same worlds and an exhaustive subset reproduces the All baseline exactly.

A Diverged or RankDeficient solve increments the row's failure count and is
excluded from the RMS statistics; it is never silently dropped.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import functools
import math
import time

import numpy as np

from . import matching as matching_mod
from .errors import ConfigError, Degenerate, DegenerateBaseline, RankDeficient, Diverged
from .geometry import CameraModel, Pose
from .metrics import MetricKind
from .optimizer import MatchedObservation, gauss_newton, pose_error
from .selection import (
    SelectionProblem,
    greedy_select,
    lazier_greedy_select,
    lazy_greedy_select,
    random_select,
    sample_size,
    theory_bounds,
)
from .simworld import ScenarioConfig, generate_scenario
from .uncertainty import NoiseModel, feature_blocks, scale_level_cov

# Stream tags for derive_seed: keep scenario generation first so that the
# same worlds are regenerated no matter which downstream streams a runner
# consumes.
_STREAM_SCENARIO = 0
_STREAM_SELECT = 1
_STREAM_FRAME = 2
_STREAM_MATCHER = 3
_STREAM_SAMPLER = 4

_POSE_OPT_METRICS = (
    "max_trace",
    "min_cond",
    "max_min_eigenvalue",
    "max_logdet",
    "random",
    "all",
)

_KINDS = ("pose_opt_metrics", "lazier_benchmark", "matching_sim", "bounds_curve")


def derive_seed(*parts):
    """Deterministic 64-bit seed from integer parts via SeedSequence."""
    ss = np.random.SeedSequence([int(p) for p in parts])
    return int(ss.generate_state(1, np.uint64)[0])


def default_bounds_epsilons(mu=0.8):
    """An epsilon grid that straddles the probability bound's zero point."""
    zero = math.exp(-mu) - math.exp(-1.0)
    grid = [0.005, 0.01, 0.02, 0.05, zero, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9]
    return tuple(sorted(grid))


@dataclasses.dataclass(frozen=True)
class ExperimentSpec:
    """Declarative description of one experiment run.

    Only the fields relevant to ``kind`` are consulted; the rest keep their
    defaults and are still echoed into the report so each row carries its
    full configuration. ``t_max`` of None means no matching time budget,
    which keeps the CSV deterministic; set a budget explicitly to study it.
    """

    kind: str
    trials: int = 100
    base_seed: int = 0
    workers: int = 1
    full_scale: bool = False
    # Scenario knobs shared by the simulation kinds.
    n_points: int = 200
    pixel_sigma: float = 0.5
    map_sigma: float = 0.02
    # pose_opt_metrics.
    subset_sizes: tuple = (80, 120, 160, 200)
    pixel_sigmas: tuple = (0.5, 1.5, 2.5)
    metric_names: tuple = _POSE_OPT_METRICS
    # lazier_benchmark.
    full_set_sizes: tuple = (1500,)
    epsilons: tuple = (0.1,)
    worlds: int = 20
    repeats: int = 20
    # matching_sim.
    modes: tuple = ("mono",)
    miss_probabilities: tuple = (0.0,)
    window_radius: float = 10.0
    clutter: int = 0
    t_max: float | None = None
    max_level: int = 2
    stereo_baseline: float = 0.1
    # bounds_curve.
    bounds_k: int = 450
    bounds_mu: float = 0.8
    bounds_epsilons: tuple = dataclasses.field(default_factory=default_bounds_epsilons)

    def __post_init__(self):
        for name in (
            "subset_sizes",
            "pixel_sigmas",
            "metric_names",
            "full_set_sizes",
            "epsilons",
            "modes",
            "miss_probabilities",
            "bounds_epsilons",
        ):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        grids = {
            "pose_opt_metrics": ("subset_sizes", "pixel_sigmas", "metric_names"),
            "lazier_benchmark": ("full_set_sizes", "subset_sizes", "epsilons"),
            "matching_sim": ("modes", "subset_sizes", "epsilons", "miss_probabilities"),
            "bounds_curve": ("bounds_epsilons",),
        }[self.kind]
        for name in grids:
            if len(getattr(self, name)) == 0:
                raise ConfigError(f"{name} must be non-empty for kind {self.kind}")
        if self.kind == "pose_opt_metrics":
            bad = [m for m in self.metric_names if m not in _POSE_OPT_METRICS]
            if bad:
                raise ConfigError(f"unknown metric names {bad}")
            if max(self.subset_sizes) > self.n_points:
                raise ConfigError(
                    f"subset size {max(self.subset_sizes)} exceeds n_points {self.n_points}"
                )
        for eps in self.epsilons + self.bounds_epsilons:
            if not 0.0 < eps < 1.0:
                raise ConfigError(f"epsilon {eps} outside (0, 1)")
        if not 0.0 < self.bounds_mu <= 1.0:
            raise ConfigError(f"bounds_mu {self.bounds_mu} outside (0, 1]")
        for miss in self.miss_probabilities:
            if not 0.0 <= miss < 1.0:
                raise ConfigError(f"miss probability {miss} outside [0, 1)")
        for mode in self.modes:
            if mode not in ("mono", "stereo"):
                raise ConfigError(f"mode must be 'mono' or 'stereo', got {mode!r}")
        if min(self.subset_sizes) < 1 or min(self.full_set_sizes) < 1:
            raise ConfigError("subset and full-set sizes must be at least 1")
        if self.kind == "lazier_benchmark":
            if max(self.subset_sizes) > min(self.full_set_sizes):
                raise ConfigError("benchmark subset sizes must not exceed the full set size")
            if self.worlds < 1 or self.repeats < 1:
                raise ConfigError("worlds and repeats must be at least 1")

    @classmethod
    def from_dict(cls, data):
        """Build a spec from a parsed config mapping; unknown keys fail."""
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if "kind" not in data:
            raise ConfigError("config must set 'kind'")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc))

    def effective_trials(self):
        """Trial count after the full-scale flag (at least 300 when set)."""
        return max(self.trials, 300) if self.full_scale else self.trials

    def effective_worlds(self):
        """World count after the full-scale flag (at least 100 when set)."""
        return max(self.worlds, 100) if self.full_scale else self.worlds


@dataclasses.dataclass(frozen=True)
class ExperimentReport:
    """Report rows, one per grid point, with a fixed column order."""

    kind: str
    columns: tuple
    rows: tuple

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "rows", tuple(self.rows))
        for row in self.rows:
            if set(row) != set(self.columns):
                missing = set(self.columns) ^ set(row)
                raise ValueError(f"row keys do not match columns: {sorted(missing)}")

    def to_csv(self):
        """Serialize with 9-significant-digit floats; header included."""
        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(_format_cell(row[c]) for c in self.columns))
        return "\n".join(lines) + "\n"

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_csv())


def _format_cell(value):
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.9g}"
    return str(value)


def error_ratio(lazier_estimates, lazy_estimates, truths):
    """Normalized RMS discrepancy between two estimate sequences.

    The numerator is the RMS translational distance between paired lazier
    and lazy estimates; the denominator is the RMS translational error of
    the lazy estimates against truth. Raises DegenerateBaseline when the
    reference error is numerically zero.
    """
    lazier = list(lazier_estimates)
    lazy = list(lazy_estimates)
    truth = list(truths)
    if not lazier or len(lazier) != len(lazy) or len(lazy) != len(truth):
        raise ValueError("estimate sequences must be non-empty and equal-length")
    num = math.sqrt(
        np.mean([pose_error(a, b).translational ** 2 for a, b in zip(lazier, lazy)])
    )
    den = math.sqrt(
        np.mean([pose_error(b, t).translational ** 2 for b, t in zip(lazy, truth)])
    )
    if den < 1e-12:
        raise DegenerateBaseline(f"reference RMS error {den:.3e} is below 1e-12")
    return num / den


def _rms_of_squares(squared_values):
    """RMS from already-squared samples; NaN when no trial succeeded."""
    if not len(squared_values):
        return float("nan")
    return float(np.sqrt(np.mean(squared_values)))


def _scenario_camera(baseline=0.0):
    return CameraModel(
        fx=460.0, fy=460.0, cx=320.0, cy=240.0, width=640, height=480,
        baseline=baseline, min_depth=0.1,
    )


def _observations_for(scenario, ids, sigma_z):
    """Left-frame observations for the given point ids, sorted by id.

    Sorting makes the observation list depend only on the chosen set, so
    strategies that pick the same features solve the identical system.
    """
    ids = np.sort(np.asarray(ids, dtype=int))
    return [
        MatchedObservation(
            map_point=scenario.points_map[i],
            pixel=scenario.pixels[i],
            sigma_z=sigma_z,
        )
        for i in ids
    ]


def _solve(camera, observations, sigma_p):
    report = gauss_newton(camera, observations, Pose.identity(), sigma_p=sigma_p)
    return report.pose


def _pose_opt_sigma_point(spec, sigma_index):
    """All rows for one pixel-noise level of the metric comparison."""
    sigma = spec.pixel_sigmas[sigma_index]
    sigma_eff = sigma if sigma > 0.0 else 1.0
    camera = _scenario_camera()
    trials = spec.effective_trials()
    noise = NoiseModel.isotropic(sigma_eff, spec.map_sigma)
    sigma_z = sigma_eff**2 * np.eye(2)
    sigma_p = spec.map_sigma**2 * np.eye(3) if spec.map_sigma > 0.0 else None
    k_grid = spec.subset_sizes
    cells = {}
    for name in spec.metric_names:
        for k in k_grid if name != "all" else (spec.n_points,):
            cells[(name, k)] = {
                "sq_t": [], "sq_r": [], "fail": 0, "evals": 0.0, "sel_s": 0.0, "solve_s": 0.0,
            }
    visible_counts = []

    for trial in range(trials):
        seed = derive_seed(spec.base_seed, sigma_index, trial, _STREAM_SCENARIO)
        config = ScenarioConfig(
            n_points=spec.n_points,
            map_sigma=spec.map_sigma,
            pixel_sigma=sigma,
            camera=camera,
            seed=seed,
        )
        try:
            scenario = generate_scenario(config)
        except Degenerate:
            for cell in cells.values():
                cell["fail"] += 1
            continue
        vis = scenario.visible_indices()
        m = len(vis)
        visible_counts.append(m)
        blocks = feature_blocks(
            camera, Pose.identity(), scenario.points_map[vis], noise
        )
        k_max_eff = min(max(k_grid), m)

        orders = {}
        for name in spec.metric_names:
            t0 = time.perf_counter()
            if name == "all":
                orders[name] = (np.arange(m), None)
            elif name == "random":
                problem = SelectionProblem(
                    blocks, k_max_eff,
                    seed=derive_seed(spec.base_seed, sigma_index, trial, _STREAM_SELECT),
                )
                orders[name] = (np.array(random_select(problem).chosen), None)
            else:
                problem = SelectionProblem(blocks, k_max_eff, metric=MetricKind(name))
                result = greedy_select(problem)
                orders[name] = (np.array(result.chosen), result.round_evaluations)
            sel_elapsed = time.perf_counter() - t0
            ks = k_grid if name != "all" else (spec.n_points,)
            for k in ks:
                cells[(name, k)]["sel_s"] += sel_elapsed

        for (name, k), cell in cells.items():
            order, round_evals = orders[name]
            k_eff = min(k, m)
            chosen_local = order[:k_eff]
            ids = vis[chosen_local]
            if round_evals is not None:
                cell["evals"] += sum(round_evals[:k_eff])
            obs = _observations_for(scenario, ids, sigma_z)
            t0 = time.perf_counter()
            try:
                estimate = _solve(camera, obs, sigma_p)
            except (Diverged, RankDeficient):
                cell["fail"] += 1
                continue
            finally:
                cell["solve_s"] += time.perf_counter() - t0
            err = pose_error(estimate, scenario.true_pose)
            cell["sq_t"].append(err.translational**2)
            cell["sq_r"].append(err.rotational_deg**2)

    rows = []
    for name in spec.metric_names:
        for k in k_grid if name != "all" else (spec.n_points,):
            cell = cells[(name, k)]
            rows.append(
                {
                    "experiment": "pose_opt_metrics",
                    "metric": name,
                    "subset_size": k,
                    "n_points": spec.n_points,
                    "pixel_sigma": sigma,
                    "map_sigma": spec.map_sigma,
                    "trials": trials,
                    "base_seed": spec.base_seed,
                    "mean_visible": float(np.mean(visible_counts)) if visible_counts else 0.0,
                    "failures": cell["fail"],
                    "rms_translation_m": _rms_of_squares(cell["sq_t"]),
                    "rms_rotation_deg": _rms_of_squares(cell["sq_r"]),
                    "mean_gain_evaluations": cell["evals"] / trials,
                    "mean_selection_s": cell["sel_s"] / trials,
                    "mean_solve_s": cell["solve_s"] / trials,
                }
            )
    return rows


_POSE_OPT_COLUMNS = (
    "experiment", "metric", "subset_size", "n_points", "pixel_sigma", "map_sigma",
    "trials", "base_seed", "mean_visible", "failures",
    "rms_translation_m", "rms_rotation_deg",
    "mean_gain_evaluations", "mean_selection_s", "mean_solve_s",
)


def run_pose_opt_metrics(spec):
    """Metric-versus-baseline pose-error comparison; see module docstring."""
    if spec.kind != "pose_opt_metrics":
        raise ConfigError(f"spec kind {spec.kind!r} is not pose_opt_metrics")
    fn = functools.partial(_pose_opt_sigma_point, spec)
    chunks = _run_grid(fn, range(len(spec.pixel_sigmas)), spec.workers)
    rows = [row for chunk in chunks for row in chunk]
    return ExperimentReport("pose_opt_metrics", _POSE_OPT_COLUMNS, rows)


def _lazier_grid_point(spec, grid_index):
    """One (n, k, epsilon) cell of the lazier benchmark."""
    combos = [
        (n, k, eps)
        for n in spec.full_set_sizes
        for k in spec.subset_sizes
        for eps in spec.epsilons
    ]
    n, k, eps = combos[grid_index]
    camera = _scenario_camera()
    sigma_eff = spec.pixel_sigma if spec.pixel_sigma > 0.0 else 1.0
    noise = NoiseModel.isotropic(sigma_eff, spec.map_sigma)
    sigma_z = sigma_eff**2 * np.eye(2)
    sigma_p = spec.map_sigma**2 * np.eye(3) if spec.map_sigma > 0.0 else None
    worlds = spec.effective_worlds()

    ratios, value_ratios, sample_sizes = [], [], []
    lazier_evals, lazy_evals, greedy_evals = [], [], []
    lazier_secs, lazy_secs = [], []
    failures = 0
    for world in range(worlds):
        seed = derive_seed(spec.base_seed, grid_index, world, _STREAM_SCENARIO)
        config = ScenarioConfig(
            n_points=n,
            map_sigma=spec.map_sigma,
            pixel_sigma=spec.pixel_sigma,
            camera=camera,
            seed=seed,
        )
        try:
            scenario = generate_scenario(config)
        except Degenerate:
            failures += 1
            continue
        vis = scenario.visible_indices()
        m = len(vis)
        k_eff = min(k, m)
        blocks = feature_blocks(camera, Pose.identity(), scenario.points_map[vis], noise)
        problem = SelectionProblem(blocks, k_eff, MetricKind.MAX_LOGDET, epsilon=eps)
        lazy = lazy_greedy_select(problem)
        try:
            lazy_pose = _solve(camera, _observations_for(scenario, vis[list(lazy.chosen)], sigma_z), sigma_p)
        except (Diverged, RankDeficient):
            failures += 1
            continue
        lazy_evals.append(lazy.gain_evaluations)
        lazy_secs.append(lazy.wall_time)
        greedy_evals.append(sum(m - i for i in range(k_eff)))
        sample_sizes.append(sample_size(m, k_eff, eps))
        prior_logdet = 6.0 * math.log(problem.prior_lambda)
        lazy_gain = lazy.metric_value - prior_logdet

        estimates, value_sq = [], []
        for repeat in range(spec.repeats):
            rp = dataclasses.replace(
                problem,
                seed=derive_seed(spec.base_seed, grid_index, world, _STREAM_SAMPLER, repeat),
            )
            lazier = lazier_greedy_select(rp)
            lazier_evals.append(lazier.gain_evaluations)
            lazier_secs.append(lazier.wall_time)
            try:
                estimate = _solve(
                    camera, _observations_for(scenario, vis[list(lazier.chosen)], sigma_z), sigma_p
                )
            except (Diverged, RankDeficient):
                failures += 1
                continue
            estimates.append(estimate)
            value_sq.append((lazy_gain - (lazier.metric_value - prior_logdet)) ** 2)
        if not estimates:
            failures += 1
            continue
        try:
            ratios.append(
                error_ratio(estimates, [lazy_pose] * len(estimates), [scenario.true_pose] * len(estimates))
            )
        except DegenerateBaseline:
            failures += 1
            continue
        value_ratios.append(math.sqrt(np.mean(value_sq)) / lazy_gain)

    return {
        "experiment": "lazier_benchmark",
        "n_points": n,
        "subset_size": k,
        "epsilon": eps,
        "pixel_sigma": spec.pixel_sigma,
        "map_sigma": spec.map_sigma,
        "worlds": worlds,
        "repeats": spec.repeats,
        "base_seed": spec.base_seed,
        "sample_size_mean": float(np.mean(sample_sizes)) if sample_sizes else float("nan"),
        "mean_error_ratio": float(np.mean(ratios)) if ratios else float("nan"),
        "mean_value_error_ratio": float(np.mean(value_ratios)) if value_ratios else float("nan"),
        "lazier_gain_evaluations_mean": float(np.mean(lazier_evals)) if lazier_evals else float("nan"),
        "lazy_gain_evaluations_mean": float(np.mean(lazy_evals)) if lazy_evals else float("nan"),
        "greedy_gain_evaluations_mean": float(np.mean(greedy_evals)) if greedy_evals else float("nan"),
        "lazier_seconds_mean": float(np.mean(lazier_secs)) if lazier_secs else float("nan"),
        "lazy_seconds_mean": float(np.mean(lazy_secs)) if lazy_secs else float("nan"),
        "failures": failures,
    }


_LAZIER_COLUMNS = (
    "experiment", "n_points", "subset_size", "epsilon", "pixel_sigma", "map_sigma",
    "worlds", "repeats", "base_seed", "sample_size_mean",
    "mean_error_ratio", "mean_value_error_ratio",
    "lazier_gain_evaluations_mean", "lazy_gain_evaluations_mean",
    "greedy_gain_evaluations_mean", "lazier_seconds_mean", "lazy_seconds_mean",
    "failures",
)


def run_lazier_benchmark(spec):
    """Randomized-versus-deterministic selection benchmark over worlds."""
    if spec.kind != "lazier_benchmark":
        raise ConfigError(f"spec kind {spec.kind!r} is not lazier_benchmark")
    total = len(spec.full_set_sizes) * len(spec.subset_sizes) * len(spec.epsilons)
    fn = functools.partial(_lazier_grid_point, spec)
    rows = _run_grid(fn, range(total), spec.workers)
    return ExperimentReport("lazier_benchmark", _LAZIER_COLUMNS, rows)


def _matching_grid_point(spec, grid_index):
    """One (mode, k, epsilon, miss) cell of the matching simulation."""
    combos = [
        (mode, k, eps, miss)
        for mode in spec.modes
        for k in spec.subset_sizes
        for eps in spec.epsilons
        for miss in spec.miss_probabilities
    ]
    mode, k, eps, miss = combos[grid_index]
    stereo = mode == "stereo"
    camera = _scenario_camera(spec.stereo_baseline if stereo else 0.0)
    base_sigma = spec.pixel_sigma if spec.pixel_sigma > 0.0 else 1.0
    sigma_p = spec.map_sigma**2 * np.eye(3) if spec.map_sigma > 0.0 else None
    t_max = math.inf if spec.t_max is None else spec.t_max
    trials = spec.effective_trials()
    run = matching_mod.good_feature_matching_stereo if stereo else matching_mod.good_feature_matching_mono

    stats = {
        "matches": [], "right": [], "evals": [], "attempts": [], "wall": [],
        "sq_t": [], "sq_r": [], "base_sq_t": [], "base_sq_r": [],
    }
    failures = baseline_failures = 0
    for trial in range(trials):
        seed = derive_seed(spec.base_seed, grid_index, trial, _STREAM_SCENARIO)
        config = ScenarioConfig(
            n_points=spec.n_points,
            map_sigma=spec.map_sigma,
            pixel_sigma=spec.pixel_sigma,
            camera=camera,
            seed=seed,
        )
        try:
            scenario = generate_scenario(config)
        except Degenerate:
            failures += 1
            baseline_failures += 1
            continue
        sim = matching_mod.MatcherSim(
            window_radius=spec.window_radius,
            miss_probability=miss,
            clutter=spec.clutter,
            seed=derive_seed(spec.base_seed, grid_index, trial, _STREAM_MATCHER),
        )
        frame = matching_mod.simulate_frame(
            scenario, camera, sim,
            seed=derive_seed(spec.base_seed, grid_index, trial, _STREAM_FRAME),
            max_level=spec.max_level,
        )
        points = matching_mod.map_points_from_scenario(scenario)
        match = run(
            points, frame, k, t_max, eps, sim, camera, Pose.identity(),
            seed=derive_seed(spec.base_seed, grid_index, trial, _STREAM_SAMPLER),
            base_sigma_px=base_sigma,
        )
        stats["matches"].append(len(match.triples))
        stats["right"].append(sum(1 for t in match.triples if t.right is not None))
        stats["evals"].append(match.gain_evaluations)
        stats["attempts"].append(match.match_attempts)
        stats["wall"].append(match.wall_time)

        def measurement_obs(point_id, meas, side):
            return MatchedObservation(
                map_point=scenario.points_map[point_id],
                pixel=meas.pixel,
                sigma_z=scale_level_cov(meas.level, base_sigma_px=base_sigma),
                pyramid_level=meas.level,
                side=side,
            )

        obs = []
        for triple in match.triples:
            obs.append(measurement_obs(triple.point_id, triple.left, "left"))
            if triple.right is not None:
                obs.append(measurement_obs(triple.point_id, triple.right, "right"))
        try:
            estimate = _solve(camera, obs, sigma_p)
            err = pose_error(estimate, scenario.true_pose)
            stats["sq_t"].append(err.translational**2)
            stats["sq_r"].append(err.rotational_deg**2)
        except (Diverged, RankDeficient):
            failures += 1

        base_obs = [
            measurement_obs(m.true_point_id, m, "left")
            for m in frame.left
            if m.true_point_id is not None
        ]
        if stereo:
            base_obs.extend(
                measurement_obs(m.true_point_id, m, "right")
                for m in frame.right
                if m.true_point_id is not None
            )
        try:
            baseline = _solve(camera, base_obs, sigma_p)
            err = pose_error(baseline, scenario.true_pose)
            stats["base_sq_t"].append(err.translational**2)
            stats["base_sq_r"].append(err.rotational_deg**2)
        except (Diverged, RankDeficient):
            baseline_failures += 1

    return {
        "experiment": "matching_sim",
        "mode": mode,
        "subset_size": k,
        "epsilon": eps,
        "miss_probability": miss,
        "n_points": spec.n_points,
        "pixel_sigma": spec.pixel_sigma,
        "map_sigma": spec.map_sigma,
        "window_radius": spec.window_radius,
        "clutter": spec.clutter,
        "t_max": math.inf if spec.t_max is None else spec.t_max,
        "max_level": spec.max_level,
        "stereo_baseline": spec.stereo_baseline if stereo else 0.0,
        "trials": trials,
        "base_seed": spec.base_seed,
        "mean_matches": float(np.mean(stats["matches"])) if stats["matches"] else 0.0,
        "mean_right_matches": float(np.mean(stats["right"])) if stats["right"] else 0.0,
        "mean_gain_evaluations": float(np.mean(stats["evals"])) if stats["evals"] else 0.0,
        "mean_match_attempts": float(np.mean(stats["attempts"])) if stats["attempts"] else 0.0,
        "mean_matching_s": float(np.mean(stats["wall"])) if stats["wall"] else 0.0,
        "rms_translation_m": _rms_of_squares(stats["sq_t"]),
        "rms_rotation_deg": _rms_of_squares(stats["sq_r"]),
        "baseline_rms_translation_m": _rms_of_squares(stats["base_sq_t"]),
        "baseline_rms_rotation_deg": _rms_of_squares(stats["base_sq_r"]),
        "failures": failures,
        "baseline_failures": baseline_failures,
    }


_MATCHING_COLUMNS = (
    "experiment", "mode", "subset_size", "epsilon", "miss_probability",
    "n_points", "pixel_sigma", "map_sigma", "window_radius", "clutter",
    "t_max", "max_level", "stereo_baseline", "trials", "base_seed",
    "mean_matches", "mean_right_matches", "mean_gain_evaluations",
    "mean_match_attempts", "mean_matching_s",
    "rms_translation_m", "rms_rotation_deg",
    "baseline_rms_translation_m", "baseline_rms_rotation_deg",
    "failures", "baseline_failures",
)


def run_matching_sim(spec):
    """Active matching end to end versus the match-everything baseline."""
    if spec.kind != "matching_sim":
        raise ConfigError(f"spec kind {spec.kind!r} is not matching_sim")
    total = (
        len(spec.modes) * len(spec.subset_sizes) * len(spec.epsilons) * len(spec.miss_probabilities)
    )
    fn = functools.partial(_matching_grid_point, spec)
    rows = _run_grid(fn, range(total), spec.workers)
    return ExperimentReport("matching_sim", _MATCHING_COLUMNS, rows)


_BOUNDS_COLUMNS = ("experiment", "k", "mu", "epsilon", "ratio_expectation", "probability")


def run_bounds_curve(spec):
    """Tabulate the randomized selector's closed-form guarantees."""
    if spec.kind != "bounds_curve":
        raise ConfigError(f"spec kind {spec.kind!r} is not bounds_curve")
    rows = []
    for eps in spec.bounds_epsilons:
        bounds = theory_bounds(spec.bounds_k, spec.bounds_mu, eps)
        rows.append(
            {
                "experiment": "bounds_curve",
                "k": spec.bounds_k,
                "mu": spec.bounds_mu,
                "epsilon": eps,
                "ratio_expectation": bounds.ratio_expectation,
                "probability": bounds.probability,
            }
        )
    return ExperimentReport("bounds_curve", _BOUNDS_COLUMNS, rows)


def run_experiment(spec):
    """Dispatch a spec to its runner."""
    runner = {
        "pose_opt_metrics": run_pose_opt_metrics,
        "lazier_benchmark": run_lazier_benchmark,
        "matching_sim": run_matching_sim,
        "bounds_curve": run_bounds_curve,
    }[spec.kind]
    return runner(spec)


def _run_grid(fn, indices, workers):
    """Evaluate fn over grid indices, in order, optionally in processes."""
    indices = list(indices)
    if workers <= 1 or len(indices) <= 1:
        return [fn(i) for i in indices]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, indices))


def check_report(report):
    """Threshold checks backing the CLI's --check flag.

    Returns a list of violation messages (empty when all checks pass).
    Checks are per kind: metric ordering and exhaustive-equals-All for
    pose_opt_metrics, the error-ratio ceiling for lazier_benchmark, the
    baseline-relative error for perfect-matcher matching rows, and the
    zero point plus affine ratio column for bounds curves.
    """
    violations = []
    rows = report.rows
    if report.kind == "pose_opt_metrics":
        by_key = {(r["metric"], r["subset_size"], r["pixel_sigma"]): r for r in rows}
        for r in rows:
            if r["metric"] != "max_logdet":
                continue
            rand = by_key.get(("random", r["subset_size"], r["pixel_sigma"]))
            if rand and r["rms_translation_m"] > rand["rms_translation_m"]:
                violations.append(
                    f"max_logdet RMS {r['rms_translation_m']:.6g} exceeds random "
                    f"{rand['rms_translation_m']:.6g} at k={r['subset_size']}, "
                    f"sigma={r['pixel_sigma']}"
                )
            full = by_key.get(("all", r["n_points"], r["pixel_sigma"]))
            if full and r["subset_size"] == r["n_points"]:
                diff = abs(r["rms_translation_m"] - full["rms_translation_m"])
                if diff > 1e-9:
                    violations.append(
                        f"exhaustive subset RMS differs from All by {diff:.3e} "
                        f"at sigma={r['pixel_sigma']}"
                    )
    elif report.kind == "lazier_benchmark":
        for r in rows:
            if not r["mean_error_ratio"] < 0.02:
                violations.append(
                    f"mean_error_ratio {r['mean_error_ratio']:.6g} not below 0.02 at "
                    f"n={r['n_points']}, k={r['subset_size']}, eps={r['epsilon']}"
                )
    elif report.kind == "matching_sim":
        for r in rows:
            if r["miss_probability"] == 0.0 and r["mean_matches"] > 0:
                if not r["rms_translation_m"] <= 1.3 * r["baseline_rms_translation_m"]:
                    violations.append(
                        f"matching RMS {r['rms_translation_m']:.6g} exceeds 1.3x baseline "
                        f"{r['baseline_rms_translation_m']:.6g} at k={r['subset_size']}, "
                        f"mode={r['mode']}"
                    )
    elif report.kind == "bounds_curve":
        zero = math.exp(-rows[0]["mu"]) - math.exp(-1.0) if rows else 0.0
        for r in rows:
            if abs(r["epsilon"] - zero) < 1e-12 and not r["probability"] < 1e-9:
                violations.append(
                    f"probability {r['probability']:.3e} at the zero point is not < 1e-9"
                )
        for a, b in zip(rows, rows[1:]):
            expected = a["ratio_expectation"] - (b["epsilon"] - a["epsilon"])
            if abs(b["ratio_expectation"] - expected) > 1e-12:
                violations.append("ratio_expectation column is not affine with slope -1")
                break
    return violations
