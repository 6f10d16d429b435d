"""Information-driven feature selection and active matching for camera pose.

The package provides the full pipeline for studying which feature subsets
to track in least-squares camera-pose estimation: SE(3) geometry and
projection Jacobians, residual whitening, spectral metrics on the pose
information matrix, greedy/lazy/randomized subset selectors with guarantees,
a whitened Gauss-Newton solver, active matching against a simulated
window matcher, and a reproducible Monte-Carlo experiment harness.
"""

from .errors import (
    BehindCamera,
    ConfigError,
    Degenerate,
    DegenerateBaseline,
    Diverged,
    GoodFeatError,
    NotPositiveDefinite,
    RankDeficient,
    TooLarge,
)
from .geometry import (
    CameraModel,
    Pose,
    measurement_jacobians,
    measurement_jacobians_batch,
    project_points,
    project_world,
    se3_exp,
    se3_log,
    skew,
)
from .uncertainty import (
    FeatureBlock,
    NoiseModel,
    feature_blocks,
    pose_covariance,
    residual_whiten,
    scale_level_cov,
    whiten_rows_batch,
)
from .metrics import (
    InfoMatrix,
    MetricKind,
    evaluate,
    hadamard_bound,
    logdet_gain,
    symmetric_eigenvalues,
)
from .selection import (
    SelectionProblem,
    SelectionResult,
    TheoryBounds,
    brute_force_select,
    greedy_select,
    lazier_greedy_select,
    lazy_greedy_select,
    random_select,
    sample_size,
    theory_bounds,
)
from .optimizer import (
    MatchedObservation,
    PoseError,
    SolveReport,
    gauss_newton,
    pose_error,
)
from .simworld import (
    Scenario,
    ScenarioConfig,
    default_camera,
    generate_scenario,
    scenario_from_text,
    scenario_to_text,
    scenarios_equal,
)
from .matching import (
    FrameMeasurements,
    MapPoint,
    MatchSet,
    MatchTriple,
    MatcherSim,
    Measurement,
    good_feature_matching_mono,
    good_feature_matching_stereo,
    map_points_from_scenario,
    simulate_frame,
    window_match,
)
from .harness import (
    ExperimentReport,
    ExperimentSpec,
    check_report,
    default_bounds_epsilons,
    derive_seed,
    error_ratio,
    run_bounds_curve,
    run_experiment,
    run_lazier_benchmark,
    run_matching_sim,
    run_pose_opt_metrics,
)

__version__ = "0.1.0"
