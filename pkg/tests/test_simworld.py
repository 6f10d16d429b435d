"""Simulated-world tests: determinism, geometric invariants of generated
scenarios, and the exact text round trip."""

import dataclasses

import numpy as np
import pytest

from goodfeat import (
    Pose,
    ScenarioConfig,
    default_camera,
    generate_scenario,
    project_points,
    scenario_from_text,
    scenario_to_text,
    scenarios_equal,
)
from goodfeat.errors import Degenerate


class TestScenarioConfig:
    def test_defaults(self):
        cfg = ScenarioConfig()
        assert cfg.n_points == 200
        assert cfg.pixel_sigma == 0.5
        assert cfg.camera == default_camera()

    def test_validation(self):
        with pytest.raises(ValueError):
            ScenarioConfig(n_points=0)
        with pytest.raises(ValueError):
            ScenarioConfig(depth_range=(5.0, 2.0))
        with pytest.raises(ValueError):
            ScenarioConfig(pixel_sigma=-0.1)
        with pytest.raises(ValueError):
            ScenarioConfig(map_sigma=-0.1)


class TestGenerateScenario:
    def test_deterministic(self):
        a = generate_scenario(ScenarioConfig(seed=7))
        b = generate_scenario(ScenarioConfig(seed=7))
        assert np.array_equal(a.points_true, b.points_true)
        assert np.array_equal(a.points_map, b.points_map)
        assert np.array_equal(a.pixels, b.pixels, equal_nan=True)
        assert np.array_equal(a.true_pose.matrix(), b.true_pose.matrix())

    def test_seeds_differ(self):
        a = generate_scenario(ScenarioConfig(seed=0))
        b = generate_scenario(ScenarioConfig(seed=1))
        assert not np.array_equal(a.points_true, b.points_true)

    def test_visibility_flags_match_pixels(self):
        scn = generate_scenario(ScenarioConfig(seed=8))
        nan_rows = np.isnan(scn.pixels).any(axis=1)
        np.testing.assert_array_equal(~scn.visible, nan_rows)
        assert scn.visible_indices().tolist() == np.flatnonzero(scn.visible).tolist()

    def test_visible_points_project_in_bounds(self):
        scn = generate_scenario(ScenarioConfig(seed=9))
        cam = scn.config.camera
        vis = scn.visible_indices()
        _, depths = project_points(cam, scn.true_pose, scn.points_true[vis])
        assert np.all(depths >= cam.min_depth)
        for i in vis:
            assert cam.in_image(scn.pixels[i])

    def test_pixels_near_exact_projection(self):
        cfg = ScenarioConfig(seed=10, pixel_sigma=0.5)
        scn = generate_scenario(cfg)
        vis = scn.visible_indices()
        exact, _ = project_points(cfg.camera, scn.true_pose, scn.points_true[vis])
        offsets = scn.pixels[vis] - exact
        assert np.abs(offsets).max() < 6.0 * cfg.pixel_sigma
        assert np.std(offsets) == pytest.approx(cfg.pixel_sigma, rel=0.1)

    def test_zero_noise_pixels_are_exact(self):
        cfg = ScenarioConfig(seed=11, pixel_sigma=0.0, map_sigma=0.0)
        scn = generate_scenario(cfg)
        vis = scn.visible_indices()
        exact, _ = project_points(cfg.camera, scn.true_pose, scn.points_true[vis])
        np.testing.assert_allclose(scn.pixels[vis], exact, atol=0)
        np.testing.assert_allclose(scn.points_map, scn.points_true, atol=0)

    def test_map_noise_magnitude(self):
        cfg = ScenarioConfig(seed=12, map_sigma=0.05)
        scn = generate_scenario(cfg)
        noise = scn.points_map - scn.points_true
        assert np.std(noise) == pytest.approx(0.05, rel=0.15)

    def test_depths_within_configured_range(self):
        cfg = ScenarioConfig(seed=13, depth_range=(3.0, 6.0))
        scn = generate_scenario(cfg)
        # back-projected depths are measured in the identity frame
        _, depths = project_points(cfg.camera, Pose.identity(), scn.points_true)
        assert depths.min() >= 3.0 - 1e-12
        assert depths.max() <= 6.0 + 1e-12

    def test_too_few_visible_is_degenerate(self):
        with pytest.raises(Degenerate):
            generate_scenario(ScenarioConfig(n_points=12, motion_scale=(5.0, 2.0),
                                             seed=2))

    def test_arrays_read_only(self):
        scn = generate_scenario(ScenarioConfig(seed=14))
        with pytest.raises(ValueError):
            scn.points_true[0, 0] = 0.0


class TestTextRoundTrip:
    def test_exact_round_trip(self):
        scn = generate_scenario(ScenarioConfig(seed=15))
        back = scenario_from_text(scenario_to_text(scn))
        assert scenarios_equal(scn, back, tol=0.0)

    def test_round_trip_preserves_config(self):
        cfg = ScenarioConfig(n_points=50, depth_range=(1.5, 7.0),
                             motion_scale=(0.2, 0.1), map_sigma=0.01,
                             pixel_sigma=1.25, seed=99)
        back = scenario_from_text(scenario_to_text(generate_scenario(cfg)))
        assert back.config == cfg

    def test_header_line(self):
        scn = generate_scenario(ScenarioConfig(seed=16))
        assert scenario_to_text(scn).splitlines()[0] == "goodfeat-scenario v1"

    def test_rejects_wrong_header(self):
        scn = generate_scenario(ScenarioConfig(seed=17))
        text = scenario_to_text(scn).replace("v1", "v2", 1)
        with pytest.raises(ValueError):
            scenario_from_text(text)

    def test_rejects_truncated_text(self):
        scn = generate_scenario(ScenarioConfig(seed=18))
        lines = scenario_to_text(scn).splitlines()
        with pytest.raises(ValueError):
            scenario_from_text("\n".join(lines[:-3]))


class TestScenariosEqual:
    def test_tolerance_semantics(self):
        scn = generate_scenario(ScenarioConfig(seed=19))
        vis = scn.visible_indices()
        pixels = scn.pixels.copy()
        pixels[vis[0]] += 1e-12
        perturbed = dataclasses.replace(scn, pixels=pixels)
        assert not scenarios_equal(scn, perturbed, tol=0.0)
        assert scenarios_equal(scn, perturbed, tol=1e-9)

    def test_nan_patterns_must_match(self):
        scn = generate_scenario(ScenarioConfig(seed=20))
        vis = scn.visible_indices()
        pixels = scn.pixels.copy()
        pixels[vis[0]] = np.nan
        broken = dataclasses.replace(scn, pixels=pixels)
        assert not scenarios_equal(scn, broken, tol=1.0)

    def test_different_configs_unequal(self):
        a = generate_scenario(ScenarioConfig(seed=21))
        b = generate_scenario(ScenarioConfig(seed=22))
        assert not scenarios_equal(a, b, tol=np.inf)
