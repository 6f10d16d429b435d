"""Metric and eigenvalue tests.

symmetric_eigenvalues (cyclic Jacobi) is cross-checked against
numpy.linalg.eigvalsh, an entirely separate code path; the two routes stay
independent on purpose.
"""

import numpy as np
import pytest

from goodfeat import (
    FeatureBlock,
    InfoMatrix,
    MetricKind,
    evaluate,
    hadamard_bound,
    logdet_gain,
    symmetric_eigenvalues,
)


def _random_symmetric(rng, scale=1.0):
    a = rng.normal(size=(6, 6)) * scale
    return (a + a.T) / 2.0


def _random_blocks(rng, n, stereo=False):
    shape = (4, 6) if stereo else (2, 6)
    return [FeatureBlock(i, rng.normal(size=shape)) for i in range(n)]


class TestSymmetricEigenvalues:
    def test_matches_eigvalsh(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            a = _random_symmetric(rng, scale=10.0 ** rng.integers(-3, 4))
            ours = symmetric_eigenvalues(a)
            ref = np.sort(np.linalg.eigvalsh(a))[::-1]
            scale = max(np.abs(ref).max(), 1e-30)
            np.testing.assert_allclose(ours, ref, atol=1e-10 * scale)

    def test_descending_order(self):
        rng = np.random.default_rng(1)
        evals = symmetric_eigenvalues(_random_symmetric(rng))
        assert np.all(np.diff(evals) <= 0)

    def test_diagonal_is_exact(self):
        d = np.diag([5.0, -2.0, 0.0, 3.5, 1e-8, 7.0])
        np.testing.assert_allclose(symmetric_eigenvalues(d),
                                   np.sort(np.diag(d))[::-1], atol=0)

    def test_known_two_by_two_blocks(self):
        a = np.zeros((6, 6))
        a[:2, :2] = [[2.0, 1.0], [1.0, 2.0]]
        expected = np.array([3.0, 1.0, 0.0, 0.0, 0.0, 0.0])
        np.testing.assert_allclose(symmetric_eigenvalues(a), expected, atol=1e-12)

    def test_trace_and_determinant_preserved(self):
        rng = np.random.default_rng(2)
        a = _random_symmetric(rng)
        evals = symmetric_eigenvalues(a)
        assert np.sum(evals) == pytest.approx(np.trace(a), rel=1e-12)
        assert np.prod(evals) == pytest.approx(np.linalg.det(a), rel=1e-8)

    def test_rejects_nonsquare(self):
        with pytest.raises(ValueError):
            symmetric_eigenvalues(np.zeros((2, 3)))


class TestInfoMatrix:
    def test_prior(self):
        info = InfoMatrix.prior(1e-4)
        np.testing.assert_allclose(info.m, 1e-4 * np.eye(6), atol=0)
        assert info.prior_lambda == 1e-4

    def test_from_blocks_equals_incremental(self):
        rng = np.random.default_rng(3)
        blocks = _random_blocks(rng, 5)
        batch = InfoMatrix.from_blocks(blocks, prior_lambda=1e-6)
        step = InfoMatrix.prior(1e-6)
        for b in blocks:
            step = step.add_block(b)
        np.testing.assert_allclose(batch.m, step.m, atol=1e-12)
        expected = 1e-6 * np.eye(6) + sum(b.gram() for b in blocks)
        np.testing.assert_allclose(batch.m, expected, atol=1e-12)

    def test_rejects_asymmetric(self):
        bad = np.eye(6)
        bad[0, 1] = 1e-3
        with pytest.raises(ValueError):
            InfoMatrix(bad)

    def test_eigenvalues_method(self):
        rng = np.random.default_rng(4)
        info = InfoMatrix.from_blocks(_random_blocks(rng, 6), prior_lambda=1e-6)
        np.testing.assert_allclose(info.eigenvalues(),
                                   np.sort(np.linalg.eigvalsh(info.m))[::-1],
                                   rtol=1e-9, atol=1e-12)


class TestEvaluate:
    def test_max_trace(self):
        rng = np.random.default_rng(5)
        info = InfoMatrix.from_blocks(_random_blocks(rng, 4))
        assert evaluate(MetricKind.MAX_TRACE, info) == pytest.approx(
            np.trace(info.m), rel=1e-12)

    def test_max_logdet(self):
        rng = np.random.default_rng(6)
        info = InfoMatrix.from_blocks(_random_blocks(rng, 5), prior_lambda=1e-3)
        assert evaluate(MetricKind.MAX_LOGDET, info) == pytest.approx(
            np.linalg.slogdet(info.m)[1], rel=1e-10)

    def test_max_logdet_singular_is_neg_inf(self):
        info = InfoMatrix(np.zeros((6, 6)))
        assert evaluate(MetricKind.MAX_LOGDET, info) == -np.inf

    def test_min_eigenvalue(self):
        rng = np.random.default_rng(7)
        info = InfoMatrix.from_blocks(_random_blocks(rng, 5), prior_lambda=1e-6)
        assert evaluate(MetricKind.MAX_MIN_EIGENVALUE, info) == pytest.approx(
            np.linalg.eigvalsh(info.m).min(), rel=1e-6)

    def test_min_cond(self):
        rng = np.random.default_rng(8)
        info = InfoMatrix.from_blocks(_random_blocks(rng, 6), prior_lambda=1e-6)
        evals = np.linalg.eigvalsh(info.m)
        assert evaluate(MetricKind.MIN_COND, info) == pytest.approx(
            evals.max() / evals.min(), rel=1e-6)

    def test_min_cond_singular_is_pos_inf(self):
        rng = np.random.default_rng(9)
        info = InfoMatrix.from_blocks(_random_blocks(rng, 1))
        assert evaluate(MetricKind.MIN_COND, info) == np.inf

    def test_min_cond_clamped_at_one(self):
        info = InfoMatrix(np.eye(6))
        assert evaluate(MetricKind.MIN_COND, info) == 1.0

    def test_accepts_string_kinds(self):
        info = InfoMatrix(np.eye(6))
        assert evaluate("max_trace", info) == pytest.approx(6.0)

    def test_maximize_flags(self):
        assert MetricKind.MAX_TRACE.maximize
        assert MetricKind.MAX_LOGDET.maximize
        assert MetricKind.MAX_MIN_EIGENVALUE.maximize
        assert not MetricKind.MIN_COND.maximize


class TestLogdetGain:
    def test_matches_direct_difference(self):
        rng = np.random.default_rng(10)
        info = InfoMatrix.from_blocks(_random_blocks(rng, 5), prior_lambda=1e-6)
        block = FeatureBlock(99, rng.normal(size=(2, 6)))
        expected = (np.linalg.slogdet(info.m + block.gram())[1]
                    - np.linalg.slogdet(info.m)[1])
        assert logdet_gain(info, block) == pytest.approx(expected, rel=1e-9)

    def test_gain_is_nonnegative(self):
        rng = np.random.default_rng(11)
        info = InfoMatrix.from_blocks(_random_blocks(rng, 5), prior_lambda=1e-6)
        for i in range(20):
            block = FeatureBlock(i, rng.normal(size=(2, 6)))
            assert logdet_gain(info, block) >= 0.0

    def test_singular_base_still_singular(self):
        rng = np.random.default_rng(12)
        info = InfoMatrix(np.zeros((6, 6)))
        block = FeatureBlock(0, rng.normal(size=(2, 6)))
        assert logdet_gain(info, block) == 0.0

    def test_singular_base_rank_restored(self):
        # rank-4 base; the final block supplies the two missing directions
        base = FeatureBlock(0, np.vstack([np.eye(4, 6) * 2.0]))
        info = InfoMatrix(base.gram())
        completion = FeatureBlock(1, np.vstack([np.eye(6)[4:], ]))
        assert np.linalg.matrix_rank(info.m + completion.gram()) == 6
        assert logdet_gain(info, completion) == np.inf


class TestHadamardBound:
    def test_bounds_logdet_above(self):
        rng = np.random.default_rng(14)
        for _ in range(100):
            a = rng.normal(size=(6, 6))
            spd = a @ a.T + 6 * np.eye(6)
            bound = hadamard_bound(np.diag(spd))
            assert bound >= np.linalg.slogdet(spd)[1] - 1e-12

    def test_exact_for_diagonal(self):
        d = np.array([2.0, 0.5, 3.0, 1.0, 7.0, 0.1])
        assert hadamard_bound(d) == pytest.approx(np.log(d).sum(), rel=1e-15)

    def test_rejects_nonpositive_diagonal(self):
        with pytest.raises(ValueError):
            hadamard_bound(np.array([1.0, 0.0, 1.0, 1.0, 1.0, 1.0]))
