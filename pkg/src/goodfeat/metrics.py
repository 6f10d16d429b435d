"""Scalar quality metrics on the 6x6 pose information matrix.

The information matrix of a feature subset is the prior plus the sum of the
features' whitened Gram blocks. Selection strategies rank subsets by one of
four spectral metrics; all but the condition number are maximized.

Eigenvalues are computed with a hand-rolled cyclic Jacobi iteration so that
metric evaluation has no dependencies beyond basic array arithmetic and is
bit-reproducible across BLAS builds.
"""

from __future__ import annotations

import dataclasses
import enum

import numpy as np


class MetricKind(enum.Enum):
    MAX_TRACE = "max_trace"
    MIN_COND = "min_cond"
    MAX_MIN_EIGENVALUE = "max_min_eigenvalue"
    MAX_LOGDET = "max_logdet"

    @property
    def maximize(self):
        """Whether larger metric values are better (false only for MIN_COND)."""
        return self is not MetricKind.MIN_COND


@dataclasses.dataclass(frozen=True)
class InfoMatrix:
    """A symmetric 6x6 information matrix plus the prior weight baked into it."""

    m: np.ndarray
    prior_lambda: float = 0.0

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.shape != (6, 6):
            raise ValueError(f"information matrix must be 6x6, got {m.shape}")
        if np.max(np.abs(m - m.T)) > 1e-12 * max(1.0, float(np.max(np.abs(m)))):
            raise ValueError("information matrix must be symmetric")
        if self.prior_lambda < 0.0:
            raise ValueError("prior_lambda must be non-negative")
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    @classmethod
    def prior(cls, prior_lambda):
        """The subset-independent starting matrix, lambda * I."""
        return cls(prior_lambda * np.eye(6), prior_lambda)

    @classmethod
    def from_blocks(cls, blocks, prior_lambda=0.0):
        m = prior_lambda * np.eye(6)
        for block in blocks:
            m = m + block.gram()
        return cls(m, prior_lambda)

    def add_block(self, block):
        return InfoMatrix(self.m + block.gram(), self.prior_lambda)

    def eigenvalues(self):
        """Eigenvalues in descending order via the package's Jacobi solver."""
        return symmetric_eigenvalues(self.m)


def symmetric_eigenvalues(a, tol=1e-12, max_sweeps=30):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps row-cyclically over the strict upper triangle, zeroing one
    off-diagonal entry per rotation, until the off-diagonal Frobenius norm
    drops below ``tol`` or ``max_sweeps`` sweeps have run (Jacobi converges
    quadratically, so the cap is generous). Returns eigenvalues sorted in
    descending order.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    if np.max(np.abs(a - a.T)) > 1e-12 * max(1.0, float(np.max(np.abs(a)))):
        raise ValueError("matrix must be symmetric")
    a = 0.5 * (a + a.T)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-200:
                    # Far below any convergence threshold; rotating would
                    # only risk overflow in tau.
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(tau) > 1e154:
                    # tau*tau would overflow; use the asymptotic small root.
                    t = 0.5 / tau
                elif tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rot = np.array([[c, s], [-s, c]])
                a[:, [p, q]] = a[:, [p, q]] @ rot
                a[[p, q], :] = rot.T @ a[[p, q], :]
                # Pin the rotated pair exactly; roundoff would otherwise leak.
                a[p, q] = 0.0
                a[q, p] = 0.0
    return np.sort(np.diag(a))[::-1]


def _logdet_cholesky(m):
    """log det of an SPD matrix, or -inf when factorization fails."""
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return -np.inf
    diag = np.diag(chol)
    if np.any(diag <= 0.0):
        return -np.inf
    return 2.0 * float(np.sum(np.log(diag)))


def evaluate(kind, info):
    """Evaluate one metric on an :class:`InfoMatrix`.

    MAX_LOGDET returns -inf for a singular matrix; MIN_COND returns +inf
    when the smallest eigenvalue is non-positive and is clamped to >= 1.
    """
    kind = MetricKind(kind)
    m = info.m
    if kind is MetricKind.MAX_TRACE:
        return float(np.trace(m))
    if kind is MetricKind.MAX_LOGDET:
        return _logdet_cholesky(m)
    evals = symmetric_eigenvalues(m)
    if kind is MetricKind.MAX_MIN_EIGENVALUE:
        return float(evals[-1])
    lmax, lmin = float(evals[0]), float(evals[-1])
    if lmin <= 0.0:
        return np.inf
    return max(lmax / lmin, 1.0)


def logdet_gain(info, block):
    """Increase in log det from adding one feature block.

    When the base matrix is singular the gain is +inf if the block restores
    full rank and 0 if the updated matrix is still singular.
    """
    before = _logdet_cholesky(info.m)
    after = _logdet_cholesky(info.m + block.gram())
    if np.isneginf(before):
        return 0.0 if np.isneginf(after) else np.inf
    return after - before


def hadamard_bound(diagonal):
    """Upper bound on log det of an SPD matrix from its diagonal alone.

    By Hadamard's inequality the determinant of an SPD matrix is at most the
    product of its diagonal entries, so the bound is the sum of their logs.
    """
    diagonal = np.asarray(diagonal, dtype=float)
    if np.any(diagonal <= 0.0):
        raise ValueError("diagonal entries of an SPD matrix must be positive")
    return float(np.sum(np.log(diagonal)))
