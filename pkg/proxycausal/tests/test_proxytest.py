"""
Unit tests for the proxy-based edge test.
"""
import math
import os
import unittest

import numpy as np
from scipy import integrate, stats

from proxycausal.errors import PreconditionError, TableError
from proxycausal.models.scm import builtin_scenario, sample
from proxycausal.utils.discretize import BinningSpec, discretize, from_labels
from proxycausal.utils.proxytest import (
    ProbabilityTables, build_tables, chi_square_sf, estimate_covariance, inverse_sqrt,
    projection_statistic, proxy_design, residual_projector, test_edge as run_edge_test,
)

SLOW = bool(os.environ.get("PROXYCAUSAL_SLOW"))


def chi_square_pdf(t, k):
    if t <= 0:
        return 0.0
    return math.exp((0.5 * k - 1) * math.log(t) - 0.5 * t - 0.5 * k * math.log(2) - math.lgamma(0.5 * k))


def random_tables(rng, M, N, L):
    """Tables with a random column-stochastic Q and arbitrary stacked frequencies."""
    Q = rng.dirichlet(np.ones(N), size=M).T
    q = rng.uniform(0.05, 0.3, size=M * (L - 1))
    counts = np.full(M, 50, dtype=np.int64)
    return ProbabilityTables(M=M, N=N, L=L, counts=counts, Q=Q, q=q)


def random_spd(rng, dim):
    root = rng.normal(size=(dim, dim))
    return root @ root.T + dim * np.eye(dim)


class TestChiSquare(unittest.TestCase):
    """Test the chi-square upper tail."""

    def test_matches_numeric_integration(self):
        for k in (1, 2, 5, 10, 40):
            for x in (0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0, 60.0):
                tail, _ = integrate.quad(chi_square_pdf, x, x + 400.0, args=(k,),
                                         limit=500, epsabs=1e-13, epsrel=1e-12)
                self.assertAlmostEqual(chi_square_sf(x, k), tail, delta=1e-8, msg=f"k={k}, x={x}")

    def test_zero_statistic(self):
        self.assertEqual(chi_square_sf(0.0, 3), 1.0)

    def test_preconditions(self):
        with self.assertRaises(PreconditionError):
            chi_square_sf(1.0, 0)
        with self.assertRaises(PreconditionError):
            chi_square_sf(-1.0, 2)


class TestTables(unittest.TestCase):
    """Test probability tables and the covariance estimate."""

    def setUp(self):
        """Set up test fixtures."""
        self.a = from_labels([0, 0, 1, 1, 2, 2], 3)
        self.proxy = from_labels([0, 1, 0, 0, 1, 1], 2)
        self.y = from_labels([0, 1, 1, 1, 0, 0], 2)

    def test_build_tables(self):
        tables = build_tables(self.a, self.proxy, self.y)
        np.testing.assert_array_equal(tables.counts, [2, 2, 2])
        np.testing.assert_allclose(tables.Q, [[0.5, 1.0, 0.0], [0.5, 0.0, 1.0]])
        np.testing.assert_allclose(tables.q, [0.5, 0.0, 1.0])
        np.testing.assert_allclose(tables.Q.sum(axis=0), 1.0)
        self.assertEqual(tables.n, 6)

    def test_bin_order(self):
        with self.assertRaises(TableError) as context:
            build_tables(self.proxy, self.a, self.y)
        self.assertEqual(context.exception.category, "bin-order")

    def test_empty_bin(self):
        with self.assertRaises(TableError) as context:
            build_tables(from_labels([0, 0, 1, 1, 1, 1], 3), self.proxy, self.y)
        self.assertEqual(context.exception.category, "empty-bin")

    def test_bin_underflow(self):
        tables = build_tables(self.a, self.proxy, self.y)
        with self.assertRaises(TableError) as context:
            estimate_covariance(tables, min_count=5)
        self.assertEqual(context.exception.category, "bin-underflow")

    def test_covariance_blocks(self):
        """Within a bin the block is (diag p - p p^T) n / n_m; across bins it is zero."""
        rng = np.random.default_rng(4)
        labels = np.repeat(np.arange(4), [10, 20, 30, 40])
        y = from_labels(rng.integers(0, 3, size=100), 3)
        tables = build_tables(from_labels(labels, 4), from_labels(labels % 2, 2), y)
        sigma = estimate_covariance(tables)

        p = tables.outcome_frequencies  # levels x M
        m = 1
        expected = (np.diag(p[:, m]) - np.outer(p[:, m], p[:, m])) * 100 / 20
        rows = [l * 4 + m for l in range(2)]
        np.testing.assert_allclose(sigma[np.ix_(rows, rows)], expected, atol=1e-6)
        self.assertAlmostEqual(sigma[0 * 4 + 0, 0 * 4 + 1], 0.0)
        np.testing.assert_allclose(sigma, sigma.T)
        self.assertGreater(np.linalg.eigvalsh(sigma).min(), 0.0)


class TestProjection(unittest.TestCase):
    """Test the whitened projection and the statistic."""

    def setUp(self):
        """Set up test fixtures."""
        self.rng = np.random.default_rng(2024)

    def test_projector_algebra(self):
        for _ in range(100):
            N = int(self.rng.integers(1, 5))
            M = N + int(self.rng.integers(1, 4))
            L = int(self.rng.integers(2, 5))
            tables = random_tables(self.rng, M, N, L)
            whitening = inverse_sqrt(random_spd(self.rng, M * (L - 1)))
            projector, rank = residual_projector(whitening @ proxy_design(tables))
            dim = M * (L - 1)
            self.assertEqual(rank, N * (L - 1))
            np.testing.assert_allclose(projector @ projector, projector, atol=1e-8)
            self.assertAlmostEqual(np.trace(np.eye(dim) - projector), (M - N) * (L - 1), delta=1e-8)

    def test_column_space_gives_zero(self):
        tables = random_tables(self.rng, 6, 3, 4)
        coefficients = self.rng.uniform(size=3 * 3)
        inside = ProbabilityTables(tables.M, tables.N, tables.L, tables.counts, tables.Q,
                                   proxy_design(tables) @ coefficients)
        result = projection_statistic(inside, random_spd(self.rng, 18), n=300)
        self.assertLess(result.statistic, 1e-12)
        self.assertAlmostEqual(result.p_value, 1.0, places=9)
        self.assertFalse(result.reject)
        self.assertEqual(result.dof, 9)

    def test_inverse_sqrt(self):
        sigma = random_spd(self.rng, 5)
        root = inverse_sqrt(sigma)
        np.testing.assert_allclose(root @ sigma @ root, np.eye(5), atol=1e-10)

    def test_rank_deficient_design(self):
        """A proxy whose frequencies do not vary with A_i loses degrees of freedom."""
        a = np.repeat(np.arange(4), 10)
        proxy = np.tile([0, 1], 20)
        y = np.concatenate([np.r_[np.zeros(k), np.ones(10 - k)] for k in (2, 4, 6, 8)]).astype(int)
        tables = build_tables(from_labels(a, 4), from_labels(proxy, 2), from_labels(y, 2))
        with self.assertLogs("proxycausal.utils.proxytest", level="WARNING"):
            result = projection_statistic(tables, estimate_covariance(tables), n=40)
        self.assertEqual(result.diagnostics["design_rank"], 1)
        self.assertFalse(result.diagnostics["full_rank"])
        self.assertEqual(result.dof, 3)

    def test_rank_from_singular_values(self):
        left, _ = np.linalg.qr(self.rng.normal(size=(12, 4)))
        right, _ = np.linalg.qr(self.rng.normal(size=(4, 4)))
        design = left @ np.diag([1.0, 1e-2, 1e-4, 1e-6]) @ right.T
        projector, rank = residual_projector(design)
        self.assertEqual(rank, 4)
        np.testing.assert_allclose(projector @ design, design, atol=1e-9)
        _, rank = residual_projector(left @ np.diag([1.0, 1.0, 1.0, 1e-12]) @ right.T)
        self.assertEqual(rank, 3)

    def test_covariance_scaling(self):
        tables = random_tables(self.rng, 6, 3, 4)
        sigma = random_spd(self.rng, 18)
        base = projection_statistic(tables, sigma, n=300)
        for c in (0.25, 3.0, 40.0):
            scaled = projection_statistic(tables, c * sigma, n=300)
            self.assertAlmostEqual(scaled.statistic, base.statistic / c, delta=1e-8 * base.statistic)
            self.assertEqual(scaled.dof, base.dof)


class TestEdgeTest(unittest.TestCase):
    """Test the end-to-end edge test on simulated data."""

    def setUp(self):
        """Set up test fixtures."""
        self.bins = (14, 10, 5)

    def test_detects_causal_edge(self):
        data = sample(builtin_scenario("proxy-strength(10,linear,causal)"), 1000, seed=3)
        result = run_edge_test(data, "A", "Y", "W", bins=self.bins)
        self.assertTrue(result.reject)
        self.assertEqual(result.dof, (14 - 10) * (5 - 1))
        self.assertEqual((result.i, result.j, result.proxy), ("A", "Y", "W"))
        self.assertEqual((result.M, result.N, result.L), self.bins)

    def test_keeps_independent_pair(self):
        data = sample(builtin_scenario("proxy-strength(10,linear,independent)"), 1000, seed=3)
        result = run_edge_test(data, "A", "Y", "W", bins=self.bins)
        self.assertGreater(result.p_value, 0.001)

    def test_alpha_extremes(self):
        data = sample(builtin_scenario("proxy-strength(10,linear,independent)"), 600, seed=5)
        self.assertTrue(run_edge_test(data, "A", "Y", "W", bins=(6, 3, 3), alpha=1.0).reject)
        self.assertFalse(run_edge_test(data, "A", "Y", "W", bins=(6, 3, 3), alpha=0.0).reject)

    def test_row_permutation_invariance(self):
        data = sample(builtin_scenario("proxy-strength(10,linear,causal)"), 500, seed=8)
        permuted = data.take(np.random.default_rng(1).permutation(data.n))
        first = run_edge_test(data, "A", "Y", "W", bins=(6, 3, 3))
        second = run_edge_test(permuted, "A", "Y", "W", bins=(6, 3, 3))
        self.assertAlmostEqual(first.statistic, second.statistic, places=8)

    def test_proxy_relabeling_invariance(self):
        data = sample(builtin_scenario("proxy-strength(10,linear,causal)"), 1000, seed=3)
        a = discretize(data.column("A"), BinningSpec("quantile", 14))
        proxy = discretize(data.column("W"), BinningSpec("quantile", 10))
        y = discretize(data.column("Y"), BinningSpec("quantile", 5))
        relabeled = from_labels(np.random.default_rng(6).permutation(10)[proxy.labels], 10)
        first = build_tables(a, proxy, y)
        second = build_tables(a, relabeled, y)
        sigma = estimate_covariance(first)
        self.assertAlmostEqual(projection_statistic(second, sigma, data.n).statistic,
                               projection_statistic(first, sigma, data.n).statistic, places=8)

    def test_proxy_must_differ(self):
        data = sample(builtin_scenario("proxy-strength(10,linear,causal)"), 100, seed=8)
        with self.assertRaises(PreconditionError):
            run_edge_test(data, "A", "Y", "A", bins=(6, 3, 3))
        with self.assertRaises(TableError):
            run_edge_test(data, "A", "Y", "W", bins=(3, 3, 3))


@unittest.skipUnless(SLOW, "set PROXYCAUSAL_SLOW=1 for the long calibration runs")
class TestNullCalibration(unittest.TestCase):
    """Test that null p-values are close to uniform."""

    def test_null_p_values_uniform(self):
        spec = builtin_scenario("proxy-strength(10,linear,independent)")
        p_values = [run_edge_test(sample(spec, 1000, seed=seed), "A", "Y", "W", bins=(14, 10, 5)).p_value
                    for seed in range(100)]
        self.assertLessEqual(stats.kstest(p_values, "uniform").statistic, 0.15)


if __name__ == "__main__":
    unittest.main()
