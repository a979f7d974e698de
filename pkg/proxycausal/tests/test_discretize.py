"""
Unit tests for the discretize module.
"""
import unittest

import numpy as np

from proxycausal.errors import DiscretizationError
from proxycausal.utils.discretize import BinningSpec, discretize, from_labels


class TestDiscretize(unittest.TestCase):
    """Test case for binning continuous columns."""

    def setUp(self):
        """Set up test fixtures."""
        self.rng = np.random.default_rng(0)

    def test_balanced_quantiles(self):
        binned = discretize(np.arange(100), BinningSpec("quantile", 4))
        np.testing.assert_array_equal(binned.counts, [25, 25, 25, 25])
        self.assertEqual(binned.bins, 4)
        self.assertEqual(binned.n, 100)

    def test_large_uniform_column(self):
        binned = discretize(self.rng.uniform(size=15000), BinningSpec("quantile", 15))
        np.testing.assert_array_equal(binned.counts, np.full(15, 1000))

    def test_balance_with_remainder(self):
        binned = discretize(self.rng.normal(size=1003), BinningSpec("quantile", 7))
        self.assertLessEqual(binned.counts.max() - binned.counts.min(), 1)
        self.assertEqual(binned.counts.sum(), 1003)

    def test_too_few_distinct_values(self):
        with self.assertRaises(DiscretizationError) as context:
            discretize([0, 0, 0, 1], BinningSpec("quantile", 4))
        self.assertEqual(context.exception.category, "too-few-distinct-values")

    def test_ties_collapse_edges(self):
        """Enough distinct values but heavy ties still leave duplicate edges."""
        values = np.concatenate([np.zeros(90), np.arange(1, 11)])
        with self.assertRaises(DiscretizationError):
            discretize(values, BinningSpec("quantile", 4))

    def test_non_finite_input(self):
        with self.assertRaises(DiscretizationError) as context:
            discretize([0.0, np.nan, 1.0], BinningSpec("quantile", 2))
        self.assertEqual(context.exception.category, "non-finite-input")

    def test_too_short(self):
        with self.assertRaises(DiscretizationError):
            discretize([0.0, 1.0], BinningSpec("quantile", 3))

    def test_bad_spec(self):
        with self.assertRaises(DiscretizationError):
            BinningSpec("quantile", 1)
        with self.assertRaises(DiscretizationError):
            BinningSpec("entropy", 4)

    def test_values_inside_their_bins(self):
        values = self.rng.exponential(size=500)
        binned = discretize(values, BinningSpec("quantile", 8))
        self.assertTrue(np.all(np.diff(binned.edges) > 0))
        self.assertTrue(np.all(values >= binned.edges[binned.labels]))
        self.assertTrue(np.all(values <= binned.edges[binned.labels + 1]))

    def test_monotone_labels(self):
        values = self.rng.normal(size=300)
        binned = discretize(values, BinningSpec("quantile", 6))
        order = np.argsort(values)
        self.assertTrue(np.all(np.diff(binned.labels[order]) >= 0))

    def test_midpoints_reproduce_labels(self):
        binned = discretize(self.rng.normal(size=300), BinningSpec("quantile", 6))
        midpoints = 0.5 * (binned.edges[:-1] + binned.edges[1:])
        np.testing.assert_array_equal(binned.transform(midpoints), np.arange(6))

    def test_transform_clamps(self):
        binned = discretize(np.arange(10.0), BinningSpec("quantile", 5))
        np.testing.assert_array_equal(binned.transform([-100.0, 100.0]), [0, 4])

    def test_uniform_strategy(self):
        binned = discretize(np.arange(10.0), BinningSpec("uniform", 2))
        np.testing.assert_allclose(binned.edges, [0.0, 4.5, 9.0])
        np.testing.assert_array_equal(binned.counts, [5, 5])

    def test_uniform_constant_column(self):
        with self.assertRaises(DiscretizationError):
            discretize(np.ones(10), BinningSpec("uniform", 2))

    def test_from_labels(self):
        binned = from_labels([0, 2, 2, 1], 3)
        np.testing.assert_array_equal(binned.counts, [1, 1, 2])
        with self.assertRaises(DiscretizationError):
            from_labels([0, 3], 3)


if __name__ == "__main__":
    unittest.main()
