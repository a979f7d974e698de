"""
Unit tests for graph discovery and proxy selection.
"""
import itertools
import unittest
from unittest import mock

import numpy as np

from proxycausal.errors import AssumptionViolation, DimensionError, PreconditionError
from proxycausal.models.dataset import Dataset
from proxycausal.models.scm import sample, synthetic_main
from proxycausal.utils.discovery import (
    MAJORITY_VOTE, VIOLATION, BipartiteGraph, certify_proxies, check_null_proxy, discover_graph,
    explicit_proxies, graph_metrics, proxy_candidates, select_proxies, truth_graph, vote_p_value,
)
from proxycausal.utils.proxytest import TestResult


def graph(treatments, outcomes, edges):
    adjacency = np.zeros((len(treatments), len(outcomes)), dtype=bool)
    for a, y in edges:
        adjacency[treatments.index(a), outcomes.index(y)] = True
    return BipartiteGraph.from_adjacency(treatments, outcomes, adjacency)


class TestProxySelection(unittest.TestCase):
    """Test the null-proxy condition and the proxy choice."""

    def setUp(self):
        """Set up test fixtures."""
        self.truth = truth_graph(synthetic_main())

    def test_truth_graph_edges(self):
        self.assertEqual(set(self.truth.edges()), {
            ("A1", "Y1"), ("A2", "Y1"), ("A3", "Y1"), ("A4", "Y1"), ("A5", "Y1"),
            ("A2", "Y2"), ("A4", "Y2"), ("A3", "Y3"), ("A4", "Y3"), ("A1", "Y4"), ("A5", "Y4"),
        })

    def test_known_target_proxies(self):
        """The selected proxies match the known-good pairs of the benchmark targets."""
        expected = {
            (("A3",), "Y1"): ("Y3", "A5"),
            (("A2",), "Y2"): ("Y3", "A5"),
            (("A1", "A3"), "Y1"): ("Y3", "A5"),
            (("A1", "A5"), "Y4"): ("Y2", "A3"),
        }
        for (treated, outcome), (z, w) in expected.items():
            proxies = select_proxies(self.truth, treated, outcome)
            self.assertEqual((proxies.z, proxies.w), (z, w), msg=f"{treated} -> {outcome}")
            self.assertEqual(proxies.case, "iii")
            self.assertTrue(certify_proxies(self.truth, treated, outcome, z, w))

    def test_empty_graph(self):
        empty = graph(["A1", "A2"], ["Y1", "Y2"], [])
        self.assertEqual(check_null_proxy(empty, ["A1"], "Y1"), "iii")
        proxies = select_proxies(empty, ["A1"], "Y1")
        self.assertEqual((proxies.z, proxies.w), ("Y2", "A2"))

    def test_complete_graph_violates(self):
        complete = graph(["A1", "A2"], ["Y1", "Y2"],
                         list(itertools.product(["A1", "A2"], ["Y1", "Y2"])))
        self.assertEqual(check_null_proxy(complete, ["A1"], "Y1"), VIOLATION)
        with self.assertRaises(AssumptionViolation) as context:
            select_proxies(complete, ["A1"], "Y1")
        self.assertEqual(context.exception.category, "assumption-violation")

    def test_two_outcome_proxies(self):
        """With every A_-S -> Y_-j edge present, two unaffected outcomes serve."""
        g = graph(["A1", "A2"], ["Y1", "Y2", "Y3"],
                  [("A1", "Y1"), ("A2", "Y1"), ("A2", "Y2"), ("A2", "Y3")])
        self.assertEqual(check_null_proxy(g, ["A1"], "Y1"), "i")
        proxies = select_proxies(g, ["A1"], "Y1")
        self.assertEqual((proxies.z, proxies.w, proxies.case), ("Y3", "Y2", "i"))

    def test_two_treatment_proxies(self):
        g = graph(["A1", "A2", "A3"], ["Y1", "Y2"],
                  [("A1", "Y1"), ("A3", "Y1"), ("A2", "Y2"), ("A3", "Y2")])
        self.assertEqual(check_null_proxy(g, ["A1"], "Y1"), "ii")
        proxies = select_proxies(g, ["A1"], "Y1")
        self.assertEqual((proxies.z, proxies.w, proxies.case), ("A2", "A3", "ii"))

    def test_certificate(self):
        g = self.truth
        self.assertFalse(certify_proxies(g, ["A3"], "Y1", "A5", "A5"))
        self.assertFalse(certify_proxies(g, ["A3"], "Y1", "A3", "A5"))
        # A4 -> Y3, so A4 cannot be the outcome-inducing proxy for an outcome Z = Y3.
        self.assertFalse(certify_proxies(g, ["A3"], "Y1", "Y3", "A4"))
        # A2 -> Y1: a treatment Z may not affect the target outcome.
        self.assertFalse(certify_proxies(g, ["A3"], "Y1", "A2", "A5"))
        # A3 -> Y3: an outcome W may not be affected by the treated set.
        self.assertFalse(certify_proxies(g, ["A3"], "Y1", "Y2", "Y3"))
        self.assertTrue(certify_proxies(g, ["A3"], "Y1", "Y2", "Y4"))

    def test_adding_edges_never_helps(self):
        """A violation stays a violation when edges are added."""
        rng = np.random.default_rng(11)
        for _ in range(200):
            I, J = int(rng.integers(2, 5)), int(rng.integers(2, 5))
            treatments = [f"A{i + 1}" for i in range(I)]
            outcomes = [f"Y{j + 1}" for j in range(J)]
            adjacency = rng.uniform(size=(I, J)) < 0.6
            g = BipartiteGraph.from_adjacency(treatments, outcomes, adjacency)
            treated = [treatments[k] for k in range(int(rng.integers(1, I)))]
            outcome = outcomes[int(rng.integers(0, J))]
            try:
                select_proxies(g, treated, outcome)
                continue
            except AssumptionViolation:
                pass
            i, j = int(rng.integers(0, I)), int(rng.integers(0, J))
            with self.assertRaises(AssumptionViolation):
                select_proxies(g.with_edge(treatments[i], outcomes[j]), treated, outcome)

    def test_bad_target(self):
        with self.assertRaises(PreconditionError):
            select_proxies(self.truth, ["A9"], "Y1")
        with self.assertRaises(PreconditionError):
            select_proxies(self.truth, ["A1"], "Y9")

    def test_explicit_proxies(self):
        columns = ("A1", "A2", "Y1", "Y2")
        proxies = explicit_proxies(["A1"], "Y1", "Y2", "A2", columns)
        self.assertEqual((proxies.z, proxies.w, proxies.case), ("Y2", "A2", "explicit"))
        with self.assertRaises(PreconditionError):
            explicit_proxies(["A1"], "Y1", "Y7", "A2", columns)
        with self.assertRaises(PreconditionError):
            explicit_proxies(["A1"], "Y1", "A1", "A2", columns)


class TestDiscovery(unittest.TestCase):
    """Test the graph discovery pipeline."""

    def setUp(self):
        """Set up test fixtures."""
        self.data = sample(synthetic_main(), 600, seed=4).observed()

    def test_alpha_extremes(self):
        everything = discover_graph(self.data, alpha=1.0)
        nothing = discover_graph(self.data, alpha=0.0)
        self.assertTrue(everything.adjacency.all())
        self.assertFalse(nothing.adjacency.any())
        self.assertEqual(everything.p_values.shape, (5, 4))

    def test_deterministic_and_thread_independent(self):
        serial = discover_graph(self.data)
        threaded = discover_graph(self.data, jobs=4)
        np.testing.assert_array_equal(serial.p_values, threaded.p_values)
        np.testing.assert_array_equal(serial.adjacency, threaded.adjacency)

    def test_majority_vote(self):
        voted = discover_graph(self.data, proxy_rule=MAJORITY_VOTE)
        self.assertTrue(np.all((voted.p_values >= 0) & (voted.p_values <= 1)))
        np.testing.assert_array_equal(voted.adjacency, voted.p_values < voted.alpha)
        self.assertEqual(len(voted.tests), 5 * 4 * 4)
        self.assertEqual(proxy_candidates(self.data.treatments, "A2", MAJORITY_VOTE),
                         ["A1", "A3", "A4", "A5"])
        self.assertEqual(proxy_candidates(self.data.treatments, "A1", "smallest-index"), ["A2"])

    def test_vote_p_value(self):
        self.assertEqual(vote_p_value([0.9, 0.001, 0.06, 0.01]), 0.06)
        self.assertEqual(vote_p_value([0.01, 0.9, 0.02]), 0.02)
        self.assertEqual(vote_p_value([0.3]), 0.3)
        with self.assertRaises(PreconditionError):
            vote_p_value([])

    def test_reported_p_value_agrees_with_vote(self):
        p_values = {"A1": 0.001, "A2": 0.01, "A3": 0.06, "A4": 0.9, "A5": 0.02}

        def fake_edge(dataset, i, j, proxy, bins, alpha, strategy):
            p = p_values[proxy]
            return TestResult(statistic=1.0, dof=1, p_value=p, reject=p < alpha, alpha=alpha,
                              i=i, j=j, proxy=proxy)

        with mock.patch("proxycausal.utils.discovery.test_edge", side_effect=fake_edge):
            voted = discover_graph(self.data, proxy_rule=MAJORITY_VOTE)
        np.testing.assert_array_equal(voted.adjacency, voted.p_values < voted.alpha)
        # A1 sees 0.01, 0.02, 0.06, 0.9: only two of four reject
        self.assertFalse(voted.adjacency[0].any())
        self.assertEqual(voted.p_values[0, 0], 0.06)
        # A4 sees 0.001, 0.01, 0.02, 0.06: three of four reject
        self.assertTrue(voted.adjacency[3].all())
        self.assertEqual(voted.p_values[3, 0], 0.02)

    def test_graph_keeps_edge_tests(self):
        found = discover_graph(self.data)
        self.assertEqual(len(found.tests), 5 * 4)
        first = found.tests[0]
        self.assertEqual((first.i, first.proxy), ("A1", "A2"))
        self.assertIn(first.j, self.data.outcomes)

    def test_aborted_test_becomes_edge(self):
        rng = np.random.default_rng(0)
        values = np.column_stack([rng.normal(size=200), rng.normal(size=200),
                                  rng.integers(0, 2, size=200)])
        data = Dataset(("A1", "A2", "Y1"), ("a", "a", "y"), values)
        with self.assertLogs("proxycausal.utils.discovery", level="WARNING"):
            result = discover_graph(data, bins=(6, 3, 5))
        self.assertTrue(result.adjacency.all())
        self.assertEqual(len(result.warnings), 2)
        self.assertIn(("A1", "Y1"), result.flagged)

    def test_needs_two_treatments(self):
        data = Dataset(("A1", "Y1"), ("a", "y"), np.random.default_rng(1).normal(size=(50, 2)))
        with self.assertRaises(PreconditionError):
            discover_graph(data)

    def test_graph_metrics(self):
        truth = graph(["A1", "A2"], ["Y1", "Y2"], [("A1", "Y1"), ("A2", "Y1"), ("A2", "Y2")])
        estimate = graph(["A1", "A2"], ["Y1", "Y2"], [("A1", "Y1"), ("A1", "Y2"), ("A2", "Y2")])
        precision, recall, f1 = graph_metrics(estimate, truth)
        self.assertAlmostEqual(precision, 2 / 3)
        self.assertAlmostEqual(recall, 2 / 3)
        self.assertAlmostEqual(f1, 2 / 3)
        self.assertEqual(graph_metrics(graph(["A1", "A2"], ["Y1", "Y2"], []), truth), (0.0, 0.0, 0.0))
        with self.assertRaises(DimensionError):
            graph_metrics(graph(["A1"], ["Y1"], []), truth)


if __name__ == "__main__":
    unittest.main()
