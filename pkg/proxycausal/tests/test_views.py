"""
Unit tests for graph, curve and report renderings.
"""
import io
import os
import shutil
import tempfile
import unittest

import numpy as np
import pandas as pd
from rich.console import Console

from proxycausal.models.curve import EffectCurve
from proxycausal.models.persistence import curve_to_dict, graph_to_dict, proxies_to_dict
from proxycausal.models.scm import synthetic_main
from proxycausal.utils.discovery import BipartiteGraph, ProxyAssignment, truth_graph
from proxycausal.views.curve import curve_frame, curve_svg, write_curve_csv
from proxycausal.views.graph import edge_tree, p_value_table, to_dot
from proxycausal.views.report import render_benchmark, render_discovery, render_summary


def rendered(renderable) -> str:
    console = Console(file=io.StringIO(), width=120, color_system=None)
    console.print(renderable)
    return console.file.getvalue()


class TestGraphViews(unittest.TestCase):
    """Test case for graph renderings."""

    def setUp(self):
        """Set up test fixtures."""
        self.graph = truth_graph(synthetic_main())

    def test_dot_lists_every_edge(self):
        dot = to_dot(self.graph)
        self.assertTrue(dot.startswith('digraph "discovered" {'))
        self.assertTrue(dot.endswith("}\n"))
        self.assertEqual(dot.count(" -> "), len(self.graph.edges()))
        self.assertIn('"A3" -> "Y3"', dot)
        self.assertNotIn('"A3" -> "Y2"', dot)

    def test_p_value_table(self):
        graph = BipartiteGraph(("A1", "A2"), ("Y1",), [[True], [False]], [[0.001], [0.5]],
                               flagged=(("A1", "Y1"),))
        text = rendered(p_value_table(graph))
        self.assertIn("0.001 !", text)
        self.assertIn("0.5", text)

    def test_edge_tree(self):
        text = rendered(edge_tree(self.graph))
        self.assertIn("A4", text)
        self.assertEqual(text.count("Y1"), 5)


class TestCurveViews(unittest.TestCase):
    """Test case for curve exports."""

    def setUp(self):
        """Set up test fixtures."""
        self.test_dir = tempfile.mkdtemp()
        self.curve = EffectCurve([0.0, 0.5, 1.0], [0.1, 0.6, 1.2], n_used=50, treated=("A3",), outcome="Y1")
        self.truth = EffectCurve([0.0, 0.5, 1.0], [0.0, 0.5, 1.0], treated=("A3",), outcome="Y1")

    def tearDown(self):
        """Tear down test fixtures."""
        shutil.rmtree(self.test_dir)

    def test_frame_columns(self):
        self.assertEqual(list(curve_frame(self.curve).columns), ["a", "estimate"])
        self.assertEqual(list(curve_frame(self.curve, self.truth).columns), ["a", "estimate", "truth"])
        multi = EffectCurve([[0.0, 0.0], [1.0, 1.0]], [0.0, 2.0], treated=("A1", "A3"), outcome="Y1")
        self.assertEqual(list(curve_frame(multi).columns), ["A1", "A3", "estimate"])

    def test_csv_is_exact(self):
        curve = EffectCurve([0.0, 1.0 / 3.0], [np.pi, -1e-17])
        path = write_curve_csv(curve, os.path.join(self.test_dir, "curve.csv"))
        frame = pd.read_csv(path, float_precision="round_trip")
        np.testing.assert_array_equal(frame["estimate"].to_numpy(), curve.estimates)
        np.testing.assert_array_equal(frame["a"].to_numpy(), curve.doses)

    def test_svg_is_deterministic(self):
        first = curve_svg(self.curve, self.truth)
        second = curve_svg(self.curve, self.truth)
        self.assertTrue(first.lstrip().startswith("<?xml"))
        self.assertIn("</svg>", first)
        self.assertEqual(first, second)


class TestReports(unittest.TestCase):
    """Test case for console summaries."""

    def test_summary(self):
        curve = EffectCurve([0.0, 1.0], [0.2, 1.9], treated=("A3",), outcome="Y1")
        truth = EffectCurve([0.0, 1.0], [0.0, 2.0], treated=("A3",), outcome="Y1")
        summary = {
            "target": "A3->Y1",
            "proxies": proxies_to_dict(ProxyAssignment(("A3",), "Y1", "Y3", "A5", "oracle")),
            "curve": curve_to_dict(curve),
            "truth": curve_to_dict(truth),
            "cmae": 0.15,
        }
        text = rendered(render_summary(summary))
        self.assertIn("A3->Y1", text)
        self.assertIn("Z=Y3", text)
        self.assertIn("cMAE 0.1500", text)
        self.assertIn("0.2000", text)

    def test_discovery(self):
        document = {"graph": graph_to_dict(truth_graph(synthetic_main())),
                    "metrics": {"precision": 1.0, "recall": 0.5, "f1": 2 / 3}}
        text = rendered(render_discovery(document))
        self.assertIn("F1 0.667", text)
        self.assertIn("graph", text)
        self.assertIn("└──", text)

    def test_benchmark_tables(self):
        table = {"study": "table", "seeds": [1, 2],
                 "targets": {"A3->Y1": {"mean": 0.3, "std": 0.1, "failures": 0}}}
        self.assertIn("0.300 ± 0.100", rendered(render_benchmark(table)))

        entry = {"bins": [15, 8, 5], "precision": {"mean": 0.9, "std": 0.0},
                 "recall": {"mean": 0.7, "std": 0.0}, "f1": {"mean": None, "std": None}}
        text = rendered(render_benchmark({"study": "discovery", "seeds": [1], "discovery": entry}))
        self.assertIn("15/8/5", text)
        self.assertIn("n/a", text)

        calibration = {"study": "calibration", "seeds": [1],
                       "calibration": {"scenario": "proxy-strength(10,linear)", "type_I": 0.04, "type_II": 0.02}}
        self.assertIn("0.040", rendered(render_benchmark(calibration)))

        noise = {"study": "noise", "seeds": [1], "noise": [
            {"scenario": "noise-robustness(10,uniform)", "type_I": 0.06, "type_II": 0.0},
            {"scenario": "noise-robustness(10,beta)", "type_I": 0.05, "type_II": 0.125}]}
        text = rendered(render_benchmark(noise))
        self.assertIn("noise-robustness(10,beta)", text)
        self.assertIn("0.125", text)


if __name__ == "__main__":
    unittest.main()
