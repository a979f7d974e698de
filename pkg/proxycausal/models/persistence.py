"""
Persistence module for proxycausal.
Handles saving and loading JSON documents: scenario specs, edge tests,
graphs, bridge models, curves and run reports.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from ..errors import ProxyCausalError
from ..utils.bridge import BridgeModel, KernelConfig
from ..utils.discovery import BipartiteGraph, ProxyAssignment
from ..utils.proxytest import TestResult
from .curve import EffectCurve
from .scm import Node, Noise, ScmSpec, Term

logger = logging.getLogger(__name__)


def _plain(value: Any) -> Any:
    """Convert numpy scalars, arrays and tuples to JSON types."""
    if isinstance(value, dict):
        return {str(key): _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def dumps(data: Dict[str, Any]) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(_plain(data), indent=2, sort_keys=True) + "\n"


def save_json(data: Dict[str, Any], path: Union[str, Path]) -> Path:
    """
    Write a JSON document, creating parent directories.

    Args:
        data: Document; numpy values are converted
        path: Destination file

    Returns:
        Path of the written file
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', newline="\n") as f:
            f.write(dumps(data))
    except OSError as e:
        raise ProxyCausalError(f"cannot write {path}: {e}", "io-error") from e
    logger.debug("wrote %s", path)
    return path


def load_json(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a JSON document."""
    path = Path(path)
    try:
        with open(path, 'r') as f:
            return json.load(f)
    except OSError as e:
        raise ProxyCausalError(f"cannot read {path}: {e}", "io-error") from e
    except json.JSONDecodeError as e:
        raise ProxyCausalError(f"{path} is not valid JSON: {e}", "io-error") from e


# Structural models


def _term_to_dict(term: Term) -> Dict[str, Any]:
    return {
        "coefficient": term.coefficient,
        "function": term.function,
        "arguments": list(term.arguments),
        "scale": term.scale,
        "shift": term.shift,
        "inner": [_term_to_dict(inner) for inner in term.inner],
    }


def _term_from_dict(data: Dict[str, Any]) -> Term:
    return Term(
        coefficient=float(data["coefficient"]),
        function=data["function"],
        arguments=tuple(data.get("arguments", ())),
        scale=float(data.get("scale", 1.0)),
        shift=float(data.get("shift", 0.0)),
        inner=tuple(_term_from_dict(inner) for inner in data.get("inner", ())),
    )


def spec_to_dict(spec: ScmSpec) -> Dict[str, Any]:
    return {
        "name": spec.name,
        "nodes": [
            {
                "name": node.name,
                "role": node.role,
                "noise": {"kind": node.noise.kind, "a": node.noise.a, "b": node.noise.b},
                "terms": [_term_to_dict(term) for term in node.terms],
                "intercept": node.intercept,
            }
            for node in spec.nodes
        ],
    }


def spec_from_dict(data: Dict[str, Any]) -> ScmSpec:
    nodes = tuple(
        Node(
            name=node["name"],
            role=node["role"],
            noise=Noise(node["noise"]["kind"], float(node["noise"]["a"]), float(node["noise"]["b"])),
            terms=tuple(_term_from_dict(term) for term in node.get("terms", ())),
            intercept=float(node.get("intercept", 0.0)),
        )
        for node in data["nodes"]
    )
    return ScmSpec(nodes, name=data.get("name", "custom"))


# Discovery


def test_result_to_dict(result: TestResult) -> Dict[str, Any]:
    return {
        "i": result.i,
        "j": result.j,
        "proxy": result.proxy,
        "M": result.M,
        "N": result.N,
        "L": result.L,
        "statistic": result.statistic,
        "dof": result.dof,
        "p_value": result.p_value,
        "reject": result.reject,
        "alpha": result.alpha,
        "diagnostics": dict(result.diagnostics),
    }


def test_result_from_dict(data: Dict[str, Any]) -> TestResult:
    return TestResult(
        statistic=float(data["statistic"]),
        dof=int(data["dof"]),
        p_value=float(data["p_value"]),
        reject=bool(data["reject"]),
        alpha=float(data.get("alpha", 0.05)),
        diagnostics=dict(data.get("diagnostics", {})),
        i=data.get("i"),
        j=data.get("j"),
        proxy=data.get("proxy"),
        M=data.get("M"),
        N=data.get("N"),
        L=data.get("L"),
    )


test_result_to_dict.__test__ = False
test_result_from_dict.__test__ = False


def graph_to_dict(graph: BipartiteGraph) -> Dict[str, Any]:
    return {
        "treatments": list(graph.treatments),
        "outcomes": list(graph.outcomes),
        "adjacency": graph.adjacency.astype(int),
        "p_values": graph.p_values,
        "alpha": graph.alpha,
        "edges": [list(edge) for edge in graph.edges()],
        "warnings": list(graph.warnings),
        "flagged": [list(pair) for pair in graph.flagged],
        "tests": [test_result_to_dict(result) for result in graph.tests],
    }


def graph_from_dict(data: Dict[str, Any]) -> BipartiteGraph:
    return BipartiteGraph(
        treatments=tuple(data["treatments"]),
        outcomes=tuple(data["outcomes"]),
        adjacency=np.asarray(data["adjacency"], dtype=bool),
        p_values=np.asarray(data["p_values"], dtype=float),
        alpha=float(data.get("alpha", 0.05)),
        warnings=tuple(data.get("warnings", ())),
        flagged=tuple(tuple(pair) for pair in data.get("flagged", ())),
        tests=tuple(test_result_from_dict(result) for result in data.get("tests", ())),
    )


def proxies_to_dict(proxies: ProxyAssignment) -> Dict[str, Any]:
    return {
        "treated": list(proxies.treated),
        "outcome": proxies.outcome,
        "z": proxies.z,
        "w": proxies.w,
        "case": proxies.case,
    }


# Estimation


def bridge_to_dict(model: BridgeModel) -> Dict[str, Any]:
    return {
        "kind": model.kind,
        "treated": list(model.treated),
        "proxy": model.proxy,
        "lengthscales": list(model.lengthscales),
        "widths": list(model.widths),
        "lambda_h": model.config.lambda_h,
        "lambda_q": model.config.lambda_q,
        "anchors": model.anchors,
        "alpha": model.alpha,
    }


def bridge_from_dict(data: Dict[str, Any]) -> BridgeModel:
    return BridgeModel(
        kind=data["kind"],
        anchors=np.asarray(data["anchors"], dtype=float),
        alpha=np.asarray(data["alpha"], dtype=float),
        lengthscales=tuple(data["lengthscales"]),
        widths=tuple(data["widths"]),
        config=KernelConfig(lambda_h=data.get("lambda_h", 0.2), lambda_q=data.get("lambda_q", 0.2)),
        treated=tuple(data.get("treated", ())),
        proxy=data.get("proxy", ""),
    )


def curve_to_dict(curve: EffectCurve) -> Dict[str, Any]:
    data = {
        "treated": list(curve.treated),
        "outcome": curve.outcome,
        "grid": curve.grid,
        "estimates": curve.estimates,
        "n_used": curve.n_used,
    }
    if curve.bandwidth is not None:
        data["bandwidth"] = list(curve.bandwidth)
    if curve.standard_errors is not None:
        data["standard_errors"] = curve.standard_errors
    return data


def curve_from_dict(data: Dict[str, Any]) -> EffectCurve:
    return EffectCurve(
        grid=np.asarray(data["grid"], dtype=float),
        estimates=np.asarray(data["estimates"], dtype=float),
        n_used=int(data.get("n_used", 0)),
        bandwidth=data.get("bandwidth"),
        standard_errors=data.get("standard_errors"),
        treated=tuple(data.get("treated", ())),
        outcome=data.get("outcome", ""),
    )
