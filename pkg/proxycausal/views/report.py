"""
Console summaries of command results.
"""
from typing import Any, Dict, Optional

from rich.console import Group, RenderableType
from rich.table import Table
from rich.text import Text

from ..models.curve import EffectCurve
from ..models.persistence import curve_from_dict, graph_from_dict
from .graph import edge_tree, p_value_table


def _mean_std(entry: Dict[str, Any]) -> str:
    if entry.get("mean") is None:
        return "n/a"
    return f"{entry['mean']:.3f} ± {entry['std']:.3f}"


def curve_table(curve: EffectCurve, truth: Optional[EffectCurve] = None) -> Table:
    """
    Estimates per grid point, with the truth and absolute error when known.

    Args:
        curve: Estimated curve
        truth: Reference curve on the same grid

    Returns:
        Rich table
    """
    title = f"E[{curve.outcome} | do({','.join(curve.treated)} = a)]" if curve.treated else "Effect curve"
    table = Table(title=title)
    table.add_column("a", justify="right")
    table.add_column("estimate", justify="right")
    if truth is not None:
        table.add_column("truth", justify="right")
        table.add_column("|error|", justify="right")
    for k, point in enumerate(curve.grid):
        dose = ", ".join(f"{value:.3g}" for value in point)
        row = [dose, f"{curve.estimates[k]:.4f}"]
        if truth is not None:
            row += [f"{truth.estimates[k]:.4f}", f"{abs(curve.estimates[k] - truth.estimates[k]):.4f}"]
        table.add_row(*row)
    return table


def render_summary(summary: Dict[str, Any]) -> RenderableType:
    """Estimate or pipeline summary: proxies, curve and cMAE."""
    proxies = summary["proxies"]
    header = Text.assemble(
        ("target ", "dim"), (summary["target"], "bold"),
        ("   Z=", "dim"), proxies["z"], ("  W=", "dim"), proxies["w"],
        ("  case ", "dim"), proxies["case"],
    )
    truth = curve_from_dict(summary["truth"]) if "truth" in summary else None
    parts = [header, curve_table(curve_from_dict(summary["curve"]), truth)]
    if "cmae" in summary:
        parts.append(Text(f"cMAE {summary['cmae']:.4f}", style="bold green"))
    if "discovery" in summary:
        parts.insert(0, render_discovery(summary["discovery"]))
    return Group(*parts)


def render_discovery(document: Dict[str, Any]) -> RenderableType:
    """p-value table, edge tree and the metrics against the true graph when known."""
    graph = graph_from_dict(document["graph"])
    parts = [p_value_table(graph), edge_tree(graph)]
    metrics = document.get("metrics")
    if metrics:
        parts.append(Text(
            f"precision {metrics['precision']:.3f}  recall {metrics['recall']:.3f}  F1 {metrics['f1']:.3f}"))
    for warning in document["graph"].get("warnings", ()):
        parts.append(Text(warning, style="yellow"))
    return Group(*parts)


def _discovery_row(table: Table, label: str, study: Dict[str, Any]):
    table.add_row(label, _mean_std(study["precision"]), _mean_std(study["recall"]), _mean_std(study["f1"]))


def render_benchmark(report: Dict[str, Any]) -> RenderableType:
    """Tables for whichever study the report holds."""
    study = report["study"]
    if study == "table":
        table = Table(title=f"cMAE over {len(report['seeds'])} replicates")
        table.add_column("target")
        table.add_column("cMAE", justify="right")
        table.add_column("failures", justify="right")
        for target, entry in report["targets"].items():
            table.add_row(target, _mean_std(entry), str(entry["failures"]))
        return table

    if study in ("discovery", "bins"):
        table = Table(title="Discovery against the true graph")
        for column in ("bins", "precision", "recall", "F1"):
            table.add_column(column, justify="right")
        studies = [report["discovery"]] if study == "discovery" else report["bin_sweep"]
        for entry in studies:
            _discovery_row(table, "/".join(str(b) for b in entry["bins"]), entry)
        return table

    if study == "noise":
        table = Table(title="Calibration of the edge test per noise law")
        for column in ("scenario", "type I", "type II"):
            table.add_column(column, justify="right")
        for entry in report["noise"]:
            table.add_row(entry["scenario"], f"{entry['type_I']:.3f}", f"{entry['type_II']:.3f}")
        return table

    calibration = report["calibration"]
    table = Table(title=f"Calibration of the edge test, {calibration['scenario']}")
    table.add_column("error")
    table.add_column("rate", justify="right")
    table.add_row("type I (independent)", f"{calibration['type_I']:.3f}")
    table.add_row("type II (causal)", f"{calibration['type_II']:.3f}")
    return table


def render_simulation(sidecar: Dict[str, Any]) -> RenderableType:
    return Text(f"{sidecar['n']} samples of {sidecar['scenario']} (seed {sidecar['seed']}): "
                f"{', '.join(sidecar['columns'])}")
