"""
Renderings of a discovered treatment -> outcome graph.
DOT text for external tools, rich renderables for the console.
"""
from pathlib import Path
from typing import Union

from rich.table import Table
from rich.text import Text
from rich.tree import Tree

from ..utils.discovery import BipartiteGraph


def to_dot(graph: BipartiteGraph, name: str = "discovered") -> str:
    """
    Graphviz digraph with treatments on one rank and outcomes on the other.

    Args:
        graph: Discovered graph
        name: Graph identifier

    Returns:
        DOT source text ending with a newline
    """
    lines = [f'digraph "{name}" {{', "  rankdir=LR;"]
    lines.append("  { rank=same; " + " ".join(f'"{a}";' for a in graph.treatments) + " }")
    lines.append("  { rank=same; " + " ".join(f'"{y}";' for y in graph.outcomes) + " }")
    for a, y in graph.edges():
        i, j = graph.treatments.index(a), graph.outcomes.index(y)
        lines.append(f'  "{a}" -> "{y}" [label="p={graph.p_values[i, j]:.3g}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_dot(graph: BipartiteGraph, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_dot(graph))
    return path


def p_value_table(graph: BipartiteGraph) -> Table:
    """
    Treatment x outcome table of p-values, detected edges in bold red.

    Args:
        graph: Discovered graph

    Returns:
        Rich table
    """
    table = Table(title=f"Edge tests (alpha = {graph.alpha:g})")
    table.add_column("")
    for outcome in graph.outcomes:
        table.add_column(outcome, justify="right")

    for i, treatment in enumerate(graph.treatments):
        cells = []
        for j in range(graph.J):
            text = Text(f"{graph.p_values[i, j]:.3g}")
            if graph.adjacency[i, j]:
                text.stylize("bold red")
            if (treatment, graph.outcomes[j]) in graph.flagged:
                text.append(" !", style="yellow")
            cells.append(text)
        table.add_row(treatment, *cells)
    return table


def edge_tree(graph: BipartiteGraph) -> Tree:
    """Each treatment with the outcomes it points to."""
    tree = Tree("graph")
    for treatment in graph.treatments:
        children = [y for a, y in graph.edges() if a == treatment]
        branch = tree.add(Text(treatment, style="bold" if children else "dim"))
        for outcome in children:
            branch.add(Text(outcome, style="green"))
    return tree
