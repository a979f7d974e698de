"""
Binning of continuous columns into labeled categories.

Bins are right-closed intervals (e_k, e_k+1]; the bottom bin also holds the
minimum. Quantile edges are inverted-CDF order statistics, so B bins over
distinct values get counts that differ by at most one.
"""
from dataclasses import dataclass

import numpy as np

from ..errors import DiscretizationError

STRATEGIES = ("quantile", "uniform")


@dataclass(frozen=True)
class BinningSpec:
    """How to cut a column: strategy and number of bins."""
    strategy: str = "quantile"
    bins: int = 2

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise DiscretizationError(f"unknown binning strategy {self.strategy!r}", "config-error")
        if int(self.bins) < 2:
            raise DiscretizationError(f"need at least 2 bins, got {self.bins}", "config-error")


@dataclass(frozen=True, eq=False)
class BinnedColumn:
    """Per-sample labels in [0, B) with the cut points that produced them."""
    labels: np.ndarray
    edges: np.ndarray  # B + 1 strictly increasing cut points
    counts: np.ndarray

    @property
    def bins(self) -> int:
        return self.edges.shape[0] - 1

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    def transform(self, column) -> np.ndarray:
        """Label new values with these edges, clamping out-of-range values to the end bins."""
        return assign_labels(_finite(column), self.edges)


def _finite(column) -> np.ndarray:
    values = np.asarray(column, dtype=float).reshape(-1)
    if not np.all(np.isfinite(values)):
        raise DiscretizationError("column contains NaN or infinite values", "non-finite-input")
    return values


def assign_labels(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Label of each value: the number of interior edges strictly below it."""
    return np.searchsorted(edges[1:-1], values, side="left").astype(np.int64)


def quantile_edges(values: np.ndarray, bins: int) -> np.ndarray:
    """Minimum, the inverted-CDF k/B quantiles for k = 1..B-1, and maximum."""
    probabilities = np.arange(1, bins) / bins
    interior = np.quantile(values, probabilities, method="inverted_cdf")
    return np.concatenate(([values.min()], interior, [values.max()]))


def uniform_edges(values: np.ndarray, bins: int) -> np.ndarray:
    return np.linspace(values.min(), values.max(), bins + 1)


def discretize(column, spec: BinningSpec) -> BinnedColumn:
    """
    Bin a real column.

    Args:
        column: Real values
        spec: Strategy and bin count

    Returns:
        BinnedColumn with labels, edges and per-bin counts
    """
    values = _finite(column)
    bins = int(spec.bins)
    if values.shape[0] < bins:
        raise DiscretizationError(f"{values.shape[0]} values cannot fill {bins} bins")
    if spec.strategy == "quantile" and np.unique(values).shape[0] < bins:
        raise DiscretizationError(f"fewer than {bins} distinct values")

    if spec.strategy == "quantile":
        edges = quantile_edges(values, bins)
    else:
        edges = uniform_edges(values, bins)
    if np.any(np.diff(edges) <= 0):
        raise DiscretizationError(f"ties leave fewer than {bins} distinct quantile edges")

    labels = assign_labels(values, edges)
    counts = np.bincount(labels, minlength=bins)
    labels.setflags(write=False)
    edges.setflags(write=False)
    counts.setflags(write=False)
    return BinnedColumn(labels=labels, edges=edges, counts=counts)


def from_labels(labels, bins: int) -> BinnedColumn:
    """Wrap precomputed integer labels in [0, bins) as a BinnedColumn with unit-spaced edges."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.size and (labels.min() < 0 or labels.max() >= bins):
        raise DiscretizationError(f"labels must lie in [0, {bins})", "dimension-mismatch")
    return BinnedColumn(
        labels=labels,
        edges=np.arange(bins + 1, dtype=float) - 0.5,
        counts=np.bincount(labels, minlength=bins),
    )
