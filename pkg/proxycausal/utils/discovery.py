"""
Treatment -> outcome graph discovery and proxy selection.

Every (A_i, Y_j) pair is tested with the proxy test; the resulting
bipartite graph decides which variables may serve as the treatment-inducing
proxy Z and the outcome-inducing proxy W for a target (A_S, Y_j).
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import AssumptionViolation, DimensionError, PreconditionError, ProxyCausalError
from ..models.dataset import Dataset
from ..models.scm import ScmSpec, truth_adjacency
from .proxytest import DEFAULT_ALPHA, DEFAULT_BINS, TestResult, test_edge

logger = logging.getLogger(__name__)

SMALLEST_INDEX = "smallest-index"
MAJORITY_VOTE = "majority-vote"
PROXY_RULES = (SMALLEST_INDEX, MAJORITY_VOTE)

VIOLATION = "violation"


@dataclass(frozen=True, eq=False)
class BipartiteGraph:
    """Treatment x outcome adjacency with the p-values that produced it."""
    treatments: Tuple[str, ...]
    outcomes: Tuple[str, ...]
    adjacency: np.ndarray  # I x J booleans
    p_values: np.ndarray  # I x J
    alpha: float = DEFAULT_ALPHA
    warnings: Tuple[str, ...] = ()
    flagged: Tuple[Tuple[str, str], ...] = ()
    tests: Tuple[TestResult, ...] = ()  # every completed edge test, in pair order

    def __post_init__(self):
        adjacency = np.asarray(self.adjacency, dtype=bool)
        p_values = np.asarray(self.p_values, dtype=float)
        shape = (len(self.treatments), len(self.outcomes))
        if adjacency.shape != shape or p_values.shape != shape:
            raise DimensionError(f"adjacency/p-values must have shape {shape}")
        object.__setattr__(self, "treatments", tuple(self.treatments))
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        object.__setattr__(self, "adjacency", adjacency)
        object.__setattr__(self, "p_values", p_values)
        object.__setattr__(self, "warnings", tuple(self.warnings))
        object.__setattr__(self, "flagged", tuple(tuple(pair) for pair in self.flagged))
        object.__setattr__(self, "tests", tuple(self.tests))

    @property
    def I(self) -> int:
        return len(self.treatments)

    @property
    def J(self) -> int:
        return len(self.outcomes)

    def has_edge(self, treatment: str, outcome: str) -> bool:
        return bool(self.adjacency[self.treatments.index(treatment), self.outcomes.index(outcome)])

    def edges(self) -> List[Tuple[str, str]]:
        return [(self.treatments[i], self.outcomes[j]) for i, j in zip(*np.nonzero(self.adjacency))]

    def with_edge(self, treatment: str, outcome: str) -> "BipartiteGraph":
        adjacency = self.adjacency.copy()
        p_values = self.p_values.copy()
        i, j = self.treatments.index(treatment), self.outcomes.index(outcome)
        adjacency[i, j] = True
        p_values[i, j] = 0.0
        return BipartiteGraph(self.treatments, self.outcomes, adjacency, p_values, self.alpha)

    @classmethod
    def from_adjacency(cls, treatments: Sequence[str], outcomes: Sequence[str], adjacency,
                       alpha: float = DEFAULT_ALPHA) -> "BipartiteGraph":
        """Graph with p-values 0 on edges and 1 elsewhere."""
        adjacency = np.asarray(adjacency, dtype=bool)
        return cls(tuple(treatments), tuple(outcomes), adjacency,
                   np.where(adjacency, 0.0, 1.0), alpha)


@dataclass(frozen=True)
class ProxyAssignment:
    """Proxy roles chosen for a target (A_S, Y_j)."""
    treated: Tuple[str, ...]
    outcome: str
    z: str
    w: str
    case: str  # i | ii | iii | remark | explicit


def truth_graph(spec: ScmSpec) -> BipartiteGraph:
    """The bipartite graph implied by a structural model."""
    return BipartiteGraph.from_adjacency(spec.treatments, spec.outcomes, truth_adjacency(spec))


def proxy_candidates(treatments: Sequence[str], i: str, rule: str) -> List[str]:
    """Proxy treatments used when testing edges out of i."""
    others = [name for name in treatments if name != i]
    if rule == SMALLEST_INDEX:
        return others[:1]
    if rule == MAJORITY_VOTE:
        return others
    raise PreconditionError(f"unknown proxy rule {rule!r}")


def vote_p_value(p_values: Sequence[float]) -> float:
    """
    p-value of a strict-majority vote over proxies.

    The (k // 2 + 1)-th smallest p-value is below alpha exactly when more
    than half of the k tests reject, so one proxy gives its own p-value.
    """
    if not p_values:
        raise PreconditionError("vote needs at least one p-value")
    return float(np.sort(np.asarray(p_values, dtype=float))[len(p_values) // 2])


def _test_pair(dataset: Dataset, i: str, j: str, rule: str, bins, alpha: float,
               strategy: str) -> Tuple[float, bool, Optional[str], List[TestResult]]:
    results: List[TestResult] = []
    try:
        for proxy in proxy_candidates(dataset.treatments, i, rule):
            results.append(test_edge(dataset, i, j, proxy, bins=bins, alpha=alpha, strategy=strategy))
    except ProxyCausalError as e:
        return 0.0, True, f"test {i} -> {j} aborted ({e.category}): {e}", results

    p_value = vote_p_value([result.p_value for result in results])
    return p_value, p_value < alpha, None, results


def discover_graph(dataset: Dataset, bins: Tuple[int, int, int] = DEFAULT_BINS,
                   alpha: float = DEFAULT_ALPHA, proxy_rule: str = SMALLEST_INDEX,
                   strategy: str = "quantile", jobs: int = 1) -> BipartiteGraph:
    """
    Test every treatment -> outcome pair and assemble the bipartite graph.

    Aborted tests count as edges and are listed in the graph's warnings.

    Args:
        dataset: Samples with at least two treatments
        bins: (M, N, L) bin counts
        alpha: Significance level
        proxy_rule: smallest-index or majority-vote
        strategy: Binning strategy
        jobs: Worker threads for the edge tests

    Returns:
        BipartiteGraph over the dataset's treatments and outcomes
    """
    treatments, outcomes = dataset.treatments, dataset.outcomes
    if len(treatments) < 2:
        raise PreconditionError("discovery needs at least two treatments (one serves as proxy)")
    if not outcomes:
        raise PreconditionError("dataset has no outcome columns")
    if proxy_rule not in PROXY_RULES:
        raise PreconditionError(f"unknown proxy rule {proxy_rule!r}")

    pairs = list(product(range(len(treatments)), range(len(outcomes))))

    def run(pair):
        i, j = pair
        return _test_pair(dataset, treatments[i], outcomes[j], proxy_rule, bins, alpha, strategy)

    with ThreadPoolExecutor(max_workers=max(1, int(jobs))) as pool:
        results = list(pool.map(run, pairs))

    adjacency = np.zeros((len(treatments), len(outcomes)), dtype=bool)
    p_values = np.ones((len(treatments), len(outcomes)))
    warnings, flagged, tests = [], [], []
    for (i, j), (p_value, present, warning, completed) in zip(pairs, results):
        p_values[i, j] = p_value
        adjacency[i, j] = present
        tests.extend(completed)
        if warning:
            logger.warning(warning)
            warnings.append(warning)
            flagged.append((treatments[i], outcomes[j]))

    return BipartiteGraph(tuple(treatments), tuple(outcomes), adjacency, p_values, alpha,
                          tuple(warnings), tuple(flagged), tuple(tests))


def _split(graph: BipartiteGraph, treated: Iterable[str], outcome: str):
    treated = tuple(treated)
    for name in treated:
        if name not in graph.treatments:
            raise PreconditionError(f"{name!r} is not a treatment of the graph")
    if outcome not in graph.outcomes:
        raise PreconditionError(f"{outcome!r} is not an outcome of the graph")
    if not treated:
        raise PreconditionError("target needs at least one treated variable")
    others = [a for a in graph.treatments if a not in treated]
    other_outcomes = [y for y in graph.outcomes if y != outcome]
    return treated, others, other_outcomes


def check_null_proxy(graph: BipartiteGraph, treated: Iterable[str], outcome: str) -> str:
    """
    First branch of the null-proxy condition that holds for (A_S, Y_j).

    Returns:
        "i" when J >= 3 and some A_S -> Y_-j edge is missing, "ii" when
        |A_-S| >= 2 and some A_-S -> Y_j edge is missing, "iii" when some
        A_-S -> Y_-j edge is missing, otherwise "violation"
    """
    treated, others, other_outcomes = _split(graph, treated, outcome)
    if graph.J >= 3 and any(not graph.has_edge(a, y) for a in treated for y in other_outcomes):
        return "i"
    if len(others) >= 2 and any(not graph.has_edge(a, outcome) for a in others):
        return "ii"
    if any(not graph.has_edge(a, y) for a in others for y in other_outcomes):
        return "iii"
    return VIOLATION


def certify_proxies(graph: BipartiteGraph, treated: Iterable[str], outcome: str,
                    z: str, w: str) -> bool:
    """
    Check the graph-level conditions for (z, w) as proxies of (A_S, Y_j).

    z must be independent of Y_j and w of (z, A_S) given the confounder and
    the remaining treatments: a treatment z may not point to Y_j, a
    treatment w may not point to an outcome z, and an outcome w may receive
    no edge from A_S or from a treatment z.
    """
    treated, _, _ = _split(graph, treated, outcome)
    if z == w or {z, w} & (set(treated) | {outcome}):
        return False
    known = set(graph.treatments) | set(graph.outcomes)
    if z not in known or w not in known:
        return False
    z_is_treatment = z in graph.treatments
    w_is_treatment = w in graph.treatments

    if z_is_treatment and graph.has_edge(z, outcome):
        return False
    if w_is_treatment:
        if not z_is_treatment and graph.has_edge(w, z):
            return False
    else:
        if any(graph.has_edge(a, w) for a in treated):
            return False
        if z_is_treatment and graph.has_edge(z, w):
            return False
    return True


def _first_certified(graph, treated, outcome, pairs, case) -> Optional[ProxyAssignment]:
    for z, w in pairs:
        if certify_proxies(graph, treated, outcome, z, w):
            return ProxyAssignment(tuple(treated), outcome, z, w, case)
    return None


def select_proxies(graph: BipartiteGraph, treated: Iterable[str], outcome: str) -> ProxyAssignment:
    """
    Deterministically choose admissible proxies (Z, W) for (A_S, Y_j).

    Preference order: an outcome Z with a treatment W outside S that does
    not affect it, scanning W from the highest treatment index down and then
    Z from the highest outcome index down; two other outcomes, W being one
    not affected by A_S; two treatments outside S, Z being one that does not
    affect Y_j; finally, for a single treated variable, any certified pair
    drawn from the remaining treatments and outcomes.

    Raises:
        AssumptionViolation: when no certified pair exists
    """
    treated, others, other_outcomes = _split(graph, treated, outcome)

    branch_iii = [(y, a) for a in reversed(others) for y in reversed(other_outcomes)
                  if not graph.has_edge(a, y)]
    found = _first_certified(graph, treated, outcome, branch_iii, "iii")
    if found:
        return found

    if graph.J >= 3:
        unaffected = [y for y in other_outcomes if not any(graph.has_edge(a, y) for a in treated)]
        branch_i = [(z, w) for w in unaffected for z in other_outcomes if z != w]
        found = _first_certified(graph, treated, outcome, branch_i, "i")
        if found:
            return found

    if len(others) >= 2:
        nulls = [a for a in others if not graph.has_edge(a, outcome)]
        branch_ii = [(z, w) for z in nulls for w in others if w != z]
        found = _first_certified(graph, treated, outcome, branch_ii, "ii")
        if found:
            return found

    if len(treated) == 1:
        pool = others + other_outcomes
        found = _first_certified(graph, treated, outcome,
                                 [(z, w) for z in pool for w in pool if z != w], "remark")
        if found:
            return found

    raise AssumptionViolation(
        f"no admissible proxy pair for {'+'.join(treated)} -> {outcome}")


def explicit_proxies(treated: Iterable[str], outcome: str, z: str, w: str,
                     columns: Sequence[str]) -> ProxyAssignment:
    """Proxy roles given by the user, checked against the available columns."""
    treated = tuple(treated)
    for name in (z, w):
        if name not in columns:
            raise PreconditionError(f"proxy column {name!r} does not exist")
    if z == w or {z, w} & (set(treated) | {outcome}):
        raise PreconditionError("proxies must be distinct and outside the target")
    return ProxyAssignment(treated, outcome, z, w, "explicit")


def graph_metrics(estimated: BipartiteGraph, truth: BipartiteGraph) -> Tuple[float, float, float]:
    """
    Precision, recall and F1 of the estimated edge set.

    Undefined ratios are reported as 0.
    """
    if estimated.adjacency.shape != truth.adjacency.shape:
        raise DimensionError(
            f"graphs differ in shape: {estimated.adjacency.shape} vs {truth.adjacency.shape}")
    hits = float(np.sum(estimated.adjacency & truth.adjacency))
    predicted = float(estimated.adjacency.sum())
    actual = float(truth.adjacency.sum())
    precision = hits / predicted if predicted else 0.0
    recall = hits / actual if actual else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1
