"""
Structural causal models for proxycausal.

A ScmSpec is a declarative list of nodes (confounders, treatments, outcomes),
each with a noise law and a structural function written as a sum of terms.
Specs are sampled observationally or under do-interventions.

Random numbers come from numpy's Philox 4x64 counter-based generator. The
stream of node k for a draw is keyed by SeedSequence(seed, spawn_key=(stream,
[grid point,] k)); sample i uses the i-th 64-bit output of that stream, turned
into a uniform on (0, 1) and, for normal noise, mapped through the inverse
normal CDF (scipy.special.ndtri). Every variate therefore depends only on
(seed, node index, sample index).
"""
import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from ..errors import DimensionError, ScmError, UnknownScenarioError
from .curve import EffectCurve, as_grid
from .dataset import LATENT, OUTCOME, TREATMENT, Dataset

logger = logging.getLogger(__name__)

CONFOUNDER = LATENT

FUNCTIONS = {
    "linear": lambda x: x,
    "tanh": np.tanh,
    "sin": np.sin,
    "cos": np.cos,
    "sigmoid": special.expit,
    "square": np.square,
    "cube": lambda x: x ** 3,
    "exp-neg": lambda x: np.exp(-x),
    "product-composite": lambda x: x,
}

NOISE_KINDS = ("uniform", "normal", "beta", "exponential")

# Link families the synthetic treatments draw from.
TREATMENT_LINKS = ("linear", "tanh", "sin", "cos", "sigmoid")

SAMPLE_STREAM = 0
INTERVENTION_STREAM = 1
MAX_SEED = 2 ** 64


@dataclass(frozen=True)
class Noise:
    """
    Exogenous noise law: uniform(lo, hi), normal(mu, sigma), beta(a, b) or
    exponential(rate).

    Draws come from inverse CDFs applied to counter-based uniforms, so every
    law consumes the same stream.
    """
    kind: str
    a: float
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ScmError(f"unknown noise kind {self.kind!r}")
        if self.kind == "uniform" and not self.a <= self.b:
            raise ScmError("uniform noise needs lo <= hi")
        if self.kind == "normal" and self.b < 0:
            raise ScmError("normal noise needs sigma >= 0")
        if self.kind == "beta" and not (self.a > 0 and self.b > 0):
            raise ScmError("beta noise needs positive shapes")
        if self.kind == "exponential" and not self.a > 0:
            raise ScmError("exponential noise needs a positive rate")

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "Noise":
        return cls("uniform", float(lo), float(hi))

    @classmethod
    def normal(cls, mu: float = 0.0, sigma: float = 1.0) -> "Noise":
        return cls("normal", float(mu), float(sigma))

    @classmethod
    def beta(cls, a: float, b: float) -> "Noise":
        return cls("beta", float(a), float(b))

    @classmethod
    def exponential(cls, rate: float = 1.0) -> "Noise":
        return cls("exponential", float(rate), 0.0)

    def transform(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms on (0, 1) to draws from this law."""
        if self.kind == "uniform":
            return self.a + (self.b - self.a) * u
        if self.kind == "beta":
            return special.betaincinv(self.a, self.b, u)
        if self.kind == "exponential":
            return -special.log1p(-u) / self.a
        return self.a + self.b * special.ndtri(u)

    @property
    def mean(self) -> float:
        if self.kind == "uniform":
            return 0.5 * (self.a + self.b)
        if self.kind == "beta":
            return self.a / (self.a + self.b)
        if self.kind == "exponential":
            return 1.0 / self.a
        return self.a


@dataclass(frozen=True)
class Term:
    """
    One additive term: coefficient * f(scale * x + shift).

    x is the sum of the inner terms when present, the product of the
    arguments for product-composite, and the single argument otherwise.
    """
    coefficient: float
    function: str
    arguments: Tuple[str, ...] = ()
    scale: float = 1.0
    shift: float = 0.0
    inner: Tuple["Term", ...] = ()

    def __post_init__(self):
        if self.function not in FUNCTIONS:
            raise ScmError(f"unknown link function {self.function!r}")
        object.__setattr__(self, "arguments", tuple(self.arguments))
        object.__setattr__(self, "inner", tuple(self.inner))
        if self.inner and self.arguments:
            raise ScmError("a term takes either arguments or inner terms, not both")
        if not self.inner:
            if not self.arguments:
                raise ScmError(f"{self.function} term has no argument")
            if self.function != "product-composite" and len(self.arguments) != 1:
                raise ScmError(f"{self.function} term takes exactly one argument")

    def references(self) -> frozenset:
        refs = set(self.arguments)
        for term in self.inner:
            refs |= term.references()
        return frozenset(refs)

    def evaluate(self, values: Mapping[str, np.ndarray]) -> np.ndarray:
        if self.inner:
            x = sum(term.evaluate(values) for term in self.inner)
        elif self.function == "product-composite":
            x = np.prod([values[name] for name in self.arguments], axis=0)
        else:
            x = values[self.arguments[0]]
        return self.coefficient * FUNCTIONS[self.function](self.scale * x + self.shift)


@dataclass(frozen=True)
class Node:
    """A variable with its role, noise law and structural terms."""
    name: str
    role: str
    noise: Noise
    terms: Tuple[Term, ...] = ()
    intercept: float = 0.0

    def __post_init__(self):
        if self.role not in (CONFOUNDER, TREATMENT, OUTCOME):
            raise ScmError(f"node {self.name!r} has unknown role {self.role!r}")
        object.__setattr__(self, "terms", tuple(self.terms))

    def references(self) -> frozenset:
        refs = set()
        for term in self.terms:
            refs |= term.references()
        return frozenset(refs)


# Which roles a node of each role may reference.
_ALLOWED_PARENTS = {
    CONFOUNDER: (CONFOUNDER,),
    TREATMENT: (CONFOUNDER,),
    OUTCOME: (CONFOUNDER, TREATMENT),
}
_ROLE_ORDER = {CONFOUNDER: 0, TREATMENT: 1, OUTCOME: 2}


@dataclass(frozen=True)
class ScmSpec:
    """Immutable structural causal model over confounders U, treatments A and outcomes Y."""
    nodes: Tuple[Node, ...]
    name: str = "custom"

    def __post_init__(self):
        nodes = tuple(self.nodes)
        object.__setattr__(self, "nodes", nodes)
        names = [node.name for node in nodes]
        if len(set(names)) != len(names):
            raise ScmError("duplicate node names")
        order = [_ROLE_ORDER[node.role] for node in nodes]
        if order != sorted(order):
            raise ScmError("nodes must be listed confounders first, then treatments, then outcomes")

        seen: Dict[str, str] = {}
        for node in nodes:
            for ref in node.references():
                if ref == node.name:
                    raise ScmError(f"node {node.name!r} references itself")
                if ref not in seen:
                    if ref in names:
                        raise ScmError(f"{node.name!r} references {ref!r} out of order (cycle)")
                    raise ScmError(f"{node.name!r} references unknown node {ref!r}")
                if seen[ref] not in _ALLOWED_PARENTS[node.role]:
                    raise ScmError(
                        f"edge {ref}->{node.name} is not allowed ({seen[ref]} -> {node.role})")
            seen[node.name] = node.role

    def node(self, name: str) -> Node:
        for node in self.nodes:
            if node.name == name:
                return node
        raise ScmError(f"no node named {name!r}")

    def index(self, name: str) -> int:
        for k, node in enumerate(self.nodes):
            if node.name == name:
                return k
        raise ScmError(f"no node named {name!r}")

    def names_with_role(self, role: str) -> List[str]:
        return [node.name for node in self.nodes if node.role == role]

    @property
    def confounders(self) -> List[str]:
        return self.names_with_role(CONFOUNDER)

    @property
    def treatments(self) -> List[str]:
        return self.names_with_role(TREATMENT)

    @property
    def outcomes(self) -> List[str]:
        return self.names_with_role(OUTCOME)


def truth_adjacency(spec: ScmSpec) -> np.ndarray:
    """
    Treatment-by-outcome adjacency implied by the structural terms.

    An edge A_i -> Y_j exists when some term of Y_j with a nonzero
    coefficient references A_i (directly or through inner terms).
    """
    treatments = spec.treatments
    outcomes = spec.outcomes
    adjacency = np.zeros((len(treatments), len(outcomes)), dtype=bool)

    def active_refs(term: Term) -> set:
        if term.coefficient == 0:
            return set()
        if not term.inner:
            return set(term.arguments)
        refs = set()
        for inner in term.inner:
            refs |= active_refs(inner)
        return refs

    for j, name in enumerate(outcomes):
        refs = set()
        for term in spec.node(name).terms:
            refs |= active_refs(term)
        for i, treatment in enumerate(treatments):
            adjacency[i, j] = treatment in refs
    return adjacency


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < MAX_SEED:
        raise ScmError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def node_uniforms(seed: int, key: Tuple[int, ...], count: int) -> np.ndarray:
    """
    Uniform variates on the open interval (0, 1) for one substream.

    Args:
        seed: Run seed
        key: Substream key, e.g. (stream, node index)
        count: Number of variates; variate i is the i-th output of the stream

    Returns:
        Array of `count` floats strictly between 0 and 1
    """
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))
    raw = np.random.Philox(sequence).random_raw(count) >> np.uint64(11)
    return (raw.astype(np.float64) + 0.5) * 2.0 ** -53


def _propagate(spec: ScmSpec, n: int, seed: int, key: Tuple[int, ...],
               forced: Optional[Mapping[str, float]] = None) -> Dict[str, np.ndarray]:
    forced = forced or {}
    values: Dict[str, np.ndarray] = {}
    for k, node in enumerate(spec.nodes):
        if node.name in forced:
            values[node.name] = np.full(n, float(forced[node.name]))
            continue
        total = node.noise.transform(node_uniforms(seed, key + (k,), n)) + node.intercept
        for term in node.terms:
            total = total + term.evaluate(values)
        values[node.name] = total
    return values


def sample(spec: ScmSpec, n: int, seed: int) -> Dataset:
    """
    Draw n i.i.d. samples from the observational distribution.

    Args:
        spec: Model to sample
        n: Sample count, at least 1
        seed: 64-bit seed; equal (spec, n, seed) give bit-identical output

    Returns:
        Dataset holding every node; confounders carry the latent role
    """
    if n < 1:
        raise ScmError(f"sample count must be >= 1, got {n}")
    seed = _check_seed(seed)
    values = _propagate(spec, n, seed, (SAMPLE_STREAM,))
    return Dataset(
        names=tuple(node.name for node in spec.nodes),
        roles=tuple(node.role for node in spec.nodes),
        values=np.column_stack([values[node.name] for node in spec.nodes]),
    )


def intervene(spec: ScmSpec, doses: Mapping[str, float], n: int, seed: int,
              point: int = 0) -> Dict[str, np.ndarray]:
    """
    Sample all nodes under do(doses) for one grid point.

    Args:
        spec: Model to sample
        doses: Treatment name -> forced value
        n: Number of replicates
        seed: Run seed
        point: Grid point index, selects the substream

    Returns:
        Mapping node name -> sampled values
    """
    for name in doses:
        if spec.node(name).role != TREATMENT:
            raise ScmError(f"{name!r} is not a treatment")
    return _propagate(spec, n, _check_seed(seed), (INTERVENTION_STREAM, point), doses)


def ground_truth_curve(spec: ScmSpec, target: str, treated: Sequence[str], grid,
                       replicates: int = 10_000, seed: int = 0, jobs: int = 1) -> EffectCurve:
    """
    Monte Carlo E[Y_target | do(A_S = a)] on a dose grid.

    Each grid point uses its own substream, so results do not depend on
    the number of worker threads.

    Args:
        spec: Model to simulate
        target: Outcome name
        treated: Names of the intervened treatments S
        grid: Scalars or dose vectors, one per grid point
        replicates: Monte Carlo draws per grid point
        seed: Run seed
        jobs: Worker threads

    Returns:
        EffectCurve with per-point standard errors
    """
    treated = tuple(treated)
    if spec.node(target).role != OUTCOME:
        raise ScmError(f"{target!r} is not an outcome")
    for name in treated:
        if spec.node(name).role != TREATMENT:
            raise ScmError(f"{name!r} is not a treatment")
    if replicates < 1:
        raise ScmError("replicates must be >= 1")
    points = as_grid(grid, width=len(treated))

    def evaluate(k: int) -> Tuple[float, float]:
        doses = dict(zip(treated, points[k]))
        y = intervene(spec, doses, replicates, seed, point=k)[target]
        se = float(np.std(y, ddof=1) / math.sqrt(replicates)) if replicates > 1 else 0.0
        return float(np.mean(y)), se

    with ThreadPoolExecutor(max_workers=max(1, int(jobs))) as pool:
        results = list(pool.map(evaluate, range(points.shape[0])))

    logger.debug("ground truth for %s <- %s over %d points", target, treated, points.shape[0])
    return EffectCurve(
        grid=points,
        estimates=[mean for mean, _ in results],
        n_used=replicates,
        standard_errors=[se for _, se in results],
        treated=treated,
        outcome=target,
    )


# Built-in scenarios


def _linear(coefficient: float, name: str) -> Term:
    return Term(coefficient, "linear", (name,))


def _treatment_link(kind: str) -> Term:
    scale = math.pi / 8 if kind in ("sin", "cos") else 1.0
    if kind == "sigmoid":
        scale = -1.0
    return Term(0.5, kind, ("U",), scale=scale)


def synthetic_main(random_links: bool = False, link_seed: int = 0) -> ScmSpec:
    """
    Five treatments, four outcomes, one uniform confounder.

    Treatments follow A_i = 0.5 * (g_i(U) + c_i) + eps_i. The canonical
    links are linear (offset 5), tanh, sin(pi/8 U), sigmoid(-U) and
    cos(pi/8 U) (offset 3). With random_links each g_i is drawn from
    TREATMENT_LINKS using link_seed, keeping offset 3.
    """
    normal = Noise.normal(0.0, 1.0)
    nodes = [Node("U", CONFOUNDER, Noise.uniform(-1.0, 1.0))]

    if random_links:
        rng = np.random.default_rng(link_seed)
        kinds = [TREATMENT_LINKS[k] for k in rng.integers(0, len(TREATMENT_LINKS), size=5)]
        for i, kind in enumerate(kinds, start=1):
            nodes.append(Node(f"A{i}", TREATMENT, normal, (_treatment_link(kind),), intercept=1.5))
    else:
        nodes += [
            Node("A1", TREATMENT, normal, (_linear(0.5, "U"),), intercept=2.5),
            Node("A2", TREATMENT, normal, (_treatment_link("tanh"),), intercept=1.5),
            Node("A3", TREATMENT, normal, (_treatment_link("sin"),), intercept=1.5),
            Node("A4", TREATMENT, normal, (_treatment_link("sigmoid"),), intercept=1.5),
            Node("A5", TREATMENT, normal, (_treatment_link("cos"),), intercept=1.5),
        ]

    nodes += [
        Node("Y1", OUTCOME, normal, (
            Term(2.0, "sin", inner=(_linear(1.4, "A1"), Term(2.0, "square", ("A3",)))),
            _linear(0.5, "A2"),
            Term(0.5, "square", ("A4",)),
            _linear(0.5, "A5"),
            Term(1.0, "cube", ("A3",)),
            _linear(1.0, "U"),
        )),
        Node("Y2", OUTCOME, normal, (
            Term(-2.0, "cos", ("A2",), scale=1.8),
            Term(1.5, "square", ("A4",)),
            _linear(1.0, "U"),
        )),
        Node("Y3", OUTCOME, normal, (
            Term(0.7, "square", ("A3",)),
            _linear(1.2, "A4"),
            _linear(1.0, "U"),
        )),
        Node("Y4", OUTCOME, normal, (
            Term(1.6, "exp-neg", ("A1",), shift=-1.0),
            Term(2.3, "square", ("A5",)),
            _linear(1.0, "U"),
        )),
    ]
    return ScmSpec(tuple(nodes), name="synthetic-main")


def _check_choice(value: str, options: Sequence[str], what: str) -> str:
    value = str(value).strip().lower()
    if value not in options:
        raise UnknownScenarioError(f"{what} must be one of {'|'.join(options)}, got {value!r}")
    return value


def proxy_strength(beta: float, form: str = "linear", case: str = "causal") -> ScmSpec:
    """
    Single edge test with a proxy treatment W of strength beta.

    U ~ N(0,1), A = U + eps, W = beta*U + eps (linear) or beta*tanh(U) + eps
    (nonlinear), Y = A + U + eps (causal) or U + eps (independent).
    """
    form = _check_choice(form, ("linear", "nonlinear"), "form")
    case = _check_choice(case, ("causal", "independent"), "case")
    normal = Noise.normal(0.0, 1.0)
    w_link = "linear" if form == "linear" else "tanh"
    y_terms = [_linear(1.0, "U")]
    if case == "causal":
        y_terms.insert(0, _linear(1.0, "A"))
    nodes = (
        Node("U", CONFOUNDER, normal),
        Node("A", TREATMENT, normal, (_linear(1.0, "U"),)),
        Node("W", TREATMENT, normal, (Term(float(beta), w_link, ("U",)),)),
        Node("Y", OUTCOME, normal, tuple(y_terms)),
    )
    return ScmSpec(nodes, name=f"proxy-strength({beta:g},{form},{case})")


def confounding_strength(beta: float, form: str = "linear", case: str = "causal") -> ScmSpec:
    """
    Single edge test under confounding of strength beta.

    U ~ N(0,1), A = beta*U + eps, W = beta*U + eps, Y = A + W + c(U) + eps
    (causal) or W + c(U) + eps (independent), with c(U) = beta*U (linear) or
    beta*tanh(U) (nonlinear).
    """
    form = _check_choice(form, ("linear", "nonlinear"), "form")
    case = _check_choice(case, ("causal", "independent"), "case")
    normal = Noise.normal(0.0, 1.0)
    u_link = "linear" if form == "linear" else "tanh"
    y_terms = [_linear(1.0, "W"), Term(float(beta), u_link, ("U",))]
    if case == "causal":
        y_terms.insert(0, _linear(1.0, "A"))
    nodes = (
        Node("U", CONFOUNDER, normal),
        Node("A", TREATMENT, normal, (_linear(float(beta), "U"),)),
        Node("W", TREATMENT, normal, (_linear(float(beta), "U"),)),
        Node("Y", OUTCOME, normal, tuple(y_terms)),
    )
    return ScmSpec(nodes, name=f"confounding-strength({beta:g},{form},{case})")


ROBUSTNESS_NOISE = {
    "uniform": Noise.uniform(0.0, 1.0),
    "beta": Noise.beta(4.0, 4.0),
    "exponential": Noise.exponential(1.0),
    "normal": Noise.normal(0.0, 1.0),
}


def noise_robustness(beta: float, dist: str = "normal", case: str = "causal") -> ScmSpec:
    """
    proxy-strength's linear model with every noise term drawn from one law.

    U = eps, A = U + eps, W = beta*U + eps, Y = A + U + eps (causal) or
    U + eps (independent), eps ~ uniform(0,1), Beta(4,4), Exp(1) or N(0,1).
    """
    dist = _check_choice(dist, tuple(ROBUSTNESS_NOISE), "noise")
    case = _check_choice(case, ("causal", "independent"), "case")
    noise = ROBUSTNESS_NOISE[dist]
    y_terms = [_linear(1.0, "U")]
    if case == "causal":
        y_terms.insert(0, _linear(1.0, "A"))
    nodes = (
        Node("U", CONFOUNDER, noise),
        Node("A", TREATMENT, noise, (_linear(1.0, "U"),)),
        Node("W", TREATMENT, noise, (_linear(float(beta), "U"),)),
        Node("Y", OUTCOME, noise, tuple(y_terms)),
    )
    return ScmSpec(nodes, name=f"noise-robustness({beta:g},{dist},{case})")


def linear_gaussian() -> ScmSpec:
    """U ~ N(0,1); A1, A2 = U + eps; Y1 = 2*A1 + U + eps; Y2 = U + eps. E[Y1 | do(a)] = 2a."""
    normal = Noise.normal(0.0, 1.0)
    nodes = (
        Node("U", CONFOUNDER, normal),
        Node("A1", TREATMENT, normal, (_linear(1.0, "U"),)),
        Node("A2", TREATMENT, normal, (_linear(1.0, "U"),)),
        Node("Y1", OUTCOME, normal, (_linear(2.0, "A1"), _linear(1.0, "U"))),
        Node("Y2", OUTCOME, normal, (_linear(1.0, "U"),)),
    )
    return ScmSpec(nodes, name="linear-gaussian")


SCENARIOS = {
    "synthetic-main": synthetic_main,
    "proxy-strength": proxy_strength,
    "confounding-strength": confounding_strength,
    "noise-robustness": noise_robustness,
    "linear-gaussian": linear_gaussian,
}

# Scenarios parameterized by a strength beta, a second choice and a case.
STRENGTH_SCENARIOS = ("proxy-strength", "confounding-strength", "noise-robustness")

_SCENARIO_ID = re.compile(r"^\s*([a-z-]+)\s*(?:\((.*)\))?\s*$")


def parse_scenario_id(scenario_id: str) -> Tuple[str, List[str]]:
    """
    Split an id such as "proxy-strength(10,linear,independent)".

    Returns:
        Tuple of (scenario name, positional argument strings)
    """
    match = _SCENARIO_ID.match(str(scenario_id))
    if not match:
        raise UnknownScenarioError(f"malformed scenario id {scenario_id!r}")
    name, args = match.group(1), match.group(2)
    params = [part.strip() for part in args.split(",")] if args and args.strip() else []
    return name, params


def builtin_scenario(name: str, **params) -> ScmSpec:
    """
    Return a built-in scenario by id.

    Args:
        name: "synthetic-main", "linear-gaussian",
            "proxy-strength(beta, linear|nonlinear, causal|independent)" or
            "confounding-strength(beta, linear|nonlinear, causal|independent)" or
            "noise-robustness(beta, uniform|beta|exponential|normal, causal|independent)"
        **params: Keyword parameters, e.g. random_links for synthetic-main

    Returns:
        The scenario's ScmSpec
    """
    base, positional = parse_scenario_id(name)
    if base not in SCENARIOS:
        raise UnknownScenarioError(f"unknown scenario {name!r}")
    if base in STRENGTH_SCENARIOS:
        if positional:
            try:
                positional[0] = float(positional[0])
            except ValueError:
                raise UnknownScenarioError(f"beta must be a number in {name!r}") from None
        elif "beta" not in params:
            raise UnknownScenarioError(f"{base} needs a strength parameter beta")
    elif positional:
        raise UnknownScenarioError(f"{base} takes no positional parameters")
    try:
        return SCENARIOS[base](*positional, **params)
    except TypeError as e:
        raise UnknownScenarioError(f"bad parameters for {base}: {e}") from e
