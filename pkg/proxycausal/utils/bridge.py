"""
Kernel bridge functions for proximal estimation.

The outcome bridge h(A, W) and the treatment bridge q(A, Z) solve conditional
moment restrictions

    E[Y - h(A, W) | A, Z] = 0,    E[q(A, Z) - 1 / p(A | W) | A, W] = 0,

fitted by kernel maximum moment restriction with an RKHS penalty. With a
representer Gram K_rep and a residual Gram K_res the objective

    (1/n^2) (t - K_rep a)^T K_res (t - K_rep a) + lam * a^T K_rep a

is stationary where (K_res K_rep + n^2 lam I) a = K_res t.

Configured regularizers are per sample: a configured lambda enters the
objective as lambda / n, so the dual system carries a ridge of n * lambda.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy import linalg
from sklearn.metrics.pairwise import euclidean_distances, rbf_kernel
from sklearn.model_selection import KFold
from sklearn.neighbors import KernelDensity

from ..errors import DimensionError, PreconditionError, SolverError
from ..models.dataset import Dataset
from .discovery import ProxyAssignment

logger = logging.getLogger(__name__)

OUTCOME_BRIDGE = "outcome-h"
TREATMENT_BRIDGE = "treatment-q"

MEDIAN_SUBSAMPLE = 2000
PROPENSITY_FLOOR = 1e-3
PROPENSITY_FOLDS = 3
# Bandwidths on standardized columns tried by cross-validation.
PROPENSITY_BANDWIDTHS = np.logspace(-0.1, 0.0, 20)
DEFAULT_LAMBDA = 0.2
MIN_BRIDGE_SAMPLES = 10
MIN_PROPENSITY_SAMPLES = 30


@dataclass(frozen=True)
class KernelConfig:
    """Regularization and optional fixed lengthscales (gamma^-1) per input block."""
    lambda_h: float = DEFAULT_LAMBDA
    lambda_q: float = DEFAULT_LAMBDA
    jitter: float = 1e-9
    lengthscale_a: Optional[float] = None
    lengthscale_w: Optional[float] = None
    lengthscale_z: Optional[float] = None

    def __post_init__(self):
        if self.lambda_h <= 0 or self.lambda_q <= 0:
            raise PreconditionError("regularizers must be positive")
        for value in (self.lengthscale_a, self.lengthscale_w, self.lengthscale_z):
            if value is not None and value <= 0:
                raise PreconditionError("lengthscales must be positive")

    def update(self, **kwargs) -> "KernelConfig":
        return replace(self, **kwargs)


@dataclass(frozen=True, eq=False)
class BridgeModel:
    """Fitted dual coefficients over anchor points (treatment block, proxy block)."""
    kind: str
    anchors: np.ndarray  # n x (d + k)
    alpha: np.ndarray  # n
    lengthscales: Tuple[float, float]
    widths: Tuple[int, int]
    config: KernelConfig = field(default_factory=KernelConfig)
    treated: Tuple[str, ...] = ()
    proxy: str = ""

    def __post_init__(self):
        anchors = np.asarray(self.anchors, dtype=float)
        alpha = np.asarray(self.alpha, dtype=float).reshape(-1)
        if anchors.ndim != 2 or anchors.shape[0] != alpha.shape[0]:
            raise DimensionError(f"{alpha.shape[0]} coefficients for anchors of shape {anchors.shape}")
        if anchors.shape[1] != sum(self.widths):
            raise DimensionError(f"anchor width {anchors.shape[1]} does not match blocks {self.widths}")
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "lengthscales", tuple(float(v) for v in self.lengthscales))
        object.__setattr__(self, "widths", tuple(int(v) for v in self.widths))
        object.__setattr__(self, "treated", tuple(self.treated))

    def evaluate(self, dose, proxy_values) -> np.ndarray:
        """Bridge at the fixed dose for every row of proxy_values."""
        proxy_values = np.asarray(proxy_values, dtype=float)
        if proxy_values.ndim == 1:
            proxy_values = proxy_values.reshape(-1, self.widths[1])
        dose = np.broadcast_to(np.asarray(dose, dtype=float).reshape(1, -1),
                               (proxy_values.shape[0], self.widths[0]))
        return self.evaluate_points(np.hstack([dose, proxy_values]))

    def evaluate_points(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.anchors.shape[1]:
            raise DimensionError(f"query width {points.shape[1]}, model expects {self.anchors.shape[1]}")
        return gram(points, self.anchors, self.lengthscales, self.widths) @ self.alpha


class Bridge(Protocol):
    """Anything that evaluates h(a, .) or q(a, .) over a column of proxy values."""

    def evaluate(self, dose, proxy_values) -> np.ndarray:
        ...


@dataclass(frozen=True, eq=False)
class PropensityEstimate:
    """Per-sample conditional density p(a_i | w_i) with the chosen bandwidth."""
    values: np.ndarray
    bandwidth: float
    floored: np.ndarray  # mask of samples raised to the floor
    floor: float = PROPENSITY_FLOOR
    joint: Optional[KernelDensity] = None
    marginal: Optional[KernelDensity] = None
    centers: Tuple[np.ndarray, np.ndarray] = ()
    scales: Tuple[np.ndarray, np.ndarray] = ()

    def density(self, a, w) -> np.ndarray:
        """Floored conditional density at new (a, w) rows."""
        a = np.atleast_2d(np.asarray(a, dtype=float))
        w = np.atleast_2d(np.asarray(w, dtype=float))
        return _conditional_density(self.joint, self.marginal, a, w,
                                    self.centers, self.scales, self.floor)[0]


def median_trick(points) -> float:
    """
    Median of pairwise squared distances, the Gaussian kernel's gamma^-1.

    At most MEDIAN_SUBSAMPLE points are used, taken with a fixed stride.

    Args:
        points: n x d matrix or length-n vector

    Returns:
        Positive lengthscale
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    if points.shape[0] < 2 or np.unique(points, axis=0).shape[0] < 2:
        raise PreconditionError("median trick needs at least two distinct points")
    stride = math.ceil(points.shape[0] / MEDIAN_SUBSAMPLE)
    subset = points[::stride]
    distances = euclidean_distances(subset, squared=True)
    median = float(np.median(distances[np.triu_indices(subset.shape[0], k=1)]))
    if median <= 0:
        raise PreconditionError("median squared distance is zero")
    return median


def gram(X, Y=None, lengthscales: Sequence[float] = (1.0,), widths: Sequence[int] = None) -> np.ndarray:
    """
    Product Gaussian kernel over column blocks.

    k(x, y) = prod_b exp(-||x_b - y_b||^2 / lengthscale_b)

    Args:
        X: n x d points
        Y: m x d points, or None for X itself
        lengthscales: gamma^-1 per block
        widths: Column count per block; a single block by default

    Returns:
        n x m matrix with entries in (0, 1]
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = None if Y is None else np.atleast_2d(np.asarray(Y, dtype=float))
    widths = (X.shape[1],) if widths is None else tuple(widths)
    if len(widths) != len(lengthscales) or sum(widths) != X.shape[1]:
        raise DimensionError(f"blocks {widths} do not match {X.shape[1]} columns / {len(lengthscales)} lengthscales")
    if Y is not None and Y.shape[1] != X.shape[1]:
        raise DimensionError(f"points have {X.shape[1]} and {Y.shape[1]} columns")

    result = None
    start = 0
    for width, lengthscale in zip(widths, lengthscales):
        cols = slice(start, start + width)
        block = rbf_kernel(X[:, cols], None if Y is None else Y[:, cols], gamma=1.0 / lengthscale)
        result = block if result is None else result * block
        start += width
    return result


def pmmr_objective(coefficients, K_res, K_rep, target, lam) -> float:
    """(1/n^2) r^T K_res r + lam * a^T K_rep a with r = target - K_rep a."""
    n = K_rep.shape[0]
    residual = target - K_rep @ coefficients
    return float(residual @ K_res @ residual / n ** 2 + lam * coefficients @ K_rep @ coefficients)


def pmmr_gradient(coefficients, K_res, K_rep, target, lam) -> np.ndarray:
    n = K_rep.shape[0]
    residual = target - K_rep @ coefficients
    return -2.0 / n ** 2 * K_rep @ (K_res @ residual) + 2.0 * lam * K_rep @ coefficients


def solve_pmmr(K_res: np.ndarray, K_rep: np.ndarray, target: np.ndarray, lam: float,
               jitter: float = 1e-9) -> np.ndarray:
    """
    Dual coefficients minimizing the PMMR objective.

    Solves (K_res K_rep + n^2 lam I) a = K_res t by LU with one step of
    iterative refinement, falling back to least squares.
    """
    n = K_rep.shape[0]
    if K_res.shape != (n, n) or target.shape != (n,):
        raise DimensionError("Gram matrices and target disagree in size")
    system = K_res @ K_rep
    system[np.diag_indices(n)] += n ** 2 * lam + jitter * np.trace(system) / n
    rhs = K_res @ target

    try:
        factors = linalg.lu_factor(system, check_finite=True)
        coefficients = linalg.lu_solve(factors, rhs)
        coefficients = coefficients + linalg.lu_solve(factors, rhs - system @ coefficients)
        if not np.all(np.isfinite(coefficients)):
            raise linalg.LinAlgError("non-finite solution")
    except (linalg.LinAlgError, ValueError) as e:
        logger.warning("LU solve failed (%s); falling back to least squares", e)
        try:
            coefficients = linalg.lstsq(system, rhs)[0]
        except (linalg.LinAlgError, ValueError) as e2:
            raise SolverError(f"PMMR system could not be solved: {e2}") from e2

    residual = np.linalg.norm(system @ coefficients - rhs)
    logger.debug("PMMR solve: n=%d lam=%.3g residual %.3g", n, lam, residual)
    if not np.isfinite(residual):
        raise SolverError("PMMR system produced a non-finite solution")
    return coefficients


def penalty_weight(lam: float, n: int) -> float:
    """Objective weight of a configured regularizer at sample size n."""
    return lam / n


def _columns(dataset: Dataset, proxies: ProxyAssignment):
    A = dataset.columns(proxies.treated)
    W = dataset.columns([proxies.w])
    Z = dataset.columns([proxies.z])
    return A, W, Z


def _lengthscales(config: KernelConfig, A, W, Z) -> Tuple[float, float, float]:
    return (
        config.lengthscale_a or median_trick(A),
        config.lengthscale_w or median_trick(W),
        config.lengthscale_z or median_trick(Z),
    )


def fit_outcome_bridge(dataset: Dataset, proxies: ProxyAssignment,
                       config: KernelConfig = KernelConfig()) -> BridgeModel:
    """
    Fit h(A, W) with residual kernel on (A, Z).

    Args:
        dataset: Samples, n >= 10
        proxies: Target and proxy roles
        config: Regularization and optional lengthscales

    Returns:
        BridgeModel of kind outcome-h anchored at (a_i, w_i)
    """
    if dataset.n < MIN_BRIDGE_SAMPLES:
        raise PreconditionError(f"bridge fitting needs at least {MIN_BRIDGE_SAMPLES} samples")
    A, W, Z = _columns(dataset, proxies)
    y = dataset.column(proxies.outcome)
    l_a, l_w, l_z = _lengthscales(config, A, W, Z)
    d = A.shape[1]

    anchors = np.hstack([A, W])
    K_rep = gram(anchors, None, (l_a, l_w), (d, 1))
    K_res = gram(np.hstack([A, Z]), None, (l_a, l_z), (d, 1))
    coefficients = solve_pmmr(K_res, K_rep, y, penalty_weight(config.lambda_h, dataset.n), config.jitter)
    return BridgeModel(OUTCOME_BRIDGE, anchors, coefficients, (l_a, l_w), (d, 1), config,
                       proxies.treated, proxies.w)


def fit_treatment_bridge(dataset: Dataset, proxies: ProxyAssignment,
                         config: KernelConfig = KernelConfig(),
                         propensity: PropensityEstimate = None) -> BridgeModel:
    """
    Fit q(A, Z) to 1 / p(A | W) with residual kernel on (A, W).

    Args:
        dataset: Samples, n >= 10
        proxies: Target and proxy roles
        config: Regularization and optional lengthscales
        propensity: Conditional density of the treated doses given W;
            estimated here when omitted

    Returns:
        BridgeModel of kind treatment-q anchored at (a_i, z_i)
    """
    if dataset.n < MIN_BRIDGE_SAMPLES:
        raise PreconditionError(f"bridge fitting needs at least {MIN_BRIDGE_SAMPLES} samples")
    if propensity is None:
        propensity = estimate_propensity(dataset, proxies.treated, [proxies.w])
    if propensity.values.shape[0] != dataset.n:
        raise DimensionError("propensity does not match the dataset")
    A, W, Z = _columns(dataset, proxies)
    l_a, l_w, l_z = _lengthscales(config, A, W, Z)
    d = A.shape[1]

    anchors = np.hstack([A, Z])
    K_rep = gram(anchors, None, (l_a, l_z), (d, 1))
    K_res = gram(np.hstack([A, W]), None, (l_a, l_w), (d, 1))
    target = 1.0 / propensity.values
    coefficients = solve_pmmr(K_res, K_rep, target, penalty_weight(config.lambda_q, dataset.n), config.jitter)
    return BridgeModel(TREATMENT_BRIDGE, anchors, coefficients, (l_a, l_z), (d, 1), config,
                       proxies.treated, proxies.z)


def predict(model: BridgeModel, a, v) -> float:
    """Bridge value at a single dose vector a and proxy value v."""
    point = np.concatenate([np.atleast_1d(np.asarray(a, dtype=float)),
                            np.atleast_1d(np.asarray(v, dtype=float))])
    return float(model.evaluate_points(point.reshape(1, -1))[0])


def _standardize(values: np.ndarray, allow_constant: bool) -> Tuple[np.ndarray, np.ndarray]:
    center = values.mean(axis=0)
    scale = values.std(axis=0)
    if np.any(scale == 0):
        if not allow_constant:
            raise PreconditionError("conditioning proxy has zero variance")
        scale = np.where(scale == 0, 1.0, scale)
    return center, scale


def _conditional_density(joint, marginal, a, w, centers, scales, floor):
    a_std = (a - centers[0]) / scales[0]
    w_std = (w - centers[1]) / scales[1]
    log_joint = joint.score_samples(np.hstack([a_std, w_std]))
    log_marginal = marginal.score_samples(w_std)
    density = np.exp(log_joint - log_marginal) / np.prod(scales[0])
    floored = ~(density >= floor)
    return np.where(floored, floor, density), floored


def estimate_propensity(dataset: Dataset, a_names: Sequence[str], w_names: Sequence[str],
                        floor: float = PROPENSITY_FLOOR) -> PropensityEstimate:
    """
    Conditional Gaussian kernel density p(a | w) at every sample.

    Columns are standardized; the shared bandwidth is chosen from
    PROPENSITY_BANDWIDTHS by contiguous 3-fold cross-validated conditional
    log-likelihood.

    Args:
        dataset: Samples, n >= 30
        a_names: Treated columns
        w_names: Conditioning proxy columns
        floor: Lower bound applied to the returned densities

    Returns:
        PropensityEstimate with floored per-sample densities
    """
    if dataset.n < MIN_PROPENSITY_SAMPLES:
        raise PreconditionError(f"propensity needs at least {MIN_PROPENSITY_SAMPLES} samples")
    a = dataset.columns(a_names)
    w = dataset.columns(w_names)
    centers = (a.mean(axis=0), w.mean(axis=0))
    scales = (_standardize(a, True)[1], _standardize(w, False)[1])

    a_std = (a - centers[0]) / scales[0]
    w_std = (w - centers[1]) / scales[1]
    joint_points = np.hstack([a_std, w_std])
    folds = list(KFold(n_splits=PROPENSITY_FOLDS, shuffle=False).split(joint_points))
    scores = []
    for bandwidth in PROPENSITY_BANDWIDTHS:
        total = 0.0
        for train, test in folds:
            joint = KernelDensity(bandwidth=bandwidth).fit(joint_points[train])
            marginal = KernelDensity(bandwidth=bandwidth).fit(w_std[train])
            total += np.sum(joint.score_samples(joint_points[test]) - marginal.score_samples(w_std[test]))
        scores.append(total)
    bandwidth = float(PROPENSITY_BANDWIDTHS[int(np.argmax(scores))])

    joint = KernelDensity(bandwidth=bandwidth).fit(joint_points)
    marginal = KernelDensity(bandwidth=bandwidth).fit(w_std)
    values, floored = _conditional_density(joint, marginal, a, w, centers, scales, floor)
    if floored.any():
        logger.warning("propensity floored at %.0e for %d of %d samples", floor, floored.sum(), dataset.n)
    logger.debug("propensity bandwidth %.4f (standardized units)", bandwidth)
    return PropensityEstimate(values=values, bandwidth=bandwidth, floored=floored, floor=floor,
                              joint=joint, marginal=marginal, centers=centers, scales=scales)
