"""
Proximal doubly-robust effect estimates.

For a dose a the kernel estimator (PKDR) averages

    K_bw(A - a) * q(a, Z) * (Y - h(a, W)) + h(a, W)

over the samples, with K_bw the Gaussian density kernel scaled by bw. The
discrete estimator (PDR) replaces the kernel with the indicator A == a.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence, Union

import numpy as np
from scipy import stats

from ..errors import DimensionError, GridMismatchError, PreconditionError
from ..models.curve import EffectCurve, as_grid, default_grid
from ..models.dataset import Dataset
from .bridge import Bridge
from .discovery import ProxyAssignment

logger = logging.getLogger(__name__)

# Second moment and squared-kernel integral of the standard Gaussian kernel.
KAPPA2 = 1.0
OMEGA2 = 1.0 / (2.0 * math.sqrt(math.pi))

BANDWIDTH_FACTOR = 1.5

__all__ = [
    "KAPPA2", "OMEGA2", "EffectCurve", "bandwidth_rule", "gaussian_kernel", "pkdr_estimate",
    "pdr_estimate", "effect_curve", "cmae",
]


def bandwidth_rule(column, n: int = None) -> float:
    """
    Rule-of-thumb smoothing bandwidth 1.5 * sd * n^(-1/5).

    Args:
        column: Observed doses of one treatment
        n: Sample size; defaults to the column length

    Returns:
        Positive bandwidth
    """
    values = np.asarray(column, dtype=float).reshape(-1)
    n = values.shape[0] if n is None else int(n)
    if n < 2 or values.shape[0] < 2:
        raise PreconditionError("bandwidth rule needs at least two samples")
    sd = float(np.std(values, ddof=1))
    if sd <= 0:
        raise PreconditionError("bandwidth rule needs a column with positive variance")
    return BANDWIDTH_FACTOR * sd * n ** -0.2


def gaussian_kernel(offsets, bandwidth) -> np.ndarray:
    """
    Product Gaussian density kernel prod_k phi(u_k / bw_k) / bw_k.

    Args:
        offsets: n x d differences A - a (a vector for d = 1)
        bandwidth: One bandwidth, or one per coordinate

    Returns:
        Length-n kernel weights
    """
    offsets = np.asarray(offsets, dtype=float)
    if offsets.ndim == 1:
        offsets = offsets.reshape(-1, 1)
    bandwidth = np.broadcast_to(np.asarray(bandwidth, dtype=float).reshape(-1), (offsets.shape[1],))
    if np.any(bandwidth <= 0):
        raise PreconditionError("kernel bandwidth must be positive")
    return np.prod(stats.norm.pdf(offsets / bandwidth) / bandwidth, axis=1)


def _dose(a, width: int) -> np.ndarray:
    dose = np.atleast_1d(np.asarray(a, dtype=float)).reshape(-1)
    if dose.shape[0] != width:
        raise DimensionError(f"dose has {dose.shape[0]} coordinates, target treats {width}")
    return dose


def _dr_mean(weights, dataset: Dataset, h: Bridge, q: Optional[Bridge], dose, proxies) -> float:
    h_values = np.asarray(h.evaluate(dose, dataset.columns([proxies.w])), dtype=float)
    if q is None:
        return float(np.mean(h_values))
    q_values = np.asarray(q.evaluate(dose, dataset.columns([proxies.z])), dtype=float)
    y = dataset.column(proxies.outcome)
    return float(np.mean(weights * q_values * (y - h_values) + h_values))


def pkdr_estimate(dataset: Dataset, h: Bridge, q: Optional[Bridge], a, bandwidth,
                  proxies: ProxyAssignment) -> float:
    """
    Kernel doubly-robust estimate of E[Y | do(A_S = a)].

    Args:
        dataset: Samples
        h: Outcome bridge h(a, w)
        q: Treatment bridge q(a, z); None drops the correction term
        a: Dose, one coordinate per treated variable
        bandwidth: Kernel bandwidth, scalar or per coordinate
        proxies: Target and proxy roles

    Returns:
        Sample mean of the doubly-robust integrand
    """
    dose = _dose(a, len(proxies.treated))
    weights = gaussian_kernel(dataset.columns(proxies.treated) - dose, bandwidth)
    return _dr_mean(weights, dataset, h, q, dose, proxies)


def pdr_estimate(dataset: Dataset, h: Bridge, q: Optional[Bridge], a,
                 proxies: ProxyAssignment) -> float:
    """
    Doubly-robust estimate at a discrete treatment level.

    Falls back to the mean of h(a, W) when no sample has A == a.
    """
    dose = _dose(a, len(proxies.treated))
    weights = np.all(dataset.columns(proxies.treated) == dose, axis=1).astype(float)
    if not weights.any():
        logger.warning("no sample has %s = %s; using the outcome-bridge mean",
                       "+".join(proxies.treated), dose.tolist())
        return _dr_mean(weights, dataset, h, None, dose, proxies)
    return _dr_mean(weights, dataset, h, q, dose, proxies)


def rule_bandwidths(dataset: Dataset, treated: Sequence[str]) -> tuple:
    """bandwidth_rule applied to every treated column."""
    return tuple(bandwidth_rule(dataset.column(name)) for name in treated)


def effect_curve(dataset: Dataset, h: Bridge, q: Optional[Bridge], proxies: ProxyAssignment,
                 grid=None, bandwidth: Union[float, Sequence[float]] = None,
                 jobs: int = 1) -> EffectCurve:
    """
    PKDR estimates over a dose grid.

    Args:
        dataset: Samples
        h: Outcome bridge
        q: Treatment bridge, or None for the outcome-bridge-only curve
        proxies: Target and proxy roles
        grid: Doses; 10 equally spaced points on [0, 1] (diagonal for
            several treatments) by default
        bandwidth: Kernel bandwidth; bandwidth_rule per treated column by default
        jobs: Worker threads

    Returns:
        EffectCurve tagged with the target
    """
    width = len(proxies.treated)
    points = default_grid(width) if grid is None else as_grid(grid, width)
    if bandwidth is None:
        bandwidth = rule_bandwidths(dataset, proxies.treated)
    bandwidth = tuple(float(b) for b in np.broadcast_to(np.asarray(bandwidth, dtype=float).reshape(-1), (width,)))

    with ThreadPoolExecutor(max_workers=max(1, int(jobs))) as pool:
        estimates = list(pool.map(
            lambda dose: pkdr_estimate(dataset, h, q, dose, bandwidth, proxies), points))

    logger.debug("effect curve %s -> %s over %d points, bandwidth %s",
                 "+".join(proxies.treated), proxies.outcome, points.shape[0], bandwidth)
    return EffectCurve(grid=points, estimates=estimates, n_used=dataset.n, bandwidth=bandwidth,
                       treated=proxies.treated, outcome=proxies.outcome)


def cmae(estimate: EffectCurve, truth: EffectCurve) -> float:
    """Mean absolute difference between two curves on the same grid."""
    if not estimate.same_grid(truth):
        raise GridMismatchError("curves are evaluated on different grids")
    return float(np.mean(np.abs(estimate.estimates - truth.estimates)))
