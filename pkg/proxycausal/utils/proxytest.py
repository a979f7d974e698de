"""
Proxy-based test of H0: A_i independent of Y_j given the latent confounder.

Under H0 each conditional outcome distribution P(Y_j = l | A_i = m), seen as
a vector over the M bins of A_i, is a linear combination of the N columns of
P(A_i' | A_i)^T, where A_i' is a proxy treatment sharing the confounder. The
test whitens the stacked outcome frequencies, regresses them on the stacked
proxy design and compares n times the squared residual with a chi-square law
on (M - N)(L - 1) degrees of freedom.

Binning is quantile-based over the observed data, so unbounded supports need
no truncation: tail mass is spread over the end bins.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy import linalg, special

from ..errors import DimensionError, PreconditionError, TableError
from ..models.dataset import Dataset
from .discretize import BinnedColumn, BinningSpec, discretize

logger = logging.getLogger(__name__)

DEFAULT_BINS = (15, 8, 5)
CSV_BINS = (10, 6, 5)
DEFAULT_ALPHA = 0.05
MIN_COUNT = 5
EIGEN_FLOOR = 1e-12
PINV_TOLERANCE = 1e-10
JITTER = 1e-8


@dataclass(frozen=True, eq=False)
class ProbabilityTables:
    """Empirical conditional frequencies within the bins of the tested treatment."""
    M: int
    N: int
    L: int
    counts: np.ndarray  # n_m, length M
    Q: np.ndarray  # N x M, Q[n, m] = P(proxy = n | A_i = m)
    q: np.ndarray  # M(L-1), entry l*M + m = P(Y = l | A_i = m), level L-1 omitted

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def outcome_frequencies(self) -> np.ndarray:
        """The stored levels as an (L-1) x M matrix."""
        return self.q.reshape(self.L - 1, self.M)


@dataclass(frozen=True)
class TestResult:
    """Outcome of one edge test."""
    __test__ = False

    statistic: float
    dof: int
    p_value: float
    reject: bool
    alpha: float
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    i: Optional[str] = None
    j: Optional[str] = None
    proxy: Optional[str] = None
    M: Optional[int] = None
    N: Optional[int] = None
    L: Optional[int] = None


def chi_square_sf(x: float, k: int) -> float:
    """
    Upper tail of the chi-square law with k degrees of freedom.

    Args:
        x: Statistic, x >= 0
        k: Degrees of freedom, k >= 1

    Returns:
        Regularized upper incomplete gamma Gamma(k/2, x/2) / Gamma(k/2)
    """
    if k < 1:
        raise PreconditionError(f"degrees of freedom must be >= 1, got {k}")
    if x < 0:
        raise PreconditionError(f"chi-square statistic must be >= 0, got {x}")
    return float(special.gammaincc(0.5 * k, 0.5 * x))


def build_tables(a_i: BinnedColumn, a_proxy: BinnedColumn, y: BinnedColumn) -> ProbabilityTables:
    """
    Empirical probability tables for one edge test.

    Args:
        a_i: Binned tested treatment (M bins)
        a_proxy: Binned proxy treatment (N bins)
        y: Binned outcome (L bins)

    Returns:
        ProbabilityTables with Q and the stacked outcome frequencies q
    """
    M, N, L = a_i.bins, a_proxy.bins, y.bins
    if not (a_i.n == a_proxy.n == y.n):
        raise DimensionError(f"columns differ in length: {a_i.n}, {a_proxy.n}, {y.n}")
    if M <= N:
        raise TableError(f"tested treatment needs more bins than the proxy (M={M}, N={N})",
                         "bin-order")

    counts = np.bincount(a_i.labels, minlength=M).astype(float)
    if np.any(counts == 0):
        empty = np.flatnonzero(counts == 0).tolist()
        raise TableError(f"bins {empty} of the tested treatment are empty")

    joint_proxy = np.bincount(a_i.labels * N + a_proxy.labels, minlength=M * N).reshape(M, N)
    joint_outcome = np.bincount(a_i.labels * L + y.labels, minlength=M * L).reshape(M, L)

    Q = (joint_proxy / counts[:, None]).T
    frequencies = (joint_outcome / counts[:, None]).T  # L x M
    q = frequencies[:L - 1].reshape(-1)
    return ProbabilityTables(M=M, N=N, L=L, counts=counts.astype(np.int64), Q=Q, q=q)


def estimate_covariance(tables: ProbabilityTables, min_count: int = MIN_COUNT) -> np.ndarray:
    """
    Plug-in multinomial covariance of sqrt(n) * (q_hat - q).

    Within bin m the block over levels l, l' < L-1 is
    (delta_ll' p_l - p_l p_l') * n / n_m; different bins are independent.
    A jitter 1e-8 * trace / dim keeps the result positive-definite.

    Args:
        tables: Probability tables
        min_count: Smallest admissible per-bin count

    Returns:
        M(L-1) x M(L-1) symmetric positive-definite matrix
    """
    if tables.counts.min() < min_count:
        raise TableError(
            f"smallest bin holds {tables.counts.min()} samples, need {min_count}", "bin-underflow")

    M, levels = tables.M, tables.L - 1
    p = tables.outcome_frequencies  # levels x M
    scale = tables.n / tables.counts.astype(float)
    blocks = (np.einsum("lm,lk->lkm", p, np.eye(levels)) - np.einsum("lm,km->lkm", p, p)) * scale

    sigma = np.zeros((levels, M, levels, M))
    bins = np.arange(M)
    sigma[:, bins, :, bins] = blocks.transpose(2, 0, 1)
    sigma = sigma.reshape(levels * M, levels * M)

    dim = sigma.shape[0]
    trace = np.trace(sigma)
    sigma += (JITTER * trace / dim if trace > 0 else JITTER) * np.eye(dim)
    return 0.5 * (sigma + sigma.T)


def inverse_sqrt(sigma: np.ndarray) -> np.ndarray:
    """Symmetric inverse square root with eigenvalues floored at 1e-12 * largest."""
    values, vectors = linalg.eigh(sigma)
    values = np.maximum(values, EIGEN_FLOOR * values.max())
    return (vectors / np.sqrt(values)) @ vectors.T


def proxy_design(tables: ProbabilityTables) -> np.ndarray:
    """Block-diagonal repetition of Q^T over the L-1 stored outcome levels."""
    return np.kron(np.eye(tables.L - 1), tables.Q.T)


def residual_projector(design: np.ndarray) -> Tuple[np.ndarray, int]:
    """
    Projector onto the column space of a whitened design.

    Singular values of the design below 1e-10 times the largest are treated
    as zero.

    Returns:
        Tuple of (projector, numerical rank of the design)
    """
    inverse, rank = linalg.pinv(design, atol=0.0, rtol=PINV_TOLERANCE, return_rank=True)
    projector = design @ inverse
    return 0.5 * (projector + projector.T), int(rank)


def projection_statistic(tables: ProbabilityTables, sigma: np.ndarray, n: int,
                         alpha: float = DEFAULT_ALPHA) -> TestResult:
    """
    Chi-square statistic of the whitened regression residual.

    Args:
        tables: Probability tables
        sigma: Positive-definite covariance from estimate_covariance
        n: Sample size
        alpha: Significance level

    Returns:
        TestResult; when the whitened design is rank deficient the degrees
        of freedom become M(L-1) - rank and the diagnostics say so
    """
    dim = tables.M * (tables.L - 1)
    if sigma.shape != (dim, dim):
        raise DimensionError(f"covariance has shape {sigma.shape}, expected {(dim, dim)}")

    whitening = inverse_sqrt(sigma)
    design = whitening @ proxy_design(tables)
    response = whitening @ tables.q
    projector, rank = residual_projector(design)
    residual = response - projector @ response
    statistic = float(n * residual @ residual)

    dof = dim - rank
    full_rank = rank == tables.N * (tables.L - 1)
    if not full_rank:
        logger.warning("whitened proxy design has rank %d < %d; using %d degrees of freedom",
                       rank, tables.N * (tables.L - 1), dof)
    p_value = chi_square_sf(statistic, dof) if dof >= 1 else 1.0

    values = linalg.eigvalsh(sigma)
    diagnostics = {
        "min_bin_count": int(tables.counts.min()),
        "condition_number": float(values.max() / values.min()),
        "design_rank": rank,
        "full_rank": bool(full_rank),
    }
    return TestResult(
        statistic=statistic,
        dof=int(dof),
        p_value=p_value,
        reject=bool(p_value < alpha),
        alpha=float(alpha),
        diagnostics=diagnostics,
        M=tables.M,
        N=tables.N,
        L=tables.L,
    )


def test_edge(dataset: Dataset, i: str, j: str, proxy: str,
              bins: Tuple[int, int, int] = DEFAULT_BINS, alpha: float = DEFAULT_ALPHA,
              strategy: str = "quantile", min_count: int = MIN_COUNT) -> TestResult:
    """
    Test the edge A_i -> Y_j using A_proxy as the proxy treatment.

    Args:
        dataset: Samples
        i: Tested treatment
        j: Outcome
        proxy: Proxy treatment, different from i
        bins: (M, N, L) bin counts of tested treatment, proxy and outcome
        alpha: Significance level
        strategy: Binning strategy
        min_count: Smallest admissible per-bin count

    Returns:
        TestResult tagged with the variable names
    """
    if proxy == i:
        raise PreconditionError(f"proxy {proxy!r} must differ from the tested treatment")
    M, N, L = bins
    if M <= N:
        raise TableError(f"tested treatment needs more bins than the proxy (M={M}, N={N})",
                         "bin-order")

    a_binned = discretize(dataset.column(i), BinningSpec(strategy, M))
    proxy_binned = discretize(dataset.column(proxy), BinningSpec(strategy, N))
    y_binned = discretize(dataset.column(j), BinningSpec(strategy, L))

    tables = build_tables(a_binned, proxy_binned, y_binned)
    sigma = estimate_covariance(tables, min_count=min_count)
    result = projection_statistic(tables, sigma, dataset.n, alpha=alpha)
    logger.debug("edge %s -> %s via %s: statistic %.3f, dof %d, p %.4g",
                 i, j, proxy, result.statistic, result.dof, result.p_value)
    return replace(result, i=i, j=j, proxy=proxy)


test_edge.__test__ = False
