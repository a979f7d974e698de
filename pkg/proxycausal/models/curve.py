"""
Effect curves: a dose grid with one estimate per dose.
"""
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from ..errors import DimensionError


def as_grid(grid, width: int = None) -> np.ndarray:
    """
    Normalize a dose grid to a 2-D array of shape (points, doses).

    Args:
        grid: Scalars (one treated variable) or dose vectors
        width: Expected number of treated variables, if known

    Returns:
        Float array with one row per grid point
    """
    points = np.asarray(grid, dtype=float)
    if points.ndim == 0:
        points = points.reshape(1, 1)
    elif points.ndim == 1:
        if width is not None and width > 1 and points.shape[0] == width:
            points = points.reshape(1, width)
        else:
            points = points.reshape(-1, 1)
    if points.ndim != 2 or points.shape[0] == 0:
        raise DimensionError("grid must be a nonempty list of doses or dose vectors")
    if width is not None and points.shape[1] != width:
        raise DimensionError(f"grid points have {points.shape[1]} doses, expected {width}")
    return points


def default_grid(width: int = 1, points: int = 10, low: float = 0.0, high: float = 1.0) -> np.ndarray:
    """Equally spaced doses on [low, high], repeated along the diagonal for several treatments."""
    ticks = np.linspace(low, high, points)
    return np.repeat(ticks[:, None], width, axis=1)


@dataclass(frozen=True, eq=False)
class EffectCurve:
    """Estimates of E[Y | do(a)] on a grid of doses."""
    grid: np.ndarray  # points x doses
    estimates: np.ndarray
    n_used: int = 0
    bandwidth: Optional[Tuple[float, ...]] = None
    standard_errors: Optional[np.ndarray] = None
    treated: Tuple[str, ...] = ()
    outcome: str = ""

    def __post_init__(self):
        grid = as_grid(self.grid)
        estimates = np.asarray(self.estimates, dtype=float).reshape(-1)
        if grid.shape[0] != estimates.shape[0]:
            raise DimensionError(
                f"{grid.shape[0]} grid points but {estimates.shape[0]} estimates")
        if grid.shape[1] == 1 and np.any(np.diff(grid[:, 0]) <= 0):
            raise DimensionError("scalar dose grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "estimates", estimates)
        if self.standard_errors is not None:
            object.__setattr__(
                self, "standard_errors", np.asarray(self.standard_errors, dtype=float).reshape(-1))
        if self.bandwidth is not None:
            object.__setattr__(self, "bandwidth", tuple(float(b) for b in np.atleast_1d(self.bandwidth)))
        object.__setattr__(self, "treated", tuple(self.treated))

    def __len__(self) -> int:
        return self.estimates.shape[0]

    @property
    def doses(self) -> np.ndarray:
        """First dose coordinate of each grid point, for plotting."""
        return self.grid[:, 0]

    def same_grid(self, other: "EffectCurve", atol: float = 1e-12) -> bool:
        return self.grid.shape == other.grid.shape and np.allclose(self.grid, other.grid, rtol=0, atol=atol)

    def rows(self) -> Sequence[Tuple[float, ...]]:
        return [tuple(point) + (value,) for point, value in zip(self.grid, self.estimates)]
