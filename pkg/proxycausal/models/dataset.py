"""
Column-oriented datasets for proxycausal.
Handles construction checks and reading/writing the tagged CSV format.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..errors import DatasetError

logger = logging.getLogger(__name__)

TREATMENT = "a"
OUTCOME = "y"
COVARIATE = "x"
LATENT = "u"

# Roles allowed in CSV headers; latent columns never leave the process.
CSV_ROLES = (TREATMENT, OUTCOME, COVARIATE)
ROLES = CSV_ROLES + (LATENT,)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable table of n samples over named, role-tagged columns."""
    names: Tuple[str, ...]
    roles: Tuple[str, ...]
    values: np.ndarray  # n x p, float64, read-only

    def __post_init__(self):
        names = tuple(self.names)
        roles = tuple(self.roles)
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 2:
            raise DatasetError(f"values must be a 2-D matrix, got {values.ndim}-D")
        if len(names) != values.shape[1] or len(roles) != values.shape[1]:
            raise DatasetError(
                f"{len(names)} names / {len(roles)} roles for {values.shape[1]} columns")
        if len(set(names)) != len(names):
            raise DatasetError("duplicate column names")
        bad = [r for r in roles if r not in ROLES]
        if bad:
            raise DatasetError(f"unknown column role(s): {bad}")
        if not np.all(np.isfinite(values)):
            raise DatasetError("dataset contains NaN or infinite values")
        values.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "roles", roles)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DatasetError(f"no column named {name!r}") from None

    def has(self, name: str) -> bool:
        return name in self.names

    def role_of(self, name: str) -> str:
        return self.roles[self.index(name)]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.index(name)]

    def columns(self, names: Sequence[str]) -> np.ndarray:
        """Return an n x len(names) matrix of the named columns."""
        return self.values[:, [self.index(name) for name in names]]

    def names_with_role(self, role: str) -> List[str]:
        return [name for name, r in zip(self.names, self.roles) if r == role]

    @property
    def treatments(self) -> List[str]:
        return self.names_with_role(TREATMENT)

    @property
    def outcomes(self) -> List[str]:
        return self.names_with_role(OUTCOME)

    @property
    def covariates(self) -> List[str]:
        return self.names_with_role(COVARIATE)

    def observed(self) -> "Dataset":
        """Drop latent columns."""
        keep = [k for k, r in enumerate(self.roles) if r != LATENT]
        return Dataset(
            names=tuple(self.names[k] for k in keep),
            roles=tuple(self.roles[k] for k in keep),
            values=self.values[:, keep],
        )

    def take(self, rows: Sequence[int]) -> "Dataset":
        """Return a dataset made of the given rows, in that order."""
        return Dataset(self.names, self.roles, self.values[np.asarray(rows)])

    def to_frame(self) -> pd.DataFrame:
        header = [f"{name}:{role}" for name, role in zip(self.names, self.roles)]
        return pd.DataFrame(self.values, columns=header)


def parse_header(label: str) -> Tuple[str, str]:
    """
    Split a `name:role` CSV header cell.

    Args:
        label: Header cell

    Returns:
        Tuple of (name, role)
    """
    name, sep, role = str(label).strip().rpartition(":")
    if not sep or not name:
        raise DatasetError(f"column {label!r} is not tagged as name:role")
    role = role.strip().lower()
    if role not in CSV_ROLES:
        raise DatasetError(f"column {label!r} has role {role!r}, expected one of a|y|x")
    return name.strip(), role


def read_csv(path: Union[str, Path]) -> Dataset:
    """
    Read a tagged CSV file into a Dataset.

    Args:
        path: CSV file whose header cells are `name:role`

    Returns:
        Dataset with the file's columns in file order
    """
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DatasetError(f"cannot read {path}: {e}") from e

    parsed = [parse_header(label) for label in frame.columns]
    try:
        values = frame.to_numpy(dtype=float)
    except ValueError as e:
        raise DatasetError(f"non-numeric value in {path}: {e}") from e

    logger.debug("read %d rows x %d columns from %s", values.shape[0], values.shape[1], path)
    return Dataset(
        names=tuple(name for name, _ in parsed),
        roles=tuple(role for _, role in parsed),
        values=values,
    )


def write_csv(dataset: Dataset, path: Union[str, Path]) -> Path:
    """
    Write the observed columns of a dataset as a tagged CSV file.

    Doubles are printed with 17 significant digits so that reading the file
    back reproduces the exact values.

    Args:
        dataset: Dataset to export
        path: Destination file

    Returns:
        Path of the written file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = dataset.observed().to_frame()
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    logger.debug("wrote %d rows to %s", dataset.n, path)
    return path
