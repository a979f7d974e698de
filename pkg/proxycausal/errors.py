"""
Exception hierarchy for proxycausal.
Every error carries a short category token that the CLI prints on failure.
"""


class ProxyCausalError(Exception):
    """Base class for all proxycausal errors."""

    category = "error"

    def __init__(self, message: str, category: str = None):
        super().__init__(message)
        if category is not None:
            self.category = category


class UsageError(ProxyCausalError):
    """Bad command-line usage."""

    category = "usage-error"


class ConfigError(ProxyCausalError):
    """Invalid or inconsistent run configuration."""

    category = "config-error"


class ScmError(ProxyCausalError):
    """Malformed structural causal model."""

    category = "invalid-scm"


class UnknownScenarioError(ScmError):
    """Requested built-in scenario does not exist."""

    category = "unknown-scenario"


class DatasetError(ProxyCausalError):
    """Malformed dataset or CSV input."""

    category = "invalid-dataset"


class PreconditionError(ProxyCausalError, ValueError):
    """An operation was called outside its domain."""

    category = "precondition"


class DimensionError(ProxyCausalError, ValueError):
    """Array shapes do not agree."""

    category = "dimension-mismatch"


class DiscretizationError(ProxyCausalError, ValueError):
    """A column cannot be binned as requested."""

    category = "too-few-distinct-values"


class TableError(ProxyCausalError):
    """Probability tables cannot be built or used."""

    category = "empty-bin"


class AssumptionViolation(ProxyCausalError):
    """The graph offers no admissible proxy pair."""

    category = "assumption-violation"


class SolverError(ProxyCausalError):
    """A linear system could not be solved."""

    category = "singular-system"


class GridMismatchError(ProxyCausalError):
    """Two effect curves are not evaluated on the same grid."""

    category = "grid-mismatch"
