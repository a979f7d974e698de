"""proxycausal - proxy-based causal discovery and effect estimation."""

__version__ = "0.1.0"
