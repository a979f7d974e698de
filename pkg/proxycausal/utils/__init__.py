"""Pure computations for proxycausal."""
