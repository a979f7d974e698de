"""Models for proxycausal."""
