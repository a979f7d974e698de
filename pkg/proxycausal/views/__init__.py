"""Renderings of proxycausal results."""
