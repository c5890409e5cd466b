"""Shared exception base for the genpair package."""


class GenPairError(Exception):
    """Base class for all genpair data and usage errors."""
