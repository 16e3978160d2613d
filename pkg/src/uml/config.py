"""Runtime configuration read from the environment."""

import os

DEFAULT_MAX_DIM = 8
DEFAULT_GRID_LEVEL = 3


def max_dim() -> int:
    return int(os.environ.get("UML_MAX_DIM", DEFAULT_MAX_DIM))


def default_grid_level() -> int:
    return int(os.environ.get("UML_DEFAULT_GRID_LEVEL", DEFAULT_GRID_LEVEL))


ORD_READINGS = ("quotient", "product")


def ord_reading() -> str:
    """How ``ord_p(y, xi)`` is read: ``ord_p(y / xi)`` or ``ord_p(y * xi)``."""
    value = os.environ.get("UML_ORD_READING", "quotient")
    if value not in ORD_READINGS:
        raise ValueError(f"UML_ORD_READING must be one of {ORD_READINGS}, got {value!r}")
    return value
