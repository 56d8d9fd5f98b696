"""Contour dynamics and quantitative stability toolkit for 2D Euler vortex patches."""

__version__ = "0.1.0"

from .errors import CFLError, InvalidInputError, PatchdynError, ToleranceNotMetError
from .geometry import Contour, Disk, Patch

__all__ = [
    "CFLError",
    "Contour",
    "Disk",
    "InvalidInputError",
    "Patch",
    "PatchdynError",
    "ToleranceNotMetError",
    "__version__",
]
