"""Exception types shared across the package."""


class PatchdynError(Exception):
    """Base class for all package errors."""


class InvalidInputError(PatchdynError, ValueError):
    """Input violates a documented precondition (degenerate contour, bad spec, ...)."""


class ToleranceNotMetError(PatchdynError, RuntimeError):
    """An adaptive method could not reach the requested tolerance.

    Carries the best error estimate actually achieved.
    """

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved error estimate {achieved:.3e})")
        self.achieved = achieved


class CFLError(PatchdynError, ValueError):
    """Time step violates the advective CFL guard.  Carries the admissible dt."""

    def __init__(self, dt: float, dt_max: float):
        super().__init__(
            f"dt={dt:.6g} violates the CFL bound; required dt <= {dt_max:.6g}"
        )
        self.dt_max = dt_max
