"""Exception types shared across the package."""


class BFamilyError(Exception):
    """Base class for all package-specific failures."""


class GridError(BFamilyError, ValueError):
    """Invalid grid construction or mixing fields from different grids."""


class FieldError(BFamilyError, ValueError):
    """Invalid field data (non-finite values, wrong shape)."""


class PositivityError(BFamilyError):
    """A flow map lost the phi_x > 0 invariant."""


class InversionError(BFamilyError):
    """Monotone inversion failed to converge.

    Carries the grid index where the root finder gave up.
    """

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class SolverError(BFamilyError):
    """Time integration aborted (NaN state); carries the offending time."""

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


class ExpDomainError(BFamilyError):
    """Initial velocity outside the numerical domain of the exponential map."""


class DegenerateProbeError(BFamilyError):
    """Probe direction produced a numerically zero differential."""


class UnderResolvedError(BFamilyError, ValueError):
    """Requested bump support is too small for the grid spacing."""


class ConfigError(BFamilyError, ValueError):
    """Run configuration failed to parse or validate."""
