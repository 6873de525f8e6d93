"""Exception hierarchy and process exit codes.

Every failure mode that can cross the CLI boundary maps to a documented
nonzero exit code: 2 configuration, 3 identification, 4 numerical, 5 I/O.
"""

from __future__ import annotations

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IDENTIFICATION = 3
EXIT_NUMERICAL = 4
EXIT_IO = 5


class HetidError(Exception):
    """Base class for all package errors."""


class ConfigError(HetidError):
    """Invalid run configuration, config file, or model specification."""


class ModelError(HetidError):
    """Model component violates its contract (e.g. sigma(x) <= 0, bad error law)."""


class IdentificationError(HetidError):
    """Identification precondition fails: |B| below floor or lambda-hat has no root."""


class DegenerateDensityError(HetidError):
    """dF/dy at or below the positivity floor; the density ratio is undefined."""


class QuadratureError(HetidError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, achieved: float | None = None):
        super().__init__(message)
        self.achieved = achieved


class BracketError(HetidError):
    """Root finding could not bracket a sign change."""


class LimitError(HetidError):
    """The matching-limit extrapolation for the lower-branch constant failed."""


class ReconstructionError(HetidError):
    """Reconstructed transform violates a structural requirement (monotonicity)."""


class InversionError(HetidError):
    """Numeric inversion of the transformation did not converge."""

    def __init__(self, message: str, value: float | None = None):
        super().__init__(message)
        self.value = value


class BandwidthError(HetidError):
    """Effective local sample size below floor; carries a suggested bandwidth."""

    def __init__(self, message: str, suggested_bandwidth=None):
        super().__init__(message)
        self.suggested_bandwidth = suggested_bandwidth


class DomainExitError(HetidError):
    """IVP trajectory left the positive half-plane required for uniqueness."""


_NUMERICAL = (
    QuadratureError,
    BracketError,
    LimitError,
    ReconstructionError,
    InversionError,
    BandwidthError,
    DomainExitError,
)


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the documented CLI exit code."""
    if isinstance(exc, (ConfigError, ModelError)):
        return EXIT_CONFIG
    if isinstance(exc, (IdentificationError, DegenerateDensityError)):
        return EXIT_IDENTIFICATION
    if isinstance(exc, _NUMERICAL):
        return EXIT_NUMERICAL
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_NUMERICAL
