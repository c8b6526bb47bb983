"""Exception taxonomy shared across the package.

Two broad classes matter to callers and to the command line tool: problems with
configuration or input files (user-fixable, exit code 2) and numeric failures
during computation (exit code 3).
"""


class PairspecError(Exception):
    """Base class for all package errors."""


class ConfigError(PairspecError):
    """Invalid, incomplete or inconsistent configuration / input file."""


class NumericError(PairspecError):
    """A computation failed or left its validity domain."""


class WavelengthRangeError(NumericError):
    """Wavelength outside the supported dispersion band."""


class ParaxialDomainError(NumericError):
    """Transverse wavevector too large for the paraxial expansion."""


class QuadratureConvergenceError(NumericError):
    """Quadrature order check failed; carries both trial values."""

    def __init__(self, message, value_n, value_2n):
        super().__init__(message)
        self.value_n = value_n
        self.value_2n = value_2n


class ScanRangeError(NumericError):
    """Requested delay scan exceeds the available hardware range."""


class AliasOverlapError(NumericError):
    """A folded spectral component would overlap the joint-term region."""


class OverflowCountError(NumericError):
    """Expected counts exceed exactly representable integers."""
