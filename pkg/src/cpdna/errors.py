"""Exception types shared across the package.

Validation problems (bad arguments, malformed files) raise ValueError
subclasses and map to CLI exit code 1; numerical failures map to exit
code 2.
"""


class CpdnaError(Exception):
    """Base class for package-specific failures."""


class NumericalError(CpdnaError):
    """Base class for failures of the numerics, not of the inputs."""


class InvalidTransform(CpdnaError, ValueError):
    """Rotation matrix fails the orthogonality check."""


class IterationFailure(NumericalError):
    """An iterative root-finder exhausted its iteration budget."""


class EmptyBand(CpdnaError, ValueError):
    """Grid spacing too coarse to resolve the surface."""


class BandTooLarge(CpdnaError, ValueError):
    """Band point count exceeds the configured cap."""


class StencilEscape(NumericalError):
    """An interpolation node fell outside the band.

    The bandwidth formula makes this impossible for a correctly built
    band; seeing it means a bug, not a user error.
    """


class DimensionMismatch(CpdnaError, ValueError):
    """Operand shapes are incompatible."""


class ZeroPivot(NumericalError):
    """ILU factorization hit a zero pivot."""

    def __init__(self, row: int):
        super().__init__(f"zero pivot in row {row}")
        self.row = row


class NoConvergence(NumericalError):
    """An eigenvalue or linear solve did not reach its tolerance."""


class ComplexSpectrum(NumericalError):
    """A Ritz value has an imaginary part too large to discard."""


class AllZero(CpdnaError, ValueError):
    """Spectrum has no entry above the zero tolerance."""


class LengthMismatch(CpdnaError, ValueError):
    """A fingerprint is shorter than the requested prefix length."""


class DegenerateInput(CpdnaError, ValueError):
    """Distance matrix carries no usable geometry (all zeros)."""


class ParseError(CpdnaError, ValueError):
    """Malformed record in an input file."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class IndexOutOfRange(CpdnaError, ValueError):
    """Face record references a vertex that does not exist."""
