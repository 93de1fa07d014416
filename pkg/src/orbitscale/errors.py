"""Exception hierarchy.

Every numerical or domain failure raised by the package derives from
:class:`OrbitScaleError`; the CLI maps those to exit code 3 and
:class:`ConfigError` to exit code 2.
"""


class OrbitScaleError(Exception):
    """Base class for all package errors."""


class ContractError(OrbitScaleError, ValueError):
    """A precondition on the inputs (shapes, dimensions, invariants) was violated."""


class DomainError(OrbitScaleError, ValueError):
    """A parameter lies outside the range where the operation is defined."""


class SingularExponentError(DomainError):
    """Scaling exponent is singular (degree 0 or -2)."""


class NumericError(OrbitScaleError, ArithmeticError):
    """Non-finite values appeared during a computation."""


class EscapeError(OrbitScaleError):
    """A trajectory left the region it is supposed to stay in."""


class OrbitStructureError(OrbitScaleError):
    """No well-defined closed orbit exists at the requested energy."""


class DegeneracyError(OrbitStructureError):
    """Energy sits at a potential extremum; the orbit is degenerate."""


class FamilyError(OrbitScaleError):
    """Orbit family breaks across a finite-difference stencil."""


class NotPeriodicError(OrbitScaleError):
    """Trajectory does not close on itself."""


class WrongKindError(OrbitScaleError, TypeError):
    """The system does not have the structure a transformation requires."""


class ResolutionError(OrbitScaleError):
    """Grid or window too coarse for the requested quantity."""


class InsufficientDataError(OrbitScaleError):
    """Too few levels to analyse."""


class MapError(OrbitScaleError):
    """A spectral variable map is not monotone over the requested range."""


class ConfigError(OrbitScaleError):
    """Malformed or schema-violating configuration."""
