"""Exception types shared across the package."""


class LatticeDpError(Exception):
    """Base class for all package errors."""


class RankDeficient(LatticeDpError):
    """A matrix expected to have full row rank does not."""


class EmptyLattice(LatticeDpError):
    """The constraint system pins every coordinate (k = d); the lattice is {0}."""


class NotUnimodular(LatticeDpError):
    """A matrix expected to have determinant +-1 does not."""


class ParameterDomain(LatticeDpError):
    """A numeric parameter is outside its admissible domain."""


class ConfigInvalid(LatticeDpError):
    """A chain or mechanism configuration is internally inconsistent."""


class MeetingTimeout(LatticeDpError):
    """A coupled chain pair failed to meet within the configured step cap."""

    def __init__(self, message, steps=None):
        super().__init__(message)
        self.steps = steps


class RejectionLimit(LatticeDpError):
    """The follower's per-coordinate rejection loop exceeded its attempt cap."""


class InsufficientChains(LatticeDpError):
    """Fewer chains than the diagnostic requires."""


class ParseError(LatticeDpError):
    """An input file failed to parse."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NegativePopulation(LatticeDpError):
    """A county record carries a negative population count."""
