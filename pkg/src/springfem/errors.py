"""Exception types shared across the package."""

from __future__ import annotations


class SpringFemError(Exception):
    """Base class for all errors raised by this package."""


class MeshFormatError(SpringFemError):
    """Malformed mesh or tensor file.

    Carries the 1-based line number of the offending line when known.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MeshError(SpringFemError):
    """Invalid mesh data (degenerate element, bad index, non-manifold...)."""


class MaterialError(SpringFemError):
    """Inadmissible material parameters or elasticity tensor."""


class AssemblyError(SpringFemError):
    """Assembled spring constants violate a structural guarantee."""


class SolverError(SpringFemError):
    """Linear solver failed (factorization breakdown or no convergence)."""


class UsageError(SpringFemError):
    """Command line was malformed."""
