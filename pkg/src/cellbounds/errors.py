"""Exception hierarchy shared by all modules."""


class CellBoundsError(Exception):
    """Base class for every error raised by the package."""


class GeometryError(CellBoundsError):
    """Invalid cell or face geometry (non-planar face, bad index, ...)."""


class DegenerateGeometryError(GeometryError):
    """Zero-measure cell, face or triangle."""


class CurvilinearFaceError(GeometryError):
    """A curvilinear face violates the positive normal-pair condition."""


class DependentNormalsError(GeometryError):
    """Selected normals do not form a linearly independent system."""


class PreconditionError(CellBoundsError):
    """A bound was requested for a cell that does not satisfy its hypotheses."""


class InvalidFluxError(CellBoundsError):
    """A flux field violates the divergence or normal-trace side conditions."""


class SolverError(CellBoundsError):
    """The eigenvalue solver did not converge."""


class ParseError(CellBoundsError):
    """Malformed cell or mesh document."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
