"""Exception hierarchy for the conforay pipeline.

Every failure mode the pipeline reports deliberately (as opposed to plain
bugs) derives from :class:`ConforayError` so callers can catch the whole
family at stage boundaries.
"""


class ConforayError(Exception):
    """Base class for all deliberate pipeline failures."""


class DomainError(ConforayError):
    """A query point lies outside the field's bounding box."""


class PositivityError(ConforayError):
    """A conformal factor (or recovered density) is not strictly positive."""


class StencilError(ConforayError):
    """A finite-difference stencil cannot be formed (fewer than 3 nodes)."""


class VarianceError(ConforayError):
    """Vector/covector variance mismatch in a metric contraction."""


class DefinitenessError(ConforayError):
    """A metric tensor failed the symmetric-positive-definite check."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class GeometryError(ConforayError):
    """Invalid boundary geometry (non-unit normal, degenerate tangents...)."""


class SpeedError(ConforayError):
    """Initial geodesic velocity violates the unit-speed relation."""


class DegenerateBoundaryError(ConforayError):
    """Chart Jacobian is already degenerate at t = 0."""


class InsufficientSourcesError(ConforayError):
    """Fewer admissible boundary sources than requested for a node."""


class UnreachableError(ConforayError):
    """Lattice distance query between disconnected nodes."""


class GenericityError(ConforayError):
    """Source configuration too degenerate to invert the eikonal system."""

    def __init__(self, message, node=None, cond=None):
        super().__init__(message)
        self.node = node
        self.cond = cond


class FieldRecoveryError(ConforayError):
    """Too many per-node recovery failures for a usable metric field."""

    def __init__(self, message, failed_mask=None):
        super().__init__(message)
        self.failed_mask = failed_mask


class ParametrizationError(ConforayError):
    """Degenerate first fundamental form in the boundary-trace fit."""


class ParameterError(ConforayError):
    """Invalid closed-form conformal-Killing-field parameters."""


class MarchDivergenceError(ConforayError):
    """Cauchy march exceeded the divergence guard."""

    def __init__(self, message, layer=None, residual=None):
        super().__init__(message)
        self.layer = layer
        self.residual = residual


class DegenerateSpeedError(ConforayError):
    """|v|^2 fell below the degeneracy threshold during reconstruction."""


class DatasetError(ConforayError):
    """Structurally invalid travel-time dataset."""


class ParseError(DatasetError):
    """Malformed TTD-JSON document; ``path`` points at the offending field."""

    def __init__(self, message, path="$"):
        super().__init__(f"{path}: {message}")
        self.path = path


class VersionError(ParseError):
    """Unsupported TTD-JSON format version."""
