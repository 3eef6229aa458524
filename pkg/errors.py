"""
Muskat Lab - Error Types
Exceptions shared by the simulation, verification and CLI layers.

Input problems subclass ValueError so callers that already guard with
``except ValueError`` keep working. Stop conditions of a running
trajectory (collision, resolution loss, width collapse, non-finite state)
are plain MuskatError subclasses; evolution.run turns them into
termination reasons instead of letting them escape.
"""


class MuskatError(Exception):
    """Root of every error raised by this package."""


class InvalidParameterError(MuskatError, ValueError):
    """Densities out of order, sigma outside (0, 1), or a malformed grid."""


class InvalidInitialDataError(MuskatError, ValueError):
    """Initial interfaces touch, or the profile does not decay near the boundary."""


class KernelDomainError(MuskatError, ValueError):
    """A kernel or symbol was evaluated where it is singular (dx = 0, xi = 0, G = 0)."""


class ConfigError(MuskatError, ValueError):
    """Run configuration failed schema or semantic validation."""

    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])


class CollisionError(MuskatError):
    """The interface gap 2*sigma + min(f - g) dropped below its threshold."""

    def __init__(self, message: str, gap: float = float("nan")):
        super().__init__(message)
        self.gap = gap


class ResolutionLossError(MuskatError):
    """Analyticity tracking broke: cosh weights overflow or the spectrum reached the tail band."""

    def __init__(self, message: str, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic or {}


class WidthCollapseError(MuskatError):
    """The strip width gamma reached zero or its configured floor."""


class NonFiniteStateError(MuskatError):
    """NaN or Inf appeared in the evolved state."""


class PlotError(MuskatError):
    """An artifact handed to the plotter is missing columns or is malformed."""
