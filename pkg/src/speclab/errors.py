"""Exception types shared across the package."""


class SpeclabError(Exception):
    """Base class for all package errors."""


class ValidationError(SpeclabError, ValueError):
    """Invalid parameters or configuration."""


class ResourceLimitError(SpeclabError):
    """A requested computation exceeds a configured size or memory ceiling."""


class EigensolverError(SpeclabError):
    """The dense eigensolver failed to converge."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ZeroCountMismatch(SpeclabError):
    """Companion-matrix root count disagrees with the argument-principle count."""

    def __init__(self, companion_count, winding_count, radius):
        super().__init__(
            f"companion roots inside |z|<{radius}: {companion_count}, "
            f"winding number: {winding_count}"
        )
        self.companion_count = companion_count
        self.winding_count = winding_count
        self.radius = radius


class TraceOverflowError(SpeclabError, OverflowError):
    """Trace power magnitude left the representable floating range."""

    def __init__(self, k):
        super().__init__(f"Tr(M^{k}) is not finite in double precision")
        self.k = k
