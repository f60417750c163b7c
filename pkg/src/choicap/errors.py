"""Exception types shared across the package."""


class DimensionMismatch(ValueError):
    """Operands live on incompatible Hilbert-space dimensions."""


class CapExceeded(RuntimeError):
    """A requested computation exceeds the configured dimension cap."""


class InvariantViolation(RuntimeError):
    """A mathematical invariant failed beyond its numerical tolerance."""


class SpecError(ValueError):
    """A channel or code specification could not be parsed."""
