"""Exception types shared across the package."""


class DimensionError(ValueError):
    """A requested matrix or truncation dimension is invalid."""


class LayoutError(ValueError):
    """Operands live on incompatible Hilbert-space layouts."""


class ValidationError(ValueError):
    """A domain object violates one of its declared invariants."""


class StepSizeError(ValueError):
    """A time step is too large for the stiffest rate in the model."""


class IntegrationError(RuntimeError):
    """Deterministic integration lost trace or otherwise went unstable."""


class TruncationError(RuntimeError):
    """Population leaked into the top Fock level beyond tolerance."""


class DegenerateStateError(RuntimeError):
    """All measurement-channel probabilities vanished for the current state."""


class ConfigError(ValueError):
    """An experiment configuration failed validation (names the field)."""


class HierarchyWarning(UserWarning):
    """Rate hierarchy of the lossy-cavity scheme is not well separated."""
