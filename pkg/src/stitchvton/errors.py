"""Exception types shared across the package."""


class StitchVtonError(Exception):
    """Base class for all package errors."""


class ShapeError(StitchVtonError):
    """Tensor/image dimensions violate an operation's contract."""


class ContractError(StitchVtonError):
    """An API precondition was violated (wrong argument, missing input)."""


class NumericsError(StitchVtonError):
    """Non-finite values or numeric breakdown detected."""


class EmptyMaskError(StitchVtonError):
    """A mask operation requires at least one editable pixel."""


class CheckpointError(StitchVtonError):
    """Checkpoint file is malformed, truncated or corrupted."""


class MetricError(StitchVtonError):
    """Metric inputs are degenerate (too small, ill-conditioned, non-finite)."""
