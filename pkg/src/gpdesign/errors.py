"""Exception types shared across the package."""


class GpdesignError(Exception):
    """Base class for all package-specific errors."""


class ContainerFormatError(GpdesignError):
    """Raised when a .gpdc file is malformed (bad magic, truncated payload,
    manifest/payload mismatch)."""


class ConvergenceError(GpdesignError):
    """Raised when an iterative numerical routine exhausts its iteration cap."""


class TrainingDivergedError(GpdesignError):
    """Raised when a training loop produces non-finite losses or gradients."""


class GenerationError(GpdesignError):
    """Raised when rejection sampling of a geometry cannot satisfy its
    constraints within the retry cap."""


class ParameterRangeError(ValueError, GpdesignError):
    """Raised when a material parameter falls outside its supported range."""


class ConsistencyError(GpdesignError):
    """Raised when persisted model components do not fit together
    (mismatched latent widths, missing pieces)."""


class StageError(GpdesignError):
    """Raised when a pipeline stage fails; carries the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
