"""Generative parametric design of two-phase microstructures.

Subpackages cover the full chain: geometry synthesis (microgen), a fast
physics surrogate (oracle), sparse separated-representation fitting (spgd),
rank-reduction autoencoders (rrae), latent regression (latentmap), density
modeling and sampling of latent geometry codes (genlab), plus the pipeline
orchestrator, a command line, and an HTTP service.
"""

__version__ = "0.1.0"

from .errors import (
    ConsistencyError,
    ContainerFormatError,
    ConvergenceError,
    GenerationError,
    GpdesignError,
    ParameterRangeError,
    StageError,
    TrainingDivergedError,
)

__all__ = [
    "__version__",
    "GpdesignError",
    "ContainerFormatError",
    "ConvergenceError",
    "TrainingDivergedError",
    "GenerationError",
    "ParameterRangeError",
    "ConsistencyError",
    "StageError",
]
