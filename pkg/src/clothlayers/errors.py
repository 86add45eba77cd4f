"""Exception types shared across the toolkit.

Exit-code mapping used by the CLI lives in ``clothlayers.cli``.
"""


class ClothLayersError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgumentError(ClothLayersError, ValueError):
    """A caller-supplied argument violates a documented precondition."""


class OutOfDomainError(ClothLayersError):
    """A query point lies outside the region where an operation is defined."""


class SceneGenerationError(ClothLayersError):
    """Scene sampling failed (e.g. every pose attempt self-intersected)."""


class EmptyScanError(ClothLayersError):
    """A scan produced no points (no visible surface from any view)."""


class TrainingDivergedError(ClothLayersError):
    """Training hit a non-finite loss. Carries diagnostics for the abort."""

    def __init__(self, epoch: int, batch: int, lr: float):
        self.epoch = epoch
        self.batch = batch
        self.lr = lr
        super().__init__(
            f"non-finite loss at epoch {epoch}, batch {batch}, lr {lr:.3e}"
        )
