class ModalboundError(Exception):
    """Base class for all errors raised by modalbound."""


class InvalidInputError(ModalboundError, ValueError):
    pass


class SchemaMismatchError(InvalidInputError):
    pass


class MissingModalityError(InvalidInputError):
    """A block required by the active subset is absent."""


class InvalidConfigError(InvalidInputError):
    pass


class SingularityError(ModalboundError, ArithmeticError):
    def __init__(self, message: str, rank: int, size: int):
        super().__init__(f"{message} (rank {rank} of {size})")
        self.rank = rank
        self.size = size


class TrainingDivergedError(ModalboundError, RuntimeError):
    """Risk became non-finite; carries the last finite checkpoint."""

    def __init__(self, step: int, last_finite_risk: float | None, last_model=None):
        super().__init__(f"training diverged at step {step}")
        self.step = step
        self.last_finite_risk = last_finite_risk
        self.last_model = last_model


class BoundConstantsError(ModalboundError, ValueError):
    pass
