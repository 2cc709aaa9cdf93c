"""Exception types shared across the package."""


class SquishgenError(Exception):
    """Base class for all package errors."""


class ValidationError(SquishgenError):
    """Malformed input data (layouts, files, distributions)."""


class ShapeError(SquishgenError):
    """Array dimensions incompatible with the requested operation."""


class CapacityError(SquishgenError):
    """Requested size cannot hold or represent the data."""


class ParameterError(SquishgenError):
    """Scalar parameter outside its admissible range."""


class ContractError(SquishgenError):
    """Caller violated an interface contract (shapes, normalization)."""


class ConfigurationError(SquishgenError):
    """Invalid or inconsistent run configuration."""


class TrainingError(SquishgenError):
    """Training diverged; carries the failing iteration index."""

    def __init__(self, message: str, iteration: int):
        super().__init__(message)
        self.iteration = iteration


class InfeasibleError(SquishgenError):
    """Constraint system not solved within the iteration cap."""

    def __init__(self, message: str, iterations: int):
        super().__init__(message)
        self.iterations = iterations
