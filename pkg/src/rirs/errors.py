"""Exception types shared across the package."""


class RirsError(Exception):
    """Base class for all library errors."""


class DomainError(RirsError, ValueError):
    """An argument lies outside the domain of an operation."""


class StructureError(RirsError, ValueError):
    """Malformed or incompatible structural input (cells, partitions, segments)."""


class CapacityError(RirsError, ValueError):
    """A construction ran out of room (support mass, representation size)."""


class PreconditionError(RirsError, ValueError):
    """A checked precondition failed; ``witness`` locates the violation."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class EvaluationError(RirsError, ArithmeticError):
    """A numerical evaluation could not be completed or certified."""


class ConsistencyError(RirsError, ArithmeticError):
    """Computed values contradict a structural guarantee (a numerical fault)."""


class SpecError(RirsError, ValueError):
    """An unparseable or invalid specification string."""
