"""Exception hierarchy shared across the package."""


class SetBarrierError(Exception):
    """Base class for all errors raised by setbarrier."""


class DimensionError(SetBarrierError, ValueError):
    """Inputs have incompatible shapes or dimensions."""


class InvalidInputError(SetBarrierError, ValueError):
    """An argument is outside its documented domain."""


class NumericDomainError(SetBarrierError, ArithmeticError):
    """Evaluation left the domain of an operation (e.g. division by zero)."""


class ContractViolation(SetBarrierError, RuntimeError):
    """A precondition the caller is responsible for was not met."""


class ResourceLimitError(SetBarrierError, RuntimeError):
    """A configured size limit was exceeded."""


class SafetyViolation(SetBarrierError, AssertionError):
    """A simulated trajectory contradicts a certificate."""
