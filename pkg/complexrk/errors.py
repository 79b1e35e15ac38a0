from __future__ import annotations


class ComplexRKError(Exception):
    """Base class for every error raised by the package."""

    numerical = False


class DimensionError(ComplexRKError, ValueError):
    pass


class DomainError(ComplexRKError, ValueError):
    pass


class DegeneratePathError(ComplexRKError, ValueError):
    pass


class InvalidArgumentError(ComplexRKError, ValueError):
    pass


class NoReferenceError(ComplexRKError, LookupError):
    pass


class PhaseError(ComplexRKError, ArithmeticError):
    numerical = True


class IndeterminateOrderError(ComplexRKError, ArithmeticError):
    numerical = True


class SingularityError(ComplexRKError, ArithmeticError):
    numerical = True

    def __init__(self, body: int, modulus: float) -> None:
        name = "earth" if body == 1 else "moon"
        super().__init__(f"Right-hand side singular near body {body} ({name}): |r^3| = {modulus:.3e}")
        self.body = body
        self.modulus = modulus


class StepFailure(ComplexRKError, ArithmeticError):
    numerical = True

    def __init__(self, step_index: int, micro_index: int | None = None, reason: str = "") -> None:
        where = f"step {step_index}" if micro_index is None else f"step {step_index}, micro step {micro_index}"
        super().__init__(f"Integration failed at {where}: {reason}" if reason else f"Integration failed at {where}")
        self.step_index = step_index
        self.micro_index = micro_index
