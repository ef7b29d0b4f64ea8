"""
Exception hierarchy shared by every isodense module.

InputError covers anything the caller can fix (bad expression, CSV, mask, precondition);
ConvergenceError covers numeric failures. The CLI maps them to exit codes 1 and 2.
"""
from typing import Optional


class IsodenseError(Exception):
    """Base class for all isodense errors."""


class InputError(IsodenseError, ValueError):
    """Invalid input or violated precondition."""


class ExprSyntaxError(InputError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifierError(InputError):
    def __init__(self, name: str, position: int):
        super().__init__(f"Unknown identifier '{name}' at position {position}")
        self.name = name
        self.position = position


class ExprDomainError(InputError):
    """Expression evaluated outside its domain (log of non-positive, sqrt of negative, ...)."""


class ConvergenceError(IsodenseError, ArithmeticError):
    def __init__(self, message: str, achieved: Optional[float] = None):
        if achieved is not None:
            message = f"{message} (achieved {achieved:.3e})"
        super().__init__(message)
        self.achieved = achieved
