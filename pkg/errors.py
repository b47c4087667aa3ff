# -*- coding: utf-8 -*-
from __future__ import annotations

from typing import Any, Iterable


# cli exit codes
EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER = 2
EXIT_VERIFICATION = 3


class FlipDynError(Exception):
    """base class for every error raised by the solvers"""


class SpecValidationError(FlipDynError, ValueError):
    """one or more problems in a game spec; each violation names its document path"""

    def __init__(self, violations: Iterable[str] | str):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        count = len(self.violations)
        head = "; ".join(self.violations[:5])
        more = f" (+{count - 5} more)" if count > 5 else ""
        super().__init__(f"{count} spec violation(s): {head}{more}")


class InvalidActionError(FlipDynError, ValueError):
    def __init__(self, node: int, action: Any, allowed: Iterable[Any], player: str = ""):
        self.node = node
        self.action = action
        self.allowed = tuple(allowed)
        who = f"{player} " if player else ""
        super().__init__(f"{who}action {action!r} is not available at node {node}; allowed: {list(self.allowed)}")


class PreconditionError(FlipDynError, ValueError):
    pass


class SolverError(FlipDynError, ArithmeticError):
    """lp failure; carries the offending matrix and where in the recursion it happened"""

    def __init__(self, message: str, matrix: Any = None, **context: Any):
        self.message = message
        self.matrix = matrix
        self.context: dict[str, Any] = dict(context)
        super().__init__(message)

    def with_context(self, **context: Any) -> "SolverError":
        for key, val in context.items():
            self.context.setdefault(key, val)
        return self

    def __str__(self) -> str:
        if not self.context:
            return self.message
        where = ", ".join(f"{k}={v}" for k, v in self.context.items())
        return f"{self.message} [{where}]"


class VerificationError(FlipDynError):
    def __init__(self, message: str, report: Any = None):
        self.report = report
        super().__init__(message)


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, SpecValidationError):
        return EXIT_VALIDATION
    if isinstance(exc, VerificationError):
        return EXIT_VERIFICATION
    # solver, precondition and action errors all mean the solve itself broke
    return EXIT_SOLVER
