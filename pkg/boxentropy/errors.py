"""Exception hierarchy shared by the library and the CLI."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


class BoxEntropyError(Exception):
    """Root of every error raised by boxentropy."""

    exit_code = EXIT_VALIDATION


class DomainError(BoxEntropyError, ValueError):
    """An argument lies outside the operation's domain."""


class NumericalError(BoxEntropyError, ArithmeticError):
    """A computation could not be carried out to the requested accuracy."""

    exit_code = EXIT_NUMERICAL

    def __init__(self, message: str, diagnostics: Mapping[str, Any] | None = None):
        super().__init__(message)
        self.diagnostics: dict[str, Any] = dict(diagnostics or {})


class GOverflowError(NumericalError):
    """G_n(a) is not representable as a finite double for some box."""

    def __init__(self, n: int, a: float, box: int | None = None):
        where = f"box {box}: " if box is not None else ""
        super().__init__(
            f"{where}G_n(a) overflows for n={n}, a={a:g}; "
            f"keep a_i small enough that a_i**n_i <= O(1) (a**n = {_power_text(a, n)})",
            {"box": box, "n": n, "a": a},
        )
        self.box = box
        self.n = n
        self.a = a


class BudgetExceededError(NumericalError):
    """Exact enumeration would visit more outcomes than allowed."""

    def __init__(self, outcome_count: int, budget: int):
        super().__init__(
            f"enumeration refused: {outcome_count} multinomial outcomes exceed the budget of {budget}",
            {"outcome_count": outcome_count, "budget": budget},
        )
        self.outcome_count = outcome_count
        self.budget = budget


class ConfigError(BoxEntropyError):
    """A run config failed schema or semantic validation."""

    def __init__(self, source: str, errors: Sequence[str]):
        self.source = source
        self.errors = list(errors)
        super().__init__(f"{source}: " + " | ".join(self.errors))


class DatasetFormatError(BoxEntropyError):
    """A pair dataset line could not be parsed."""

    def __init__(self, path: str, line_number: int, message: str):
        super().__init__(f"{path}:{line_number}: {message}")
        self.path = path
        self.line_number = line_number


class OutputIOError(BoxEntropyError):
    """Reading or writing a file failed."""

    exit_code = EXIT_IO


@dataclass
class Failure:
    """One failed row of a sweep or curve; the remaining rows still run."""

    row: int
    error: str
    details: dict[str, Any] = field(default_factory=dict)


def _power_text(a: float, n: int) -> str:
    if a <= 1.0:
        return f"{a**n:.3g}"
    # log10 keeps the message finite when a**n itself overflows
    return f"1e{n * math.log10(a):.1f}"
