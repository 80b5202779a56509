"""Exception hierarchy shared by the library and the command-line surface."""

from __future__ import annotations

from typing import Any


class MotionDistillError(Exception):
    """Base class; ``exit_code`` is what the CLI returns when this escapes."""

    exit_code = 1


class UsageError(MotionDistillError):
    exit_code = 1


class ConfigError(MotionDistillError):
    exit_code = 1


class DataFormatError(MotionDistillError):
    """Dataset, checkpoint or ledger file could not be read."""

    exit_code = 2

    MAGIC_MISMATCH = "magic_mismatch"
    VERSION_MISMATCH = "version_mismatch"
    TRUNCATED = "truncated"
    HEADER_INCONSISTENT = "header_inconsistent"
    IO_ERROR = "io_error"

    def __init__(self, code: str, message: str, path: str | None = None) -> None:
        self.code = code
        self.path = path
        where = f" ({path})" if path else ""
        super().__init__(f"[{code}] {message}{where}")


class ShapeError(MotionDistillError, ValueError):
    exit_code = 3

    def __init__(self, op: str, *shapes: tuple[int, ...], detail: str = "") -> None:
        self.op = op
        self.shapes = shapes
        rendered = " vs ".join(str(tuple(s)) for s in shapes)
        suffix = f": {detail}" if detail else ""
        super().__init__(f"{op}: incompatible shapes {rendered}{suffix}")


class NumericError(MotionDistillError, ArithmeticError):
    """A non-finite value appeared where finite values are required."""

    exit_code = 3

    def __init__(self, message: str, **diagnostics: Any) -> None:
        self.diagnostics = diagnostics
        if diagnostics:
            details = ", ".join(f"{k}={v}" for k, v in diagnostics.items())
            message = f"{message} ({details})"
        super().__init__(message)


class DivergenceError(NumericError):
    def __init__(self, message: str, history: list[Any]) -> None:
        self.history = history
        super().__init__(message, epochs=len(history))


class GPFactorizationError(NumericError):
    pass


class FrozenParameterError(MotionDistillError):
    """A model that must stay fixed was modified."""

    exit_code = 3

    def __init__(self, stage: str, expected: str, actual: str, epoch: int) -> None:
        self.stage = stage
        self.expected = expected
        self.actual = actual
        self.epoch = epoch
        super().__init__(f"{stage}: teacher parameters changed by epoch {epoch} (hash {expected[:12]} -> {actual[:12]})")


class SearchExhaustedError(MotionDistillError):
    exit_code = 3
