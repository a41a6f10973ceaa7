"""Exception hierarchy shared by every module."""


class LtrError(Exception):
    """Base class for all errors raised by ltrstack."""


class ConfigurationError(LtrError, ValueError):
    pass


class ShapeError(LtrError, ValueError):
    pass


class NumericError(LtrError, ArithmeticError):
    pass


class ValidationError(LtrError, ValueError):
    pass


class DegenerateInputError(LtrError, ValueError):
    """Raised when an all-pairwise computation receives fewer than two listings."""


class ParseError(LtrError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class GenerationError(LtrError, RuntimeError):
    pass


class TrainingError(LtrError, RuntimeError):
    pass


class DivergenceError(TrainingError):
    def __init__(self, step: int, loss: float):
        super().__init__(f"non-finite loss {loss!r} at step {step}")
        self.step = step
        self.loss = loss
