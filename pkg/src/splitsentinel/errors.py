"""Exception hierarchy shared by every stage of the pipeline."""


class SplitSentinelError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(SplitSentinelError, ValueError):
    """Array dimensions do not match what an operation expects."""


class SchemaError(SplitSentinelError, ValueError):
    """Feature schemas disagree (names, order or width)."""


class DataError(SplitSentinelError, ValueError):
    """Input data is unusable, e.g. contains NaN or Inf."""


class ConfigError(SplitSentinelError, ValueError):
    """A configuration value violates its invariant."""


class NoModelError(SplitSentinelError, RuntimeError):
    """No group model is available to score with."""


class UndefinedAUROCError(SplitSentinelError, ValueError):
    """AUROC needs at least one positive and one negative label."""


class ParseError(SplitSentinelError, ValueError):
    """A record in an input file could not be parsed."""

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
