"""Exception hierarchy shared by every pipeline stage.

The CLI maps these onto exit codes: ``ConfigError`` -> 2, ``DataError`` -> 3,
``NumericalError`` -> 4.
"""

from __future__ import annotations


class MacroHPIError(Exception):
    """Base class for all library errors."""


class ConfigError(MacroHPIError, ValueError):
    """Invalid configuration or usage (bad manifest, unknown names)."""


class DataError(MacroHPIError, ValueError):
    """Input data is malformed, missing or too short."""


class ParseError(DataError):
    """A series file could not be parsed.

    ``line`` is the 1-based line number of the offending row, when known.
    """

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class EmptySeriesError(ParseError):
    """A series file contains no data rows."""


class MissingIndicatorError(DataError):
    def __init__(self, indicator: str):
        self.indicator = indicator
        super().__init__(f"missing indicator {indicator}")


class PanelTooShortError(DataError):
    pass


class ZeroValueError(DataError, ZeroDivisionError):
    pass


class NumericalError(MacroHPIError, ArithmeticError):
    """A numerical procedure could not produce a result."""


class RankDeficiencyError(NumericalError):
    def __init__(self, message: str, columns: list[str] | None = None):
        self.columns = list(columns or [])
        super().__init__(message)
