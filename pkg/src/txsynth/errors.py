"""Exception hierarchy shared by all txsynth modules."""


class TxSynthError(Exception):
    """Base class for every error raised by this package."""


class DomainError(TxSynthError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class DegenerateDistributionError(DomainError):
    """A weight vector has no mass at all."""


class EmptyDataError(TxSynthError, ValueError):
    """An analysis was asked to summarise zero observations."""


class ConfigError(TxSynthError, ValueError):
    """A configuration file or column mapping cannot be used."""


class ParseError(TxSynthError, ValueError):
    """A single input line could not be turned into a transaction."""

    def __init__(self, line_no, message, line=None):
        self.line_no = line_no
        self.line = line
        super().__init__(f"line {line_no}: {message}")


class DataError(TxSynthError, ValueError):
    """A transaction file is malformed or violates record invariants."""


class OrderError(TxSynthError, ValueError):
    """Streamed records went backwards in time."""
