"""Exception hierarchy. Subcommands map these onto process exit codes."""


class SpillvarError(Exception):
    """Base class for all package errors."""


class PanelFormatError(SpillvarError):
    """Malformed input table; carries the offending 1-based line number."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class EmptyPanelError(SpillvarError):
    """Too few common dates across tickers to build a panel."""


class DomainError(SpillvarError):
    """Input outside an operation's mathematical domain."""


class SingularDesignError(SpillvarError):
    """Regressor matrix is rank deficient."""


class EstimationError(SpillvarError):
    """Optimizer could not produce a feasible fit."""


class ValidationError(SpillvarError):
    """Run configuration failed validation."""
