"""Exception hierarchy shared by every module."""


class TwoTicketError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(TwoTicketError, ValueError):
    """Invalid model, scorer, population or experiment configuration.

    ``errors`` holds ``(field_path, message)`` pairs when the error comes from
    validating a config tree, so every problem can be reported at once.
    """

    def __init__(self, message, errors=None):
        self.errors = list(errors or [])
        if self.errors:
            detail = "\n".join(f"  {path}: {msg}" for path, msg in self.errors)
            message = f"{message}\n{detail}"
        super().__init__(message)


class DiagnosticError(TwoTicketError, ValueError):
    """A diagnostic could not be computed from the data it was given."""


class ContractError(TwoTicketError):
    """A documented precondition of an operation was violated by the caller."""


class PropertyViolation(TwoTicketError):
    """A modelling property (theorem, lemma, invariant) failed a check."""


class LemmaViolation(PropertyViolation):
    """Threshold consistency failed although its sufficient condition holds."""


class DegenerateSplitError(TwoTicketError):
    """A train/test split lacks the labels or groups needed to score it."""


class ParseError(TwoTicketError, ValueError):
    """A score table or spec string could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
