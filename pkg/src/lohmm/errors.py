"""Exception hierarchy shared by all modules."""


class LohmmError(Exception):
    """Base class for every error raised by this package."""


class ParseError(LohmmError):
    """Malformed input text. Carries the 1-based line and column when known."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)


class TypeCheckError(ParseError):
    """Well-formed text that violates the typed alphabet."""


class GroundingError(LohmmError):
    """A variable cannot be grounded because its type has no finite domain."""


class ModelError(LohmmError):
    """The model violates a structural requirement (normalization, glb closure, ...)."""


class DeadStateError(LohmmError):
    """No abstract transition applies to a ground state."""


class ZeroLikelihoodError(LohmmError):
    """The observation sequence cannot be generated by the model."""
