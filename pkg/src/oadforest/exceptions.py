"""Exception hierarchy shared across the package."""


class OADFError(Exception):
    """Base class for all errors raised by oadforest."""


class InputError(OADFError, ValueError):
    """Invalid argument or inconsistent input data."""


class FormatError(OADFError, ValueError):
    """A file does not conform to its declared format.

    ``line`` is the 1-based line number of the offending line for text
    formats, or ``None`` when it does not apply (binary model files).
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class AlignmentError(InputError):
    """Context rows do not line up with the frames of a stream."""


class DegenerateError(OADFError, ArithmeticError):
    """A numerical quantity collapsed (zero bandwidth, vanishing eigengap).

    Callers inside the forest catch this and fall back to the entropy
    objective for the node being split.
    """


class ConvergenceError(OADFError, ArithmeticError):
    """An iterative solver did not converge within its sweep budget."""
