"""Exception hierarchy shared by all lcare modules."""


class LcareError(Exception):
    """Base class for every error raised by this package."""


class InsufficientData(LcareError):
    pass


class DegenerateVariance(LcareError):
    pass


class ParseError(LcareError):
    """A CSV row could not be turned into a price observation."""

    def __init__(self, row, message):
        self.row = row
        super().__init__(f"row {row}: {message}")


class MalformedRow(ParseError):
    pass


class NonPositivePrice(ParseError):
    pass


class DuplicateDate(ParseError):
    pass


class NumericalError(LcareError):
    """A root search or iterative solver did not converge."""

    def __init__(self, message, residual=None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (residual={residual:.3e})"
        super().__init__(message)


class RankDeficient(LcareError):
    pass


class FitError(LcareError):
    pass


class CalibrationError(LcareError):
    pass


class AlignmentError(LcareError):
    pass


class SingularLevel(LcareError):
    pass


class ConfigMismatch(LcareError):
    pass
