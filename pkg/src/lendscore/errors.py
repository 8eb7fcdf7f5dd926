"""Exception hierarchy.

Every error carries the CLI exit code it maps to: data problems exit 2,
training problems exit 3.
"""


class LendscoreError(Exception):
    exit_code = 2


class DataError(LendscoreError):
    exit_code = 2


class ZeroIncome(DataError):
    pass


class SchemaError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class EmptyInput(DataError):
    pass


class RateOutOfDomain(DataError):
    pass


class NoSignChange(DataError):
    """NPV has the same sign at both ends of the rate bracket.

    ``total_loss`` is set when the loss is worse than the lower bound can
    express (NPV negative at both bounds); callers then use ``floor_rate``.
    """

    def __init__(self, message, total_loss=False, floor_rate=None):
        super().__init__(message)
        self.total_loss = total_loss
        self.floor_rate = floor_rate


class NonConvergence(DataError):
    pass


class OneClassOnly(DataError):
    pass


class TooFewMinority(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class TaskMismatch(DataError):
    pass


class VersionMismatch(DataError):
    pass


class ChecksumMismatch(DataError):
    pass


class IoError(DataError):
    pass


class TrainingError(LendscoreError):
    exit_code = 3


class NonFiniteGradient(TrainingError):
    def __init__(self, step, family=None):
        self.step = step
        self.family = family
        where = f" in {family}" if family else ""
        super().__init__(f"non-finite gradient{where} at step {step}")
