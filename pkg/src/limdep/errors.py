"""Exception hierarchy.

Errors are grouped by pipeline stage so the command line front end can map
them onto exit codes (``DataError`` -> 3, ``ModelingError`` -> 4).
"""


class LimdepError(Exception):
    """Base class for every error raised by this package."""


class DataError(LimdepError):
    """Problem with input data or a synthetic specification."""


class ModelingError(LimdepError):
    """Problem while fitting, predicting or evaluating models."""


# data ingestion
class MissingColumn(DataError):
    pass


class NonNumericTarget(DataError):
    pass


class NegativeTarget(DataError):
    pass


class EmptyFile(DataError):
    pass


class MissingValues(DataError):
    pass


class InvalidDataset(DataError):
    pass


class CannotStratify(DataError):
    pass


class DegenerateSpec(DataError):
    pass


class NotSynthetic(DataError):
    pass


class RequiresLatents(DataError):
    pass


# numerical kernel
class ZeroVariance(ModelingError):
    pass


class ZeroMean(ModelingError):
    pass


class ZeroNoise(ModelingError):
    pass


class NegativeSnr(ModelingError):
    pass


class EmptyPositiveSubset(ModelingError):
    pass


class OutOfRange(ModelingError):
    pass


# learners / composer
class TooFewRows(ModelingError):
    pass


class ConstantTarget(ModelingError):
    pass


class SchemaMismatch(ModelingError):
    pass


class PositiveSubsetTooSmall(ModelingError):
    pass
