"""Exception hierarchy.

Every error raised on bad input derives from :class:`MetricForgeError`, which
is also a ``ValueError`` so callers that only care about "bad input" can catch
the builtin.
"""


class MetricForgeError(ValueError):
    pass


# population
class LengthMismatch(MetricForgeError):
    pass


class NegativeProbability(MetricForgeError):
    pass


class ProbabilitySumOutOfTolerance(MetricForgeError):
    pass


class NonPositiveN(MetricForgeError):
    pass


class UnknownPoint(MetricForgeError):
    pass


class InvalidPolicy(MetricForgeError):
    pass


# rewards
class MissingEstimator(MetricForgeError):
    pass


class MissingWeight(MetricForgeError):
    pass


class EstimatorSupportGap(MetricForgeError):
    pass


class EmptySample(MetricForgeError):
    pass


# response
class UnsupportedClass(MetricForgeError):
    pass


class SupportTooLarge(MetricForgeError):
    pass


# ranking
class AbsoluteContinuityViolation(MetricForgeError):
    pass


class InsufficientAgents(MetricForgeError):
    pass


# asymmetry
class ZeroMassCovariate(MetricForgeError):
    pass


class PositivityViolation(MetricForgeError):
    pass


class ParameterOrderViolation(MetricForgeError):
    pass


# glm / datasets
class EmptyDataset(MetricForgeError):
    pass


class UnknownLevelAtPredictTime(MetricForgeError):
    pass


class SingleClassTarget(MetricForgeError):
    pass


class NonBinaryOutcome(MetricForgeError):
    pass


class WidthMismatch(MetricForgeError):
    pass


class MalformedRecord(MetricForgeError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class MissingIndicator(MetricForgeError):
    pass


class CountMismatch(MetricForgeError):
    pass
