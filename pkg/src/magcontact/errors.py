"""Exception hierarchy shared by all modules."""


class MagContactError(Exception):
    """Base class for every error raised by the package."""


class NumericalPrecondition(MagContactError):
    """A numerical precondition of an operation does not hold."""


class NonEvaluable(MagContactError):
    """An evaluator failed or returned non-finite values inside its domain."""


class DegenerateProfile(NumericalPrecondition):
    pass


class InfeasibleSpec(NumericalPrecondition):
    """Family parameters violate the construction constraints."""


class InfeasibleParams(NumericalPrecondition):
    pass


class PoleChart(NumericalPrecondition):
    """State lies too close to a pole for the (t, phi, theta) chart."""


class ChartBreakdown(NumericalPrecondition):
    pass


class NonContactSample(NumericalPrecondition):
    """The contact function h is not positive along the sampled states."""


class CriticalLevel(NumericalPrecondition):
    """Momentum level too close to a latitude momentum.

    Attributes
    ----------
    distance : float
        Distance from the requested level to the nearest latitude momentum.
    estimate : float
        Growth indicator of the passage time near the level (see the
        raising operation).
    """

    def __init__(self, msg, distance=float("nan"), estimate=float("nan")):
        super().__init__(msg)
        self.distance = distance
        self.estimate = estimate


class MultiBand(NumericalPrecondition):
    """Several disjoint accessible bands exist for one momentum level."""

    def __init__(self, msg, bands=()):
        super().__init__(msg)
        self.bands = list(bands)


class NonClosed(NumericalPrecondition):
    pass


class NonClosedOrbit(NumericalPrecondition):
    pass


class NonMonotone(NumericalPrecondition):
    """The angle phi stops increasing along an arc."""


class UnderResolved(NumericalPrecondition):
    pass


class NotNormalized(NumericalPrecondition):
    pass


class IntegrationFailure(NumericalPrecondition):
    pass


class ConfigError(MagContactError):
    """Invalid configuration, with an optional source position."""

    def __init__(self, msg, line=None, column=None):
        if line is not None:
            msg = f"{msg} (line {line}, column {column})"
        super().__init__(msg)
        self.line = line
        self.column = column
