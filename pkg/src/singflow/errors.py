"""Exception hierarchy shared across the package."""


class SingflowError(Exception):
    """Base class for every error raised by singflow."""


class ConfigError(SingflowError):
    """Invalid or unreadable run configuration."""


class NumericalError(SingflowError):
    """Base class for runtime numerical failures."""


class SingularJacobian(NumericalError):
    pass


class NotASingularity(NumericalError):
    pass


class StepLimitExceeded(NumericalError):
    pass


class BlowUp(NumericalError):
    """The trajectory left the escape radius."""


class NearSingularity(NumericalError):
    """A normal frame was requested where the field is (nearly) zero."""


class NoCrossing(NumericalError):
    pass


class AmbiguousCrossing(NumericalError):
    pass


class OutOfDomain(NumericalError):
    pass


class OutOfChart(NumericalError):
    pass


class DegenerateExtension(NumericalError):
    pass


class TauNotFound(NumericalError):
    pass


class NotConverged(NumericalError):
    pass
