"""Exception types shared across the package."""


class WiaeError(Exception):
    """Base class for all library errors."""


class ValidationError(WiaeError):
    """Invalid input data, configuration, or call preconditions."""


class DivergenceError(WiaeError):
    """Non-finite value encountered during optimization.

    Carries the step index at which the blow-up was detected and, when
    raised from a training loop, the partial report accumulated so far.
    """

    def __init__(self, message, step=None, report=None):
        super().__init__(message)
        self.step = step
        self.report = report
