"""Exception hierarchy shared by all subpackages."""


class WaeMdpError(Exception):
    """Base class for library errors."""


class InvalidAction(WaeMdpError, ValueError):
    pass


class NotErgodic(WaeMdpError):
    pass


class NonPositiveTemperature(WaeMdpError, ValueError):
    pass


class DimensionMismatch(WaeMdpError, ValueError):
    pass


class ShapeMismatch(DimensionMismatch):
    pass


class CycleDetected(WaeMdpError):
    pass


class NonScalarLoss(WaeMdpError, ValueError):
    pass


class EmptyBatch(WaeMdpError, ValueError):
    pass


class BudgetExceeded(WaeMdpError):
    pass


class DivergenceDetected(WaeMdpError):
    def __init__(self, message, step=None, checkpoint=None):
        super().__init__(message)
        self.step = step
        self.checkpoint = checkpoint


class DomainError(WaeMdpError, ValueError):
    pass


class InsufficientSamples(WaeMdpError):
    pass


class PolicyMismatch(WaeMdpError):
    """Local losses requested on traces that were not produced by the latent policy."""


class NotConverged(WaeMdpError):
    pass


class PropertySyntaxError(WaeMdpError, ValueError):
    pass


class RewardRangeError(WaeMdpError, ValueError):
    pass
