"""Exception hierarchy shared by all modules."""


class KmsProbeError(Exception):
    pass


class PreconditionError(KmsProbeError, ValueError):
    pass


class OutOfDomainError(KmsProbeError, ValueError):
    pass


class AssumptionError(KmsProbeError, ValueError):
    """A modelling hypothesis (e.g. stationary volume element) does not hold."""


class UnsupportedKernelError(KmsProbeError, TypeError):
    pass


class NumericalError(KmsProbeError, RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConvergenceError(NumericalError):
    def __init__(self, message, errors=None):
        super().__init__(message, residual=None if errors is None else max(errors))
        self.errors = errors


class CoverageError(NumericalError):
    pass


class PerturbativityError(NumericalError):
    pass
