"""Exception hierarchy shared by every ssimgen module."""


class SsimGenError(Exception):
    """Base class for all library errors."""


class InputError(SsimGenError, ValueError):
    """Bad input: maps to CLI exit code 2."""


class NumericalError(SsimGenError, ArithmeticError):
    """Numerical failure: maps to CLI exit code 3."""


# imgio
class MalformedHeader(InputError):
    pass


class TruncatedData(InputError):
    pass


class UnsupportedMaxval(InputError):
    pass


class IoFailure(InputError, OSError):
    pass


class InvalidParam(InputError):
    pass


class DimensionMismatch(InputError):
    pass


# ssim
class BlockTooSmall(InputError):
    pass


class NonCenteredBlock(InputError):
    pass


class WindowTooLarge(InputError):
    pass


class NegativeRadicand(NumericalError):
    pass


# kernels / mmd
class NotSymmetric(InputError):
    pass


class NoConvergence(NumericalError):
    pass


class SampleTooSmall(InputError):
    pass


# autodiff
class ShapeMismatch(InputError):
    pass


class DomainError(NumericalError):
    pass


class NonFiniteValue(NumericalError):
    pass


class NotScalarOutput(InputError):
    pass


# models
class ConfigError(InputError):
    pass


class NonFiniteLoss(NumericalError):
    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class IncompatibleCheckpoint(InputError):
    pass
