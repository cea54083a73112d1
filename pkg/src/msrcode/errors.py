"""Exception hierarchy shared by every msrcode module."""


class MsrError(Exception):
    """Base class for all library errors."""


class FieldMismatchError(MsrError, ValueError):
    """Operands belong to different prime fields."""


class ParamError(MsrError, ValueError):
    pass


class ConfigError(MsrError, ValueError):
    pass


class SingularMatrix(MsrError, ArithmeticError):
    pass


class ConstructionFailed(MsrError):
    """No MDS-verified code was found within the allowed attempts."""

    def __init__(self, message, attempts=0):
        super().__init__(message)
        self.attempts = attempts


class RepairInfeasible(MsrError):
    """Repair vectors failed the reconstruction rank check on every attempt."""

    def __init__(self, message, attempts=0):
        super().__init__(message)
        self.attempts = attempts


class CorruptCodeError(MsrError):
    pass


class StateError(MsrError):
    pass


class InsufficientShards(MsrError):
    pass


class DigestMismatch(MsrError):
    pass


class FormatError(MsrError):
    """Malformed or mismatched on-disk shard/descriptor data."""
