"""Exception hierarchy shared by all simulator modules."""


class SimError(Exception):
    """Base class for every error raised by nvmsim."""


# trace-io
class TraceError(SimError):
    pass


class MalformedLine(TraceError):
    pass


class MisalignedAddress(TraceError):
    pass


class DataLengthMismatch(TraceError):
    pass


class SinkUnavailable(SimError):
    pass


class ZeroBlockSize(SimError, ValueError):
    pass


# memory-model
class AddressOutOfRange(SimError):
    pass


class IllegalCommandForState(SimError):
    pass


class TimingViolation(SimError):
    """A command was issued before its earliest legal cycle. Always a simulator bug."""


class CrossSubarrayClone(SimError):
    pass


# controller
class UnmappedAddress(SimError):
    pass


class QueueFull(SimError):
    pass


class MaxCyclesExceeded(SimError):
    pass


# wear-energy
class LengthMismatch(SimError, ValueError):
    pass


# cim-engine
class CiMError(SimError):
    pass


class RowOutOfRange(CiMError):
    pass


class TooFewOperands(CiMError):
    pass


class RotationOutOfRange(CiMError):
    pass


class CiMProgramError(CiMError):
    def __init__(self, pc, cause):
        super().__init__(f"instruction {pc}: {cause}")
        self.pc = pc
        self.cause = cause


# cli-config
class ConfigError(SimError):
    def __init__(self, message, lineno=None, path=None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if lineno is not None:
            where += f"{lineno}:"
        super().__init__(f"{where} {message}" if where else message)
        self.lineno = lineno
        self.path = path


class ParseError(ConfigError):
    pass


class UnknownKey(ConfigError):
    pass


class ValidationError(ConfigError):
    pass
