"""Exception hierarchy.  Each class maps to one CLI exit code."""


class GDLError(Exception):
    exit_code = 3


class ValidationError(GDLError):
    """Bad user input: configs, presets, parameter ranges."""
    exit_code = 2


class ConfigError(ValidationError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class StructureError(ValidationError):
    pass


class CapacityError(ValidationError):
    pass


class ParameterError(ValidationError):
    pass


class NumericError(GDLError):
    """A numeric contract was violated during a computation."""
    exit_code = 3


class ContractError(NumericError):
    pass


class SingularityError(NumericError):
    pass


class IntegrationError(NumericError):
    pass


class QuadratureError(NumericError):
    pass


class NonPrimitiveError(NumericError):
    pass


class MixingTimeoutError(NumericError):
    pass
