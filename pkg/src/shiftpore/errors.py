"""Exception hierarchy shared by all modules."""


class ShiftPoreError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ShiftPoreError, ValueError):
    """Invalid user-supplied parameters or case description."""


class GeometryError(ShiftPoreError):
    """Crack/mesh geometry that the surrogate construction cannot handle."""


class UnsupportedConfigurationError(ConfigurationError):
    """Valid input that falls outside what the simulator supports."""


class AssemblyError(ShiftPoreError):
    """Failure while building sparse operators."""


class UsageError(ShiftPoreError, ValueError):
    """API called with incompatible arguments."""


class NumericalError(ShiftPoreError, RuntimeError):
    """Linear solve failure, step-size underflow and similar."""
