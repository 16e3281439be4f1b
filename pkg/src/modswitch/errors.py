"""Exception types raised by the modswitch library."""


class ModSwitchError(Exception):
    """Base class for all modswitch errors."""


class NoTxSchemeError(ModSwitchError):
    """An operation that needs a real constellation was given NoTx."""


class LengthError(ModSwitchError):
    """A bit count is not compatible with the scheme's bits per symbol."""


class InvalidOrderError(ModSwitchError):
    """Bits-per-symbol argument is out of range."""


class InvalidRateError(ModSwitchError):
    """A bit rate must be strictly positive."""


class InvalidPeriodError(ModSwitchError):
    """A symbol period must be strictly positive."""


class InvalidRangeError(ModSwitchError):
    """A grid or distribution range is malformed."""


class IncompleteChoiceError(ModSwitchError):
    """A scheme choice is missing for some environment state."""


class InvalidTrajectoryError(ModSwitchError):
    """An SNR trajectory is empty or not time-ascending."""


class ConfigError(ModSwitchError):
    """An experiment configuration value is invalid; message names the field."""
