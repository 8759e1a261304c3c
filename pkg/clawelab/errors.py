class ClaweLabError(Exception):
    """Base class for every error raised by clawelab."""


class InvalidStateError(ClaweLabError, ValueError):
    pass


class ChannelError(ClaweLabError, ValueError):
    pass


class CircuitError(ClaweLabError, ValueError):
    pass


class JobTooLargeError(ClaweLabError, ValueError):
    pass


class MitigationError(ClaweLabError, ValueError):
    """A calibration or extrapolation step could not produce a value."""


class UninformativeCalibratorError(MitigationError):
    """The ideal rescaled calibration observable sits at the ITS value."""


class NoiseFloorError(MitigationError):
    """Contamination is non-positive: the calibrator is buried in the noise floor."""


class ConfigError(ClaweLabError, ValueError):
    pass


class CalibrationWarning(UserWarning):
    pass


class ConvergenceWarning(UserWarning):
    pass
