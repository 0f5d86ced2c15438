"""Exception types shared across the calibration toolkit."""


class CalibrationError(Exception):
    """Base class for every error raised by this package."""


class UnsupportedGeometryError(CalibrationError, ValueError):
    """Leg geometry outside the supported twist configuration.

    The closed-form foot angular-velocity map is only valid for the
    standard twist set (0, -90 deg, 0, 0); any other geometry must fail
    loudly instead of silently returning a wrong answer.
    """


class IllConditionedError(CalibrationError, ValueError):
    """A covariance matrix is numerically singular for the requested operation."""


class RankDeficiencyError(IllConditionedError):
    """Excitation is missing along one or more axes entirely.

    ``axis`` names the weakest excitation axis ('x', 'y' or 'z').
    """

    def __init__(self, message: str, axis: str):
        super().__init__(message)
        self.axis = axis
