"""
Exception types raised by the plume rise toolkit.

Every error carries a stable ``cause`` string that batch processing writes into
failure records.
"""


class PlumeRiseError(Exception):
    """Base class for all toolkit errors."""

    cause = "error"


class ConfigError(PlumeRiseError):
    cause = "config_error"


class DegenerateGeometry(PlumeRiseError):
    cause = "degenerate_geometry"


class NegativeBuoyancy(PlumeRiseError):
    cause = "negative_buoyancy"


class PnmError(PlumeRiseError):
    cause = "pnm_error"


class MalformedHeader(PnmError):
    cause = "malformed_header"


class TruncatedPayload(PnmError):
    cause = "truncated_payload"


class UnsupportedMaxval(PnmError):
    cause = "unsupported_maxval"


class EmptyPlume(PlumeRiseError):
    cause = "empty_plume"


class FitDiverged(PlumeRiseError):
    cause = "fit_diverged"


class NotLeveled(PlumeRiseError):
    cause = "not_leveled"


class VerticalPlume(PlumeRiseError):
    cause = "vertical_plume"


class DimensionMismatch(PlumeRiseError):
    cause = "dimension_mismatch"


class OutOfFrame(PlumeRiseError):
    cause = "out_of_frame"


class WindParseError(PlumeRiseError):
    cause = "wind_parse_error"

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class NonMonotonicTimestamps(PlumeRiseError):
    cause = "non_monotonic_timestamps"


class NoWindData(PlumeRiseError):
    cause = "no_wind_data"


class MissingCounterpart(PlumeRiseError):
    cause = "missing_counterpart"
