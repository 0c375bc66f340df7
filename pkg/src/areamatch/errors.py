"""Exception hierarchy shared across the package."""


class AreaMatchError(Exception):
    """Base class for all package errors."""


class DegeneratePolygon(AreaMatchError, ValueError):
    pass


class DomainError(AreaMatchError, ValueError):
    """A cost function received an argument outside its domain."""


class ConfigError(AreaMatchError, ValueError):
    pass


class IoError(AreaMatchError, OSError):
    pass


class FormatError(AreaMatchError, ValueError):
    """Malformed input file. ``location`` is a JSON-pointer-style path when known."""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class EmptyMapError(AreaMatchError, ValueError):
    pass


class EmptyGraphError(AreaMatchError, ValueError):
    pass


class NoHypothesesError(AreaMatchError, RuntimeError):
    pass


class MatchFailed(AreaMatchError, RuntimeError):
    """The pipeline produced no usable transform.

    ``diagnostics`` holds per-stage counts (areas, matched pairs, hypotheses).
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        self.diagnostics = dict(diagnostics or {})
        detail = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
        super().__init__(f"{message} ({detail})" if detail else message)


class SingleAreaWarning(UserWarning):
    """Segmentation produced fewer than two areas."""
