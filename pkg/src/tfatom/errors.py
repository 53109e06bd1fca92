"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """An iterative numerical procedure failed to converge or bracket."""


class BoxTooSmallError(NumericalError):
    """The radial box ends inside the classically allowed region.

    Raised when a bound-state count is requested at an energy whose
    classical turning point lies beyond the integration box; the fix is
    to enlarge the box.
    """


class ConfigError(ValueError):
    """Invalid or incomplete configuration (parameters, potential kind)."""


class CacheFormatError(ValueError):
    """A solution cache file is malformed or truncated."""


class CacheVersionError(CacheFormatError):
    """A solution cache file declares an unsupported schema version."""


class StateNotFoundError(LookupError):
    """A requested bound state does not exist in the spectrum."""
