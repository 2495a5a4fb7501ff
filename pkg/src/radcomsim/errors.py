"""Exception types raised across the simulator."""


class RadcomError(Exception):
    """Base class for all simulator errors."""


class InvalidParameterError(RadcomError, ValueError):
    pass


class SceneValidationError(RadcomError, ValueError):
    """Raised with the complete list of scene invariant violations."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class SingularGeometryError(RadcomError, ValueError):
    pass


class AmbiguousDelayError(RadcomError, ValueError):
    """A path delay falls outside the unambiguous window or the cyclic prefix."""


class UndefinedPaprError(RadcomError, ValueError):
    pass


class DimensionMismatchError(RadcomError, ValueError):
    pass


class MissingLinkError(RadcomError, ValueError):
    pass


class GridTooLargeError(RadcomError, ValueError):
    pass


class NoDetectionError(RadcomError):
    pass


class WidthUnboundedError(RadcomError):
    """The -3 dB crossing lies outside the evaluated grid."""


class InsufficientResolutionError(RadcomError):
    """Grid cells are too coarse to resolve the mainlobe."""


class UndefinedSidelobeError(RadcomError):
    pass


class UnobservableVelocityError(RadcomError):
    pass


class SingularEqualizerError(RadcomError, ZeroDivisionError):
    def __init__(self, index):
        self.index = tuple(int(i) for i in index)
        super().__init__(f"zero channel entry at (k, n) = {self.index}")


class ConfigError(RadcomError):
    """Configuration problem; ``field`` is a dotted path, ``line`` 1-based when known."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
