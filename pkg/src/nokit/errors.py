"""Exception hierarchy shared by every module."""


class NokitError(Exception):
    """Base class for all package errors."""


class InvalidArgument(NokitError, ValueError):
    pass


class ShapeError(NokitError, ValueError):
    pass


class DtypeError(NokitError, TypeError):
    pass


class DegenerateGeometry(NokitError, ValueError):
    pass


class EmptyNeighborhood(NokitError, ValueError):
    """Raised when a query point has no input points inside its neighborhood."""

    def __init__(self, query_index, query_point):
        self.query_index = query_index
        self.query_point = query_point
        super().__init__(
            f"empty neighborhood for query point #{query_index} at {list(query_point)}"
        )


class UnsupportedLength(NokitError, ValueError):
    pass


class UnsupportedDomain(NokitError, ValueError):
    pass


class GraphError(NokitError, RuntimeError):
    pass


class NonFiniteError(NokitError, FloatingPointError):
    pass


class ContainerError(NokitError):
    """Base for container file failures; ``code`` distinguishes the cause."""

    code = "container"


class MagicError(ContainerError):
    code = "bad-magic"


class VersionError(ContainerError):
    code = "bad-version"


class ChecksumError(ContainerError):
    code = "bad-checksum"


class FormatError(ContainerError):
    code = "bad-format"


class IncompatibleCheckpoint(NokitError):
    pass


class ConfigError(NokitError, ValueError):
    """Invalid configuration; ``key`` names the offending config path."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")
