"""Exception hierarchy shared by the pipeline stages."""


class GlsegError(Exception):
    """Base class for all package errors."""


class ContractError(GlsegError, ValueError):
    """An argument violated an operation's precondition."""


class ImageIOError(GlsegError, OSError):
    """An image or grid file could not be read or written."""

    def __init__(self, path, reason):
        self.path = str(path)
        self.reason = reason
        super().__init__(f"{self.path}: {reason}")


class IngestionError(GlsegError):
    """An externally supplied label or edge map failed validation."""

    def __init__(self, message, region_id=None):
        self.region_id = region_id
        super().__init__(message)


class ModelError(GlsegError):
    """A statistical model could not be fitted to the given regions."""


class SolverError(GlsegError):
    """The eigensolver failed to meet its residual tolerance."""

    def __init__(self, message, residuals=None):
        self.residuals = residuals
        super().__init__(message)
