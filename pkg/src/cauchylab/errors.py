"""Exception hierarchy shared by all modules."""


class LabError(Exception):
    """Base class for every error raised by cauchylab."""


class DomainError(LabError, ValueError):
    pass


class BoundaryError(LabError, ValueError):
    """A point sits on a boundary where a map or stencil is undefined."""


class ConfigError(LabError, ValueError):
    pass


class OrderError(LabError, ValueError):
    pass


class DataError(LabError, ValueError):
    pass


class UnsupportedError(LabError, NotImplementedError):
    pass


class NonConvergenceError(LabError, RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class StepError(LabError, RuntimeError):
    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


class BlowUpError(LabError, RuntimeError):
    def __init__(self, message, last_finite=None, location=None):
        super().__init__(message)
        self.last_finite = last_finite
        self.location = location


class ExtensionError(LabError, RuntimeError):
    pass
