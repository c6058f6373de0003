"""Exception hierarchy shared across the package.

Input problems (bad files, bad configuration) and numerical failures
(degenerate geometry, non-convergence) are kept in separate branches so
the CLI can map them onto distinct exit codes.
"""


class IbimError(Exception):
    """Base class for all package errors."""


class InputError(IbimError):
    """User-supplied data or configuration is invalid (CLI exit code 1)."""


class PqrParseError(InputError):
    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class EmptyMoleculeError(InputError):
    pass


class ValidationError(InputError):
    pass


class ConfigError(InputError):
    pass


class NumericalError(IbimError):
    """The computation itself failed (CLI exit code 2)."""


class DomainTooSmallError(NumericalError):
    pass


class DegenerateGradientError(NumericalError):
    pass


class GeometryError(NumericalError):
    pass


class SolverConvergenceError(NumericalError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals) if residuals is not None else []
