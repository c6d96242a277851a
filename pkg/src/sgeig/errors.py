"""Exception hierarchy shared by all modules.

Every class carries an ``exit_code`` used by the command-line front end so
that distinct failure kinds map to distinct process exit statuses.
"""


class SgeigError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class InputError(SgeigError, ValueError):
    """Invalid argument value or shape."""

    exit_code = 3


class ConfigurationError(SgeigError):
    """Inconsistent configuration (basis mismatch, inexact quadrature, ...)."""

    exit_code = 3


class SizeError(SgeigError):
    """Requested object would exceed representable sizes."""

    exit_code = 3


class PencilError(SgeigError):
    """Generalized eigenvalue problem has no finite eigenvalues."""

    exit_code = 8


class IterationError(SgeigError):
    """An underlying dense eigensolver failed to converge."""

    exit_code = 8


class NumericalError(SgeigError):
    """Numerical breakdown (indefinite covariance, GMRES breakdown, ...)."""

    exit_code = 8


class BuildError(NumericalError):
    """A preconditioner factorization is singular."""

    exit_code = 8


class ModeError(SgeigError):
    """Real-mode reduction requested on a genuinely complex state."""

    exit_code = 3


class StagnationError(SgeigError):
    """Line search failed; ``state`` and ``log`` hold the last iterate."""

    exit_code = 9

    def __init__(self, message, state=None, log=None):
        super().__init__(message)
        self.state = state
        self.log = log


class DegenerateDataError(SgeigError, ValueError):
    """Samples carry no spread (zero variance)."""

    exit_code = 3


class SamplingError(SgeigError):
    """A collocation solve failed, which invalidates the projection."""

    exit_code = 8


class BundleError(SgeigError):
    """Base class for operator bundle problems."""

    exit_code = 4


class BundleMissingFileError(BundleError):
    exit_code = 4


class BundleParseError(BundleError):
    exit_code = 5


class BundleDimensionError(BundleError):
    exit_code = 6


class BundleSymmetryError(BundleError):
    exit_code = 7
