"""Exception hierarchy shared across the package.

The CLI maps ConfigurationError to exit code 2 and TrainingError to exit
code 3; everything else is a bug.
"""


class ProbembError(Exception):
    """Base class for all package errors."""


class DomainError(ProbembError, ValueError):
    """A mathematical argument is outside the function's domain."""


class ContractError(ProbembError, ValueError):
    """An API precondition was violated (shapes, ranges, unit norms)."""


class NonFiniteError(ContractError):
    """A NaN or Inf entered a computation that requires finite values."""


class DegenerateInputError(ProbembError, ValueError):
    """Input is degenerate for the requested operation (e.g. zero-norm
    vector fed to a cosine or normalization step)."""


class ConfigurationError(ProbembError, ValueError):
    """Invalid or inconsistent run configuration."""


class TrainingError(ProbembError, RuntimeError):
    """Training diverged or failed; message identifies stage/epoch/batch."""


class NumericalError(ProbembError, RuntimeError):
    """An iterative numerical routine failed to converge."""
