"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: ConfigurationError and
UnsupportedOperationError -> 2, NumericalFailureError (and subclasses) -> 3,
OSError -> 4.
"""


class ContractViolationError(ValueError):
    """An argument breaks a documented precondition (shape, range, type)."""


class ConfigurationError(ValueError):
    """A run configuration cannot be resolved (unknown task, bad key, ...)."""


class UnsupportedOperationError(ConfigurationError):
    """A valid-looking request the model kind cannot honor."""


class NumericalFailureError(RuntimeError):
    """A computation produced NaN/Inf or otherwise lost numerical meaning.

    ``context`` names the failing operation; ``partial_trajectory`` is set
    when a rollout fails midway (the records integrated so far).
    """

    def __init__(self, message, context=None, partial_trajectory=None):
        super().__init__(message)
        self.context = context
        self.partial_trajectory = partial_trajectory


class SingularityError(NumericalFailureError):
    """A singular configuration: coincident gravitating particles or an
    ill-conditioned velocity Hessian in the Euler-Lagrange solve."""
