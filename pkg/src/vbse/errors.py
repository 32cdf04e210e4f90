"""Exception types shared across the package."""


class VbseError(Exception):
    """Base class for all package-specific errors."""


class ContractViolationError(VbseError, ValueError):
    """An input violates a documented precondition (shape, Hermiticity, ...)."""


class DegenerateBasisError(VbseError, ValueError):
    """Columns passed to an orthonormalization are (numerically) rank deficient."""


class CapacityError(VbseError, ValueError):
    """An encoding was requested with too few levels or qubits."""


class ResourceLimitError(VbseError, RuntimeError):
    """A dense or exact computation would exceed the configured size cap."""


class HermiticityError(VbseError, ValueError):
    """An operator or expectation value is not Hermitian/real within tolerance."""


class StateCorruptionError(VbseError, RuntimeError):
    """A state-derived quantity (norm, density matrix) left its valid domain."""


class ConvergenceError(VbseError, RuntimeError):
    """An iterative solve failed; ``best`` carries the best iterate found."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class StiffnessError(VbseError, RuntimeError):
    """An ODE integration stalled; ``last_state`` carries the last good state."""

    def __init__(self, message, last_state=None, partial=None):
        super().__init__(message)
        self.last_state = last_state
        self.partial = partial


class ConfigError(VbseError, ValueError):
    """An experiment config failed validation; ``key_path`` names the bad key."""

    def __init__(self, message, key_path=""):
        super().__init__(message)
        self.key_path = key_path
