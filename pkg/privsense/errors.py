"""
Exception hierarchy. Every error knows the CLI exit code it maps to:
0 ok, 1 config, 2 infeasible, 3 numerical, 4 I/O.
"""


class PrivsenseError(Exception):
    exit_code = 3


# --- Input problems (the user can fix these) ---

class ConfigError(PrivsenseError, ValueError):
    exit_code = 1


class InfeasibleError(PrivsenseError, ValueError):
    """Photon budget below the thermal floor M * n_th."""
    exit_code = 2


class DomainError(PrivsenseError, ValueError):
    """Arguments outside the domain of a closed-form expression."""
    exit_code = 3


class OutOfRangeError(DomainError):
    """Weight vector not in the range of a rank-deficient Fisher matrix."""


class UndefinedError(DomainError):
    """Quantity is 0/0, e.g. privacy of the vacuum."""


# --- Numerical failures ---

class NumericalError(PrivsenseError, RuntimeError):
    exit_code = 3


class PhysicalityError(NumericalError):
    """V + i*Omega is not positive semidefinite."""


class SingularError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class DegenerateError(NumericalError):
    pass


# --- Output ---

class OutputError(PrivsenseError):
    exit_code = 4
