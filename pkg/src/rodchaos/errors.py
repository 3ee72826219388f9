"""Exception types raised by the library."""


class RodChaosError(Exception):
    """Base class for all library errors."""


class ParameterError(RodChaosError, ValueError):
    """Invalid or out-of-range parameter values."""


class SingularityError(RodChaosError, ArithmeticError):
    """The Euler chart degenerates (``|sin(theta)|`` below the guard)."""


class AlignmentError(RodChaosError, ArithmeticError):
    """Force and field are aligned: the radicand ``mu - 2 lambda_bar p_psi`` is not positive."""


class ConvergenceError(RodChaosError, RuntimeError):
    """An iterative solver, quadrature or integrator failed to converge.

    Parameters
    ----------
    message : str
        Human readable description.
    residual : float, optional
        Final residual of the failed iteration, if meaningful.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NoSignChangeError(ConvergenceError):
    """A root search was given a bracket without a sign change.

    Parameters
    ----------
    message : str
    values : tuple of float
        Function values at the bracket ends.
    """

    def __init__(self, message, values=None):
        super().__init__(message)
        self.values = values
