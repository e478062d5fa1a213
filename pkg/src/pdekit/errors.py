"""Exception hierarchy shared by all solvers."""


class SolverError(Exception):
    """Base class for every error raised by a pdekit solver."""


class DomainError(SolverError, ValueError):
    """Arguments lie outside the region where an operation is defined."""


class DivergenceError(SolverError):
    """An integrator produced a non-finite state.

    ``last_node`` is the index of the last finite node and ``last_state`` its value.
    """

    def __init__(self, message, last_node=None, last_state=None):
        super().__init__(message)
        self.last_node = last_node
        self.last_state = last_state


class NonConvergenceError(SolverError):
    """An iteration stopped without meeting its tolerance; ``gap`` is the last gap."""

    def __init__(self, message, gap=None, iterations=None):
        super().__init__(message)
        self.gap = gap
        self.iterations = iterations


class IntegrityError(SolverError):
    """A computed object violates one of its structural invariants."""


class CausticError(SolverError):
    """Characteristic inversion failed; ``location`` is the offending (t, x)."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class HypothesisError(SolverError):
    """A theorem hypothesis (contraction ratio, commutation, ...) does not hold."""


class UnsupportedError(SolverError):
    """The input is well formed but outside what the solver handles."""
