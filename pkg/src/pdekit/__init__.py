"""Classical analytic and semi-analytic solvers for ODEs, PDEs and SDEs."""

__version__ = "0.1.0"
