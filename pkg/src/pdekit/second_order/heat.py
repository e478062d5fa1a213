"""Heat kernel and the Poisson formula for the Cauchy problem of the heat equation."""

from __future__ import annotations

import math

import numpy as np

from ..errors import DomainError
from ..quadrature import QuadratureSpec, gauss_hermite_nd, gauss_legendre


def heat_kernel(sigma: float, x, y) -> np.ndarray:
    """``(4 pi sigma)^(-n/2) exp(-|y - x|^2 / (4 sigma))``; ``y`` may be a batch."""
    if sigma <= 0:
        raise DomainError("heat kernel needs sigma > 0")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    n = x.size
    d2 = np.sum((y.reshape(-1, n) - x) ** 2, axis=-1)
    return (4.0 * math.pi * sigma) ** (-n / 2.0) * np.exp(-d2 / (4.0 * sigma))


def heat_kernel_mass(sigma: float, x, nodes: int = 64, width: float = 12.0) -> float:
    """``int P(sigma, x, y) dy`` by tensor Gauss-Legendre on ``|y_i - x_i| <= width sqrt(sigma)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = x.size
    half = width * math.sqrt(sigma)
    total = 0.0
    grids = [gauss_legendre(xi - half, xi + half, nodes) for xi in x]
    mesh = np.meshgrid(*[g[0] for g in grids], indexing="ij")
    wmesh = np.meshgrid(*[g[1] for g in grids], indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    w = np.prod(np.stack([m.ravel() for m in wmesh], axis=-1), axis=-1)
    total = float(np.sum(w * heat_kernel(sigma, x, pts)))
    return total


def heat_solve(phi, t: float, x, quad: QuadratureSpec | None = None,
               diffusivity: float = 1.0) -> float:
    """Solution of ``u_t = a^2 Delta u``, ``u(0) = phi`` at ``(t, x)``.

    Gauss-Hermite quadrature after ``xi = x + 2 a sqrt(t) z``.  ``phi`` maps
    an ``(N, n)`` array to ``(N,)`` values.  At ``t = 0`` returns ``phi(x)``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if t < 0:
        raise DomainError(f"heat_solve needs t >= 0, got {t}")
    if t == 0:
        return float(np.asarray(phi(x[None]), dtype=float).ravel()[0])
    quad = quad or QuadratureSpec("gauss-hermite", (40,))
    if quad.rule != "gauss-hermite":
        raise DomainError("heat_solve uses a Gauss-Hermite rule")
    n = x.size
    z, w = gauss_hermite_nd(int(quad.nodes[0]), n)
    pts = x + 2.0 * diffusivity * math.sqrt(t) * z
    vals = np.asarray(phi(pts), dtype=float).ravel()
    return float(math.pi ** (-n / 2.0) * np.sum(w * vals))


def heat_solve_grid(phi, times, xs, quad: QuadratureSpec | None = None, diffusivity: float = 1.0):
    """``heat_solve`` on a (t, x) tensor grid in one space dimension, as a SolutionTable."""
    from ..core import SolutionTable
    times = np.asarray(times, dtype=float)
    xs = np.asarray(xs, dtype=float)
    vals = np.array([[heat_solve(phi, t, [x], quad, diffusivity) for x in xs] for t in times])
    return SolutionTable((("t", times), ("x", xs)), vals, "heat-poisson-formula",
                         {"diffusivity": diffusivity})
