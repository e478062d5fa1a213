"""Poisson kernel of a ball: Dirichlet data to harmonic function, and Neumann recovery."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import DomainError
from ..quadrature import QuadratureSpec, gauss_legendre, sphere_area, sphere_rule_nd

KINDS = ("dirichlet", "neumann-recovery")


@dataclass(frozen=True)
class BallProblem:
    """Boundary data ``lam`` (maps ``(N, n)`` sphere points to values) on ``S(center, r)``."""

    lam: Callable
    n: int = 3
    r: float = 1.0
    center: tuple = None
    kind: str = "dirichlet"

    def __post_init__(self):
        if self.n < 3:
            raise DomainError("ball problems are implemented for n >= 3")
        if self.r <= 0:
            raise DomainError("radius must be positive")
        if self.kind not in KINDS:
            raise DomainError(f"kind must be one of {KINDS}")
        c = np.zeros(self.n) if self.center is None else np.asarray(self.center, dtype=float)
        if c.shape != (self.n,):
            raise DomainError("center has the wrong dimension")
        object.__setattr__(self, "center", tuple(c))

    @property
    def c(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)


def _rule(p: BallProblem, quad: QuadratureSpec | None):
    n_nodes = int(quad.nodes[0]) if quad is not None else 64
    return sphere_rule_nd(p.n, n_nodes)


def poisson_kernel(x, y, r: float, n: int, center=None) -> np.ndarray:
    """``(r^2 - |y|^2) / (|S_1| r |x - y|^n)`` for boundary points ``x`` (batch) and interior ``y``."""
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    yc = np.asarray(y, dtype=float) - c
    xc = np.asarray(x, dtype=float) - c
    d = np.linalg.norm(xc - yc, axis=-1)
    return (r * r - yc @ yc) / (sphere_area(n) * r * d**n)


def poisson_kernel_sphere_integral(y, r: float = 1.0, n: int = 3, quad: QuadratureSpec | None = None,
                                   center=None) -> float:
    """``int_{S(center, r)} P(x, y) dS_x``; equals 1 for interior ``y``."""
    p = BallProblem(lambda x: np.ones(len(x)), n, r, center)
    return ball_dirichlet_solve(p, y, quad)


def ball_dirichlet_solve(p: BallProblem, y, quad: QuadratureSpec | None = None) -> float:
    """Harmonic extension of the boundary data to the interior point ``y``."""
    y = np.asarray(y, dtype=float)
    if y.shape != (p.n,):
        raise DomainError("point has the wrong dimension")
    if np.linalg.norm(y - p.c) >= p.r:
        raise DomainError(f"point {y.tolist()} is not strictly inside the ball")
    omega, w = _rule(p, quad)
    xs = p.c + p.r * omega
    dS = w * p.r ** (p.n - 1)
    vals = np.asarray(p.lam(xs), dtype=float).ravel()
    return float(np.sum(dS * poisson_kernel(xs, y, p.r, p.n, p.c) * vals))


def sphere_mean(p: BallProblem, quad: QuadratureSpec | None = None) -> float:
    omega, w = _rule(p, quad)
    vals = np.asarray(p.lam(p.c + p.r * omega), dtype=float).ravel()
    return float(np.sum(w * vals) / np.sum(w))


def ball_neumann_recover(p: BallProblem, y, quad: QuadratureSpec | None = None,
                         radial_nodes: int = 16, mean_tol: float = 1e-8) -> float:
    """Harmonic ``h`` with normal derivative ``lam`` on the sphere and ``h(center) = 0``.

    With ``phi`` the harmonic extension of ``lam``,
    ``h(y) = r int_0^1 phi(center + s (y - center)) / s ds``.  Gauss-Legendre
    nodes avoid ``s = 0`` where the integrand tends to a directional derivative.
    """
    y = np.asarray(y, dtype=float)
    scale = max(1.0, float(np.max(np.abs(p.lam(p.c + p.r * _rule(p, quad)[0])))))
    mean = sphere_mean(p, quad)
    if abs(mean) > mean_tol * scale:
        raise DomainError(f"Neumann data must have zero sphere mean, got {mean:.3e}")
    if np.linalg.norm(y - p.c) >= p.r:
        raise DomainError(f"point {y.tolist()} is not strictly inside the ball")
    s, ws = gauss_legendre(0.0, 1.0, radial_nodes)
    d = y - p.c
    vals = np.array([ball_dirichlet_solve(p, p.c + si * d, quad) for si in s])
    return float(p.r * np.sum(ws * vals / s))
