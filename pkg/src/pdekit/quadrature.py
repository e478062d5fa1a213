"""Quadrature rules used by the integral-representation solvers.

Gauss nodes come from ``numpy.polynomial``; the rest is composition.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import gamma, pi

import numpy as np
from scipy.special import roots_jacobi

from .errors import DomainError

RULES = ("trapezoid", "gauss-legendre", "gauss-hermite", "sphere")


@dataclass(frozen=True)
class QuadratureSpec:
    rule: str = "gauss-legendre"
    nodes: tuple = (64,)

    def __post_init__(self):
        if self.rule not in RULES:
            raise DomainError(f"unknown quadrature rule {self.rule!r}; expected one of {RULES}")
        if any(int(n) < 2 for n in self.nodes):
            raise DomainError("every node count must be >= 2")


@lru_cache(maxsize=64)
def _leggauss(n):
    return np.polynomial.legendre.leggauss(n)


@lru_cache(maxsize=64)
def _hermgauss(n):
    return np.polynomial.hermite.hermgauss(n)


def gauss_legendre(a: float, b: float, n: int):
    """Nodes and weights for ``int_a^b``."""
    x, w = _leggauss(int(n))
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def gauss_hermite(n: int):
    """Nodes and weights for ``int f(z) exp(-z^2) dz`` (physicists' weight)."""
    return _hermgauss(int(n))


def gauss_hermite_nd(n: int, dim: int):
    """Tensor Gauss-Hermite rule in ``dim`` dimensions, weight ``exp(-|z|^2)``."""
    z, w = gauss_hermite(n)
    grids = np.meshgrid(*([z] * dim), indexing="ij")
    wgrids = np.meshgrid(*([w] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wts = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    return pts, wts


def trapezoid_weights(n_intervals: int, a: float, b: float):
    x = np.linspace(a, b, n_intervals + 1)
    w = np.full(n_intervals + 1, (b - a) / n_intervals)
    w[0] *= 0.5
    w[-1] *= 0.5
    return x, w


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n."""
    return 2.0 * pi ** (n / 2.0) / gamma(n / 2.0)


@lru_cache(maxsize=32)
def sphere_rule(n_theta: int = 64, n_phi: int | None = None):
    """Product rule on the unit sphere S^2: Gauss-Legendre in cos(theta), uniform in phi.

    Returns unit vectors (N, 3) and weights summing to 4*pi.  The rule is
    exact for polynomials of degree < min(2*n_theta, n_phi).
    """
    if n_phi is None:
        n_phi = 2 * n_theta
    mu, wmu = _leggauss(int(n_theta))
    phi = 2.0 * pi * np.arange(n_phi) / n_phi
    wphi = np.full(n_phi, 2.0 * pi / n_phi)
    M, P = np.meshgrid(mu, phi, indexing="ij")
    s = np.sqrt(1.0 - M**2)
    pts = np.stack([s * np.cos(P), s * np.sin(P), M], axis=-1).reshape(-1, 3)
    wts = np.outer(wmu, wphi).ravel()
    return pts, wts


def sphere_rule_nd(dim: int, n_nodes: int = 32):
    """Unit-sphere rule in R^dim (weights sum to |S^{dim-1}|).

    dim=2 uses the uniform circle rule, dim=3 the product rule; higher
    dimensions recurse in hyperspherical coordinates with a Gauss-Jacobi
    rule in each polar angle cosine.
    """
    if dim == 2:
        phi = 2.0 * pi * np.arange(2 * n_nodes) / (2 * n_nodes)
        return np.stack([np.cos(phi), np.sin(phi)], -1), np.full(phi.size, pi / n_nodes)
    if dim == 3:
        return sphere_rule(n_nodes)
    if dim < 2:
        raise DomainError("sphere rules need dim >= 2")
    # x = (sqrt(1 - mu^2) * S^{dim-2}, mu); Gauss-Jacobi absorbs (1 - mu^2)^{(dim-3)/2}
    sub_pts, sub_w = sphere_rule_nd(dim - 1, n_nodes)
    alpha = (dim - 3) / 2.0
    mu, wmu = roots_jacobi(int(n_nodes), alpha, alpha)
    pts = []
    wts = []
    for m, wm in zip(mu, wmu):
        pts.append(np.column_stack([np.sqrt(1 - m * m) * sub_pts, np.full(len(sub_pts), m)]))
        wts.append(wm * sub_w)
    return np.vstack(pts), np.concatenate(wts)
