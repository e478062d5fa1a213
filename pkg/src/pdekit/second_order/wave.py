"""Integral representations for the wave equation in one, two and three dimensions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import DomainError
from ..quadrature import QuadratureSpec, gauss_legendre, sphere_rule


def _zero(x):
    x = np.asarray(x)
    return np.zeros(x.shape[0] if x.ndim else 1)


@dataclass(frozen=True)
class WaveProblem:
    """``u_tt = c0^2 Delta u + f`` with ``u(0) = u0``, ``u_t(0) = u1``.

    ``u0`` and ``u1`` map an ``(N, dim)`` array to ``(N,)`` values (in one
    dimension a plain ``(N,)`` array is passed).  ``f(t, x)`` follows the
    same convention with a scalar time.
    """

    dim: int
    c0: float = 1.0
    u0: Callable = _zero
    u1: Callable = _zero
    f: Callable | None = None

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise DomainError("dim must be 1, 2 or 3")
        if not self.c0 > 0:
            raise DomainError("wave speed c0 must be positive")


def _d_dt4(g, t):
    """Fourth-order central difference of ``g`` at ``t`` with step ``t/100``."""
    h = t / 100.0
    return (-g(t + 2 * h) + 8 * g(t + h) - 8 * g(t - h) + g(t - 2 * h)) / (12 * h)


def _vals(fun, pts):
    return np.asarray(fun(pts), dtype=float).ravel()


def dalembert_solve(p: WaveProblem, t: float, x: float, nodes: int = 64) -> float:
    """``[u0(x + c t) + u0(x - c t)]/2 + (1/2c) int_{x - c t}^{x + c t} u1``."""
    if p.dim != 1:
        raise DomainError("d'Alembert's formula is one dimensional")
    c = p.c0
    ends = _vals(p.u0, np.array([x + c * t, x - c * t]))
    out = 0.5 * (ends[0] + ends[1])
    if t != 0:
        s, w = gauss_legendre(x - c * t, x + c * t, nodes)
        out += float(np.sum(w * _vals(p.u1, s))) / (2 * c)
    return float(out)


def _disk_term(fun, t, x, c, n_theta, n_phi):
    """``int_{|xi - x| < ct} fun(xi) / sqrt(c^2 t^2 - |xi - x|^2) dxi`` via ``rho = ct sin(theta)``."""
    R = c * t
    th, wth = gauss_legendre(0.0, math.pi / 2, n_theta)
    phi = 2 * math.pi * np.arange(n_phi) / n_phi
    rho = R * np.sin(th)
    pts = x + np.stack([rho[:, None] * np.cos(phi)[None, :], rho[:, None] * np.sin(phi)[None, :]],
                       axis=-1).reshape(-1, 2)
    vals = _vals(fun, pts).reshape(n_theta, n_phi)
    return float(R * np.sum(wth * np.sin(th) * vals.sum(axis=1)) * 2 * math.pi / n_phi)


def wave2d_poisson_solve(p: WaveProblem, t: float, x: float, y: float,
                         quad: QuadratureSpec | None = None) -> float:
    """Poisson's formula in the plane.  ``quad.nodes = (n_theta, n_phi)``."""
    if p.dim != 2:
        raise DomainError("Poisson's formula needs dim = 2")
    if t <= 0:
        raise DomainError("wave2d_poisson_solve needs t > 0")
    quad = quad or QuadratureSpec("gauss-legendre", (48, 64))
    n_theta, n_phi = int(quad.nodes[0]), int(quad.nodes[-1])
    c = p.c0
    P = np.array([x, y], dtype=float)
    first = _d_dt4(lambda s: _disk_term(p.u0, s, P, c, n_theta, n_phi), t)
    second = _disk_term(p.u1, t, P, c, n_theta, n_phi)
    return (first + second) / (2 * math.pi * c)


def _sphere_mean(fun, P, R, n_theta):
    omega, w = sphere_rule(n_theta)
    return float(np.sum(w * _vals(fun, P + R * omega)) / (4 * math.pi))


def kirchhoff_solve(p: WaveProblem, t: float, P, quad: QuadratureSpec | None = None) -> float:
    """Kirchhoff's formula ``d/dt[t M_{ct}(u0)] + t M_{ct}(u1)`` with sphere means ``M``.

    This is ``(1/4 pi c)[d/dt int_{S_ct} u0 / r dS + int_{S_ct} u1 / r dS]``.
    """
    if p.dim != 3:
        raise DomainError("Kirchhoff's formula needs dim = 3")
    if t <= 0:
        raise DomainError("kirchhoff_solve needs t > 0")
    n_theta = int((quad.nodes[0]) if quad is not None else 32)
    P = np.asarray(P, dtype=float)
    c = p.c0
    first = _d_dt4(lambda s: s * _sphere_mean(p.u0, P, c * s, n_theta), t)
    return first + t * _sphere_mean(p.u1, P, c * t, n_theta)


def duhamel_solve(p: WaveProblem, t: float, P, quad: QuadratureSpec | None = None) -> float:
    """Retarded potential ``(1/4 pi c^2) int_{B(P, ct)} f(t - r/c, Q) / r dQ`` (zero data).

    Spherical coordinates about ``P``: ``r dr dOmega`` with Gauss-Legendre in ``r``.
    """
    if p.dim != 3:
        raise DomainError("the retarded potential needs dim = 3")
    if t <= 0:
        raise DomainError("duhamel_solve needs t > 0")
    if p.f is None:
        return 0.0
    n_r, n_theta = (int(quad.nodes[0]), int(quad.nodes[-1])) if quad is not None else (24, 16)
    P = np.asarray(P, dtype=float)
    c = p.c0
    r, wr = gauss_legendre(0.0, c * t, n_r)
    omega, wo = sphere_rule(n_theta)
    total = 0.0
    for ri, wi in zip(r, wr):
        vals = _vals(lambda q: p.f(t - ri / c, q), P + ri * omega)
        total += wi * ri * float(np.sum(wo * vals))
    return total / (4 * math.pi * c * c)


def wave_energy(u, ut, ux, xs, c0: float) -> float:
    """``int (u_t^2 + c0^2 u_x^2) dx`` by the trapezoid rule on samples over ``xs``."""
    del u
    return float(np.trapezoid(np.asarray(ut) ** 2 + c0**2 * np.asarray(ux) ** 2, xs))
