"""Riemann's method for ``L u = u_xy + a u_x + b u_y + c u = F``.

The Riemann function ``nu(x, y; x0, y0)`` solves the adjoint equation
``M nu = nu_xy - (a nu)_x - (b nu)_y + c nu = 0`` with
``nu(x0, y) = exp int_{y0}^y a(x0, s) ds`` and
``nu(x, y0) = exp int_{x0}^x b(s, y0) ds``.  With ``lam = nu_x`` and
``w = nu_y`` it is the fixed point of a coupled Volterra system.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import RectBivariateSpline

from ..errors import DomainError, NonConvergenceError
from ..quadrature import gauss_legendre

KINDS = ("cauchy", "goursat")


def _zero2(x, y):
    return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)


def _d(fun, x, h=1e-4):
    """Fourth-order central derivative of a vectorized scalar function."""
    return (-fun(x + 2 * h) + 8 * fun(x + h) - 8 * fun(x - h) + fun(x - 2 * h)) / (12 * h)


@dataclass(frozen=True)
class RiemannProblem:
    """Coefficients, source and data for Riemann's method.

    All callables are vectorized.  Cauchy kind: ``mu`` (decreasing curve),
    ``phi0 = u`` and ``phi1 = u_y`` on ``y = mu(x)``.  Goursat kind:
    ``u(x1, y) = phi1(y)`` and ``u(x, y1) = phi2(x)`` with corner ``S = (x1, y1)``.
    Optional derivative callables replace finite differences.
    """

    a: Callable = _zero2
    b: Callable = _zero2
    c: Callable = _zero2
    F: Callable = _zero2
    kind: str = "cauchy"
    target: tuple = (0.0, 0.0)
    mu: Callable | None = None
    phi0: Callable | None = None
    phi1: Callable | None = None
    phi2: Callable | None = None
    corner: tuple | None = None
    a_x: Callable | None = None
    b_y: Callable | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"kind must be one of {KINDS}")

    def require_data(self):
        if self.kind == "cauchy" and (self.mu is None or self.phi0 is None or self.phi1 is None):
            raise DomainError("the Cauchy kind needs mu, phi0 and phi1")
        if self.kind == "goursat" and (self.corner is None or self.phi1 is None or self.phi2 is None):
            raise DomainError("the Goursat kind needs corner, phi1 and phi2")

    def ax(self, x, y):
        return self.a_x(x, y) if self.a_x else (self.a(x + 1e-5, y) - self.a(x - 1e-5, y)) / 2e-5

    def by(self, x, y):
        return self.b_y(x, y) if self.b_y else (self.b(x, y + 1e-5) - self.b(x, y - 1e-5)) / 2e-5


def adjoint_problem(p: RiemannProblem) -> RiemannProblem:
    """Coefficients of the adjoint operator ``M``: ``(-a, -b, c - a_x - b_y)``."""
    return RiemannProblem(a=lambda x, y: -p.a(x, y), b=lambda x, y: -p.b(x, y),
                          c=lambda x, y: p.c(x, y) - p.ax(x, y) - p.by(x, y))


@dataclass(frozen=True)
class RiemannKernel:
    """``nu`` on the grid ``xs x ys`` (first axis x) with base point ``(xs[0], ys[0])``."""

    xs: np.ndarray
    ys: np.ndarray
    nu: np.ndarray
    iterations: int
    gaps: tuple

    def spline(self) -> RectBivariateSpline:
        ix = np.argsort(self.xs)
        iy = np.argsort(self.ys)
        return RectBivariateSpline(self.xs[ix], self.ys[iy], self.nu[np.ix_(ix, iy)], kx=3, ky=3)

    def __call__(self, x, y):
        return self.spline().ev(x, y)


def riemann_function(p: RiemannProblem, base, far, n: int = 200, tol: float = 1e-13,
                     max_iter: int = 200) -> RiemannKernel:
    """Riemann function on the rectangle spanned by ``base = (x0, y0)`` and ``far``.

    Picard iteration on the Volterra system for ``(lam, w, nu)`` with
    cumulative Simpson quadrature along grid lines from the base point.
    """
    x0, y0 = map(float, base)
    x1, y1 = map(float, far)
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    hx, hy = xs[1] - xs[0], ys[1] - ys[0]
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    A, B = p.a(X, Y) + 0 * X, p.b(X, Y) + 0 * X
    Ct = p.ax(X, Y) + p.by(X, Y) - p.c(X, Y) + 0 * X
    nu_row = np.exp(cumulative_simpson(B[:, 0], dx=hx, initial=0.0))  # nu(x, y0)
    nu_col = np.exp(cumulative_simpson(A[0, :], dx=hy, initial=0.0))  # nu(x0, y)
    lam0 = B[:, 0] * nu_row  # nu_x on y = y0
    w0 = A[0, :] * nu_col  # nu_y on x = x0
    nu = nu_row[:, None] * nu_col[None, :]
    lam = np.repeat(lam0[:, None], n + 1, axis=1)
    w = np.repeat(w0[None, :], n + 1, axis=0)
    gaps = []
    for it in range(1, max_iter + 1):
        g = A * lam + B * w + Ct * nu
        lam_new = lam0[:, None] + cumulative_simpson(g, dx=hy, axis=1, initial=0.0)
        w_new = w0[None, :] + cumulative_simpson(g, dx=hx, axis=0, initial=0.0)
        nu_new = nu_row[:, None] + cumulative_simpson(w_new, dx=hy, axis=1, initial=0.0)
        gap = max(np.max(np.abs(nu_new - nu)), np.max(np.abs(lam_new - lam)),
                  np.max(np.abs(w_new - w)))
        gaps.append(float(gap))
        lam, w, nu = lam_new, w_new, nu_new
        if not np.isfinite(gap):
            break
        if gap <= tol * max(1.0, float(np.max(np.abs(nu)))):
            return RiemannKernel(xs, ys, nu, it, tuple(gaps))
    raise NonConvergenceError("Riemann function iteration did not converge",
                              gap=gaps[-1], iterations=len(gaps))


def _area(fun, xa, xb, ylo, yhi, n):
    """``int_{xa}^{xb} int_{ylo(x)}^{yhi} fun(x, y) dy dx`` by mapped Gauss-Legendre."""
    xq, wx = gauss_legendre(xa, xb, n)
    s, ws = gauss_legendre(0.0, 1.0, n)
    lo = ylo(xq)
    Y = lo[:, None] + (yhi - lo)[:, None] * s[None, :]
    Xq = np.repeat(xq[:, None], n, axis=1)
    vals = fun(Xq, Y)
    return float(np.sum(wx[:, None] * (yhi - lo)[:, None] * ws[None, :] * vals))


def _check_decreasing(mu, lo, hi, samples=256):
    xs = np.linspace(lo, hi, samples)
    slope = _d(mu, xs)
    if np.any(slope >= 0):
        raise DomainError("the data curve y = mu(x) must be strictly decreasing")


def riemann_cauchy_solve(p: RiemannProblem, n: int = 200, quad_nodes: int = 64,
                         bracket: float = 1e3) -> float:
    """``u(x0, y0)`` for Cauchy data on a decreasing curve.

    Writes ``u = v + U`` with ``U = phi0(x) + (y - mu(x)) phi1(x)`` so that
    ``v`` has zero Cauchy data and ``L v = F1 = F - L U``; then
    ``v(P) = int int_T nu F1`` over the triangle below ``P``.
    """
    from scipy.optimize import brentq
    if p.kind != "cauchy":
        raise DomainError("riemann_cauchy_solve needs the Cauchy kind")
    p.require_data()
    x0, y0 = map(float, p.target)
    mu = p.mu
    yA = float(mu(np.array(x0)))
    if not y0 > yA:
        raise DomainError("target point must lie above the data curve")
    lo = x0 - 1.0
    while mu(np.array(lo)) < y0:
        lo = x0 - 2 * (x0 - lo)
        if x0 - lo > bracket:
            raise DomainError("the horizontal line through the target misses the curve")
    xB = brentq(lambda s: float(mu(np.array(s))) - y0, lo, x0, xtol=1e-15)
    _check_decreasing(mu, xB, x0)
    U0 = p.phi0(np.array(x0)) + (y0 - yA) * p.phi1(np.array(x0))

    def F1(x, y):
        phi1 = p.phi1(x)
        dphi0, dphi1, dmu = _d(p.phi0, x), _d(p.phi1, x), _d(mu, x)
        U = p.phi0(x) + (y - mu(x)) * phi1
        Ux = dphi0 - dmu * phi1 + (y - mu(x)) * dphi1
        LU = dphi1 + p.a(x, y) * Ux + p.b(x, y) * phi1 + p.c(x, y) * U
        return p.F(x, y) - LU

    kern = riemann_function(p, (x0, y0), (xB, yA), n=n)
    spl = kern.spline()
    val = _area(lambda x, y: spl.ev(x, y) * F1(x, y), xB, x0, mu, y0, quad_nodes)
    return float(U0 + val)


def riemann_goursat_solve(p: RiemannProblem, n: int = 200, quad_nodes: int = 64,
                          corner_tol: float = 1e-8) -> float:
    """``u(x0, y0)`` from data on ``x = x1`` and ``y = y1``.

    ``u(P) = (u nu)(S) + int_{x1}^{x0} nu (phi2' + b phi2)(x, y1) dx
    + int_{y1}^{y0} nu (phi1' + a phi1)(x1, y) dy + int int nu F``.
    """
    if p.kind != "goursat":
        raise DomainError("riemann_goursat_solve needs the Goursat kind")
    p.require_data()
    x0, y0 = map(float, p.target)
    x1, y1 = map(float, p.corner)
    uS = float(p.phi2(np.array(x1)))
    if abs(uS - float(p.phi1(np.array(y1)))) > corner_tol:
        raise DomainError("corner values of the Goursat data disagree")
    if x0 == x1 or y0 == y1:
        raise DomainError("target must not lie on a data line")
    kern = riemann_function(p, (x0, y0), (x1, y1), n=n)
    spl = kern.spline()
    xq, wx = gauss_legendre(x1, x0, quad_nodes)
    yq, wy = gauss_legendre(y1, y0, quad_nodes)
    line_x = np.sum(wx * spl.ev(xq, np.full_like(xq, y1))
                    * (_d(p.phi2, xq) + p.b(xq, np.full_like(xq, y1)) * p.phi2(xq)))
    line_y = np.sum(wy * spl.ev(np.full_like(yq, x1), yq)
                    * (_d(p.phi1, yq) + p.a(np.full_like(yq, x1), yq) * p.phi1(yq)))
    Xq, Yq = np.meshgrid(xq, yq, indexing="ij")
    area = np.sum(np.outer(wx, wy) * spl.ev(Xq, Yq) * p.F(Xq, Yq))
    return float(uS * spl.ev(x1, y1) + line_x + line_y + area)
