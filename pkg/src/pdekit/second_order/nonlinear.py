"""Successive approximations for semilinear parabolic and elliptic problems.

Parabolic: ``u_t - u_xx = F(x, u, u_x)``, ``u(0, x) = 0`` on the line, written
as the heat-kernel integral system for ``(u, p = u_x)``.  After
``y = x + 2 tau z`` with ``tau^2 = t - s`` both kernels are smooth:

    u(t, x) = int_0^sqrt(t) 2 tau E[F](t - tau^2, x, tau) dtau
    p(t, x) = int_0^sqrt(t) 2 E[z F](t - tau^2, x, tau) dtau

where ``E`` is the Gauss-Hermite average with weight ``pi^(-1/2) exp(-z^2)``.

Elliptic: ``Delta u = f(x, u)`` in ``R^n`` with ``f = 0`` off ``B(0, b)``,
solved as ``u = C_hat int_B f(y, u(y)) |y - x|^(2-n) dy`` with
``C_hat = 1 / ((2 - n) |S^(n-1)|)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ..core import SolutionTable
from ..errors import DomainError, HypothesisError, NonConvergenceError, UnsupportedError
from ..quadrature import gauss_hermite, gauss_legendre, sphere_area, sphere_rule
from .potential import ray_segment


def parabolic_c1(n: int = 1) -> float:
    """``C1 = pi^(-n/2) int |z| exp(-|z|^2) dz``, so ``int |d_x P| dy = C1 / sqrt(sigma)``."""
    return math.pi ** (-n / 2.0) * sphere_area(n) * math.gamma((n + 1) / 2.0) / 2.0 if n > 1 \
        else 1.0 / math.sqrt(math.pi)


@dataclass(frozen=True)
class PicardReport:
    gaps: tuple
    ratio_bound: float
    observed_ratios: tuple
    iterations: int
    converged: bool

    @property
    def within_bound(self) -> bool:
        return all(r <= self.ratio_bound * (1 + 1e-9) for r in self.observed_ratios)


def _ratios(gaps, floor=1e-13):
    out = []
    for g0, g1 in zip(gaps, gaps[1:]):
        if g0 > floor and g1 > floor:
            out.append(g1 / g0)
    return tuple(out)


def nonlinear_parabolic_picard(F: Callable, times, xs, C: float, L: float, delta: float,
                               K: int = 30, tol: float = 1e-10, n_tau: int = 16, n_z: int = 24,
                               n: int = 1):
    """Iterate the heat-kernel integral system on the grid ``times x xs``.

    ``F(x, u, p)`` is vectorized, bounded by ``C`` and Lipschitz with constant
    ``L`` for ``|u|, |p| <= delta``.  The horizon ``a = times[-1]`` must satisfy
    ``a C <= delta`` and ``2 sqrt(a) C C1 <= delta``.  The sup gap of
    ``(u, p)`` contracts with ratio at most ``L (a + 2 C1 sqrt(a))``.

    Returns ``(u_table, p_table, report)``.
    """
    if n != 1:
        raise UnsupportedError("the parabolic fixed point is implemented for n = 1")
    times = np.asarray(times, dtype=float)
    xs = np.asarray(xs, dtype=float)
    if times[0] != 0.0 or np.any(np.diff(times) <= 0) or np.any(np.diff(xs) <= 0):
        raise DomainError("times must start at 0 and both axes must increase")
    a = float(times[-1])
    C1 = parabolic_c1(n)
    if a * C > delta or 2.0 * math.sqrt(a) * C * C1 > delta:
        raise DomainError(f"horizon a = {a} violates a C <= delta or 2 sqrt(a) C C1 <= delta")
    ratio = L * (a + 2.0 * C1 * math.sqrt(a))
    z, wz = gauss_hermite(n_z)
    wz = wz / math.sqrt(math.pi)
    margin = 2.0 * math.sqrt(a) * float(np.max(np.abs(z)))
    hx = float(np.min(np.diff(xs)))
    n_pad = int(math.ceil(margin / hx))
    ext = np.concatenate([xs[0] - hx * np.arange(n_pad, 0, -1), xs, xs[-1] + hx * np.arange(1, n_pad + 1)])
    s, ws = gauss_legendre(0.0, 1.0, n_tau)
    u = np.zeros((times.size, ext.size))
    p = np.zeros_like(u)
    gaps = []
    for _ in range(K):
        iu = RegularGridInterpolator((times, ext), u)
        ip = RegularGridInterpolator((times, ext), p)
        u_new = np.zeros_like(u)
        p_new = np.zeros_like(p)
        for i, t in enumerate(times[1:], start=1):
            rt = math.sqrt(t)
            tau = rt * s  # (n_tau,)
            y = ext[:, None, None] + 2.0 * tau[None, :, None] * z[None, None, :]
            y = np.clip(y, ext[0], ext[-1])
            tt = np.broadcast_to(np.clip(t - tau**2, 0.0, a)[None, :, None], y.shape)
            pts = np.stack([tt.ravel(), y.ravel()], axis=-1)
            Fv = np.asarray(F(y.ravel(), iu(pts), ip(pts)), dtype=float)
            Fv = np.broadcast_to(Fv, (y.size,)).reshape(y.shape)
            EF = Fv @ wz
            EzF = Fv @ (wz * z)
            u_new[i] = rt * (EF * (2.0 * tau)) @ ws
            p_new[i] = rt * (EzF * 2.0) @ ws
        gap = max(float(np.max(np.abs(u_new - u))), float(np.max(np.abs(p_new - p))))
        gaps.append(gap)
        u, p = u_new, p_new
        if len(gaps) >= 3 and gaps[-1] > gaps[-2] * (1 + 1e-9) + 1e-14 and gaps[-2] > gaps[-3]:
            raise NonConvergenceError("successive approximations are not contracting",
                                      gap=gap, iterations=len(gaps))
        if gap <= tol:
            break
    converged = gaps[-1] <= tol
    core = slice(n_pad, n_pad + xs.size)
    axes = (("t", times), ("x", xs))
    info = {"ratio_bound": ratio, "iterations": len(gaps)}
    report = PicardReport(tuple(gaps), ratio, _ratios(gaps), len(gaps), converged)
    return (SolutionTable(axes, u[:, core], "heat-kernel-picard", info),
            SolutionTable(axes, p[:, core], "heat-kernel-picard", info), report)


@dataclass(frozen=True)
class EllipticSolution:
    """Fixed point on a cube grid covering ``B(0, b)``; ``evaluate`` extends it to any point."""

    f: Callable
    b: float
    axis: np.ndarray
    values: np.ndarray
    report: PicardReport
    rho: float
    K0: float
    K1: float
    n_r: int
    n_theta: int

    def table(self) -> SolutionTable:
        return SolutionTable((("x1", self.axis), ("x2", self.axis), ("x3", self.axis)), self.values,
                             "newtonian-picard", {"rho": self.rho})

    def evaluate(self, points) -> np.ndarray:
        interp = RegularGridInterpolator((self.axis,) * 3, self.values)
        return _potential_map(self.f, self.b, np.atleast_2d(points), interp, self.n_r, self.n_theta)

    def residual(self, probes, h: float = 0.1) -> np.ndarray:
        """Relative ``|Delta u - f(x, u)|`` by 7-point differences of ``evaluate``."""
        probes = np.atleast_2d(np.asarray(probes, dtype=float))
        out = []
        for P in probes:
            pts = [P] + [P + s * h * e for e in np.eye(3) for s in (1, -1)]
            v = self.evaluate(np.array(pts))
            lap = (v[1:].sum() - 6 * v[0]) / h**2
            target = float(np.asarray(self.f(P[None], v[:1]), dtype=float).ravel()[0])
            out.append(abs(lap - target) / max(abs(target), 1e-300))
        return np.array(out)


def _potential_map(f, b, X, interp, n_r, n_theta):
    """``C_hat int_{B(0,b)} f(y, u(y)) / |y - x| dy`` at each row of ``X`` (n = 3)."""
    omega, wo = sphere_rule(n_theta)
    s, ws = gauss_legendre(0.0, 1.0, n_r)
    C_hat = -1.0 / (4.0 * math.pi)
    out = np.empty(len(X))
    lo, hi = -b, b
    for i, P in enumerate(X):
        r0, r1 = ray_segment(P, omega, b)
        length = (r1 - r0)[:, None]
        r = r0[:, None] + length * s[None, :]
        Y = (P[None, None, :] + r[..., None] * omega[:, None, :]).reshape(-1, 3)
        uv = interp(np.clip(Y, lo, hi))
        fv = np.asarray(f(Y, uv), dtype=float).reshape(r.shape)
        out[i] = C_hat * np.sum(wo[:, None] * length * ws[None, :] * r * fv)
    return out


def nonlinear_elliptic_picard(f: Callable, b: float, n: int = 3, grid: int = 13, K: int = 40,
                              tol: float = 1e-10, lipschitz: float | None = None,
                              n_r: int = 8, n_theta: int = 6) -> EllipticSolution:
    """Successive approximations ``u_{k+1} = C_hat int_B f(y, u_k(y)) |y - x|^(2-n) dy``.

    ``f(X, U)`` takes points ``(N, 3)`` and values ``(N,)``.  With
    ``K0 = 2 b^2 / (n - 2)``, ``C0 = max |f(x, 0)|`` and ``K1 = C0 K0``, the map
    is a contraction of ``{|u| <= 2 K1}`` with ratio ``rho = lambda K0`` where
    ``lambda`` bounds ``|f_u|`` there.  ``rho >= 1/2`` raises a hypothesis error.
    """
    if n != 3:
        raise UnsupportedError("the elliptic fixed point is implemented for n = 3")
    if b <= 0:
        raise DomainError("ball radius must be positive")
    axis = np.linspace(-b, b, grid)
    X = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    inside = np.linalg.norm(X, axis=1) <= b
    K0 = 2.0 * b * b / (n - 2)
    C0 = float(np.max(np.abs(f(X[inside], np.zeros(inside.sum())))))
    K1 = C0 * K0
    if lipschitz is None:
        us = np.linspace(-2 * K1, 2 * K1, 9) if K1 > 0 else np.zeros(1)
        hu = 1e-6 * max(1.0, K1)
        lam = 0.0
        for uu in us:
            ones = np.full(inside.sum(), uu)
            d = (f(X[inside], ones + hu) - f(X[inside], ones - hu)) / (2 * hu)
            lam = max(lam, float(np.max(np.abs(d))))
    else:
        lam = float(lipschitz)
    rho = lam * K0
    if rho >= 0.5:
        raise HypothesisError(f"contraction ratio rho = lambda K0 = {rho:.4g} is not below 1/2")
    u = np.zeros((grid,) * 3)
    gaps = []
    for _ in range(K):
        interp = RegularGridInterpolator((axis,) * 3, u)
        new = _potential_map(f, b, X, interp, n_r, n_theta).reshape(u.shape)
        gap = float(np.max(np.abs(new - u)))
        gaps.append(gap)
        u = new
        if len(gaps) >= 2 and gaps[-1] > gaps[-2] * (1 + 1e-9) + 1e-14:
            raise NonConvergenceError("elliptic successive approximations are not contracting",
                                      gap=gap, iterations=len(gaps))
        if gap <= tol * max(1.0, float(np.max(np.abs(u)))):
            break
    report = PicardReport(tuple(gaps), rho, _ratios(gaps, 1e-12), len(gaps), gaps[-1] <= tol * max(1.0, float(np.max(np.abs(u)))))
    return EllipticSolution(f, float(b), axis, u, report, rho, K0, K1, n_r, n_theta)
