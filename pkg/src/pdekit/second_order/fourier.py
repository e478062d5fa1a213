"""Separation of variables on an interval.

Parabolic problems with Dirichlet ends use ``U_j(x) = sqrt(2) sin(j pi x)``;
hyperbolic problems with Neumann ends use ``V_j(x) = sqrt(2) cos(j pi x)``.
Both are posed on ``[A, B]`` and mapped to ``[0, 1]``, which scales the
eigenvalues by ``(B - A)^-2``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..core import SolutionTable, write_csv
from ..errors import DomainError
from ..quadrature import trapezoid_weights

TYPES = ("parabolic-dirichlet", "hyperbolic-neumann")


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class MixedBVP:
    """Mixed problem on ``[A, B]``; ``a`` is the diffusivity or the wave speed.

    Parabolic: ``u_t = a^2 u_xx``, ``u(t, A) = u_A``, ``u(t, B) = u_B``, ``u(0) = phi0``.
    Hyperbolic: ``u_tt = a^2 u_xx``, ``u_x = 0`` at both ends, ``u(0) = phi0``, ``u_t(0) = phi1``.
    """

    type: str
    A: float = 0.0
    B: float = 1.0
    a: float = 1.0
    u_A: float = 0.0
    u_B: float = 0.0
    phi0: Callable = _zero
    phi1: Callable = _zero
    J: int = 32
    n_quad: int = 2048
    times: tuple = (0.0, 0.25, 0.5, 1.0)
    n_x: int = 101

    def __post_init__(self):
        if self.type not in TYPES:
            raise DomainError(f"type must be one of {TYPES}")
        if not self.A < self.B:
            raise DomainError("need A < B")
        if self.J < 1:
            raise DomainError("mode count J must be >= 1")
        if not self.a > 0:
            raise DomainError("a must be positive")

    @property
    def length(self) -> float:
        return self.B - self.A

    def frequencies(self) -> np.ndarray:
        """``j pi a / (B - A)`` for ``j = 0..J``."""
        return np.arange(self.J + 1) * math.pi * self.a / self.length


@dataclass(frozen=True)
class FourierResult:
    table: SolutionTable
    coefficients: dict
    notes: tuple = field(default=())

    def coefficients_csv(self, path=None) -> str:
        keys = list(self.coefficients)
        rows = zip(*[self.coefficients[k] for k in keys])
        return write_csv(keys, rows, path)


def _inner(fun, basis, n_quad):
    """Trapezoid inner products ``int_0^1 fun(y) basis_j(y) dy``."""
    y, w = trapezoid_weights(n_quad, 0.0, 1.0)
    vals = np.asarray(fun(y), dtype=float)
    return basis(y) @ (w * vals)


def _grid(spec):
    return np.asarray(spec.times, dtype=float), np.linspace(spec.A, spec.B, spec.n_x)


def fourier_parabolic_solve(spec: MixedBVP) -> FourierResult:
    """Truncated sine series after subtracting the affine boundary interpolant."""
    if spec.type != "parabolic-dirichlet":
        raise DomainError("fourier_parabolic_solve needs a parabolic-dirichlet problem")
    L = spec.length
    notes = []
    ends = np.asarray(spec.phi0(np.array([spec.A, spec.B])), dtype=float)
    if abs(ends[0] - spec.u_A) > 1e-10 or abs(ends[1] - spec.u_B) > 1e-10:
        msg = "initial data does not match the boundary values; the series converges nonuniformly"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes.append(msg)

    def shifted(y):
        x = spec.A + L * y
        return spec.phi0(x) - (spec.u_A + (spec.u_B - spec.u_A) * y)

    j = np.arange(1, spec.J + 1)

    def basis(y):
        return math.sqrt(2.0) * np.sin(np.pi * j[:, None] * y[None, :])

    alpha = _inner(shifted, basis, spec.n_quad)
    decay = spec.frequencies()[1:] ** 2
    times, xs = _grid(spec)
    y = (xs - spec.A) / L
    modes = basis(y)
    modes[:, (y == 0.0) | (y == 1.0)] = 0.0  # sin(j pi) is not exactly zero in floating point
    vals = (np.exp(-np.outer(times, decay)) * alpha) @ modes
    vals += spec.u_A + (spec.u_B - spec.u_A) * y
    table = SolutionTable((("t", times), ("x", xs)), vals, "fourier-sine",
                          {"J": spec.J, "length": L})
    coeffs = {"j": j.tolist(), "alpha": alpha.tolist(), "lambda": decay.tolist()}
    return FourierResult(table, coeffs, tuple(notes))


def fourier_hyperbolic_solve(spec: MixedBVP) -> FourierResult:
    """Truncated cosine series; the ``j = 0`` mode evolves as ``a0 + b0 t``."""
    if spec.type != "hyperbolic-neumann":
        raise DomainError("fourier_hyperbolic_solve needs a hyperbolic-neumann problem")
    L = spec.length
    j = np.arange(0, spec.J + 1)
    scale = np.where(j == 0, 1.0, math.sqrt(2.0))

    def basis(y):
        return scale[:, None] * np.cos(np.pi * j[:, None] * y[None, :])

    def pulled(fun):
        return lambda y: fun(spec.A + L * y)

    alpha = _inner(pulled(spec.phi0), basis, spec.n_quad)
    beta = _inner(pulled(spec.phi1), basis, spec.n_quad)
    omega = spec.frequencies()
    a_coef = alpha
    b_coef = np.where(j == 0, beta, beta / np.where(j == 0, 1.0, omega))
    times, xs = _grid(spec)
    y = (xs - spec.A) / L
    T = np.cos(np.outer(times, omega)) * a_coef + np.sin(np.outer(times, omega)) * b_coef
    T[:, 0] = a_coef[0] + b_coef[0] * times
    vals = T @ basis(y)
    table = SolutionTable((("t", times), ("x", xs)), vals, "fourier-cosine",
                          {"J": spec.J, "length": L})
    coeffs = {"j": j.tolist(), "a": a_coef.tolist(), "b": b_coef.tolist(),
              "omega": omega.tolist()}
    return FourierResult(table, coeffs, ())


def mode_residuals(result: FourierResult, t: float, h: float = 1e-3) -> np.ndarray:
    """Residual of each mode's time ODE by a sixth-order difference at ``t``.

    Sine modes satisfy ``T' + lambda T = 0``; cosine modes ``T'' + omega^2 T = 0``.
    Residuals are relative to the mode amplitude.
    """
    c = result.coefficients
    if "alpha" in c:
        alpha, lam = np.array(c["alpha"]), np.array(c["lambda"])
        T = lambda s: alpha * np.exp(-lam * s)  # noqa: E731
        d1 = (T(t + 3 * h) - 9 * T(t + 2 * h) + 45 * T(t + h)
              - 45 * T(t - h) + 9 * T(t - 2 * h) - T(t - 3 * h)) / (60 * h)
        return np.abs(d1 + lam * T(t)) / np.maximum(np.abs(alpha) * np.maximum(lam, 1), 1e-300)
    a, b, om = np.array(c["a"]), np.array(c["b"]), np.array(c["omega"])

    def T(s):
        out = a * np.cos(om * s) + b * np.sin(om * s)
        out[0] = a[0] + b[0] * s
        return out

    d2 = (2 * T(t + 3 * h) - 27 * T(t + 2 * h) + 270 * T(t + h) - 490 * T(t)
          + 270 * T(t - h) - 27 * T(t - 2 * h) + 2 * T(t - 3 * h)) / (180 * h * h)
    amp = np.maximum(np.hypot(a, b) * np.maximum(om, 1) ** 2, 1e-300)
    return np.abs(d2 + om**2 * T(t)) / amp
