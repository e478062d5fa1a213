"""Stratonovich SDEs, their Wong-Zakai ODE approximations and the chain rule.

Callables are vectorized over leading axes: ``f(t, x)`` maps ``(..., n)``
to ``(..., n)`` and ``g(t, x)`` maps ``(..., n)`` to ``(..., n, m)`` with
column ``j`` the field ``g_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..core import TrajectoryTable, write_csv
from ..errors import DivergenceError, DomainError
from ..ode_core import rk4_step
from .wiener import SmoothedPath, WienerPath, sample_wiener_batch, smooth_path_ou

FD_STEP = 1e-6


@dataclass(frozen=True)
class SDEProblem:
    """``dx = f dt + sum_j g_j o dw^j`` on ``[0, T]`` with ``x(0) = x0``.

    ``dg(t, x)`` optionally returns ``d g_{i j} / d x_k`` with shape ``(..., n, m, n)``.
    """

    f: Callable
    g: Callable
    x0: tuple
    T: float = 1.0
    m: int = 1
    dg: Callable | None = None

    def __post_init__(self):
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        object.__setattr__(self, "x0", tuple(x0))
        if not self.T > 0:
            raise DomainError("horizon T must be positive")
        gx = np.asarray(self.g(0.0, x0))
        if gx.shape != (x0.size, self.m):
            raise DomainError(f"g must return shape (n, m) = {(x0.size, self.m)}, got {gx.shape}")
        if np.asarray(self.f(0.0, x0)).shape != (x0.size,):
            raise DomainError("f must return a vector of the state dimension")

    @property
    def n(self) -> int:
        return len(self.x0)

    def g_jacobian(self, t, x) -> np.ndarray:
        if self.dg is not None:
            return np.asarray(self.dg(t, x), dtype=float)
        cols = []
        for k in range(self.n):
            e = np.zeros(self.n)
            e[k] = FD_STEP
            cols.append((self.g(t, x + e) - self.g(t, x - e)) / (2 * FD_STEP))
        return np.stack(cols, axis=-1)

    def correction(self, t, x) -> np.ndarray:
        """``(1/2) sum_j (d g_j / dx) g_j``."""
        J = self.g_jacobian(t, x)  # (..., n, m, n)
        G = np.asarray(self.g(t, x))  # (..., n, m)
        return 0.5 * np.einsum("...ijk,...kj->...i", J, G)


def zero_diffusion(n: int, m: int = 1) -> Callable:
    return lambda t, x: np.zeros(np.shape(x)[:-1] + (n, m))


def _x0(p, path):
    x = np.array(p.x0, dtype=float)
    return np.broadcast_to(x, path.w.shape[:-2] + (p.n,)).copy()


def _check(x, i, t):
    if not np.all(np.isfinite(x)):
        raise DivergenceError(f"trajectory blew up at t={t:.6g}", i)


def integrate_stratonovich(p: SDEProblem, path: WienerPath) -> TrajectoryTable:
    """Euler-Maruyama on the Ito form: drift ``f + (1/2) sum_j (dg_j) g_j``."""
    if path.m != p.m:
        raise DomainError("path and problem disagree on the noise dimension")
    t = path.times
    x = _x0(p, path)
    out = [x]
    dW = path.increments
    for i in range(t.size - 1):
        h = t[i + 1] - t[i]
        drift = p.f(t[i], x) + p.correction(t[i], x)
        x = x + drift * h + np.einsum("...ij,...j->...i", p.g(t[i], x), dW[..., i, :])
        _check(x, i, t[i + 1])
        out.append(x)
    return TrajectoryTable(t, np.stack(out, axis=-2), "stratonovich-euler-maruyama",
                           {"seed": path.seed})


def integrate_approx_ode(p: SDEProblem, smoothed: SmoothedPath) -> TrajectoryTable:
    """RK4 on ``dx/dt = f + sum_j g_j dv^j/dt`` with sub-steps no longer than ``eps/10``."""
    path = smoothed.source
    if path.m != p.m:
        raise DomainError("path and problem disagree on the noise dimension")
    t = path.times
    x = _x0(p, path)
    out = [x]
    for i in range(t.size - 1):
        H = t[i + 1] - t[i]
        k = max(1, math.ceil(H / (smoothed.eps / 10.0) - 1e-9))
        h = H / k

        def rhs(s, y, i=i):
            vdot = smoothed.vdot(i, s - t[i])
            return p.f(s, y) + np.einsum("...ij,...j->...i", p.g(s, y), vdot)

        for j in range(k):
            x = rk4_step(rhs, t[i] + j * h, x, h)
        _check(x, i, t[i + 1])
        out.append(x)
    return TrajectoryTable(t, np.stack(out, axis=-2), "wong-zakai-rk4",
                           {"eps": smoothed.eps, "seed": path.seed})


@dataclass(frozen=True)
class StudyTable:
    """Paired mean-square errors ``E |x_eps(T) - x_0(T)|^2`` with 95% intervals."""

    eps: np.ndarray
    mse: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    n_paths: int
    seed: int
    slope: float | None
    constant: np.ndarray

    def to_csv(self, path=None) -> str:
        rows = [(e, m, lo, hi, self.n_paths, self.seed)
                for e, m, lo, hi in zip(self.eps, self.mse, self.ci_low, self.ci_high)]
        return write_csv(["epsilon", "mse", "ci_low", "ci_high", "n_paths", "seed"], rows, path)


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def wz_convergence_study(p: SDEProblem, eps_list: Sequence[float], n_paths: int = 1000,
                         seed: int = 0, n_steps: int = 4000) -> StudyTable:
    """For each ``eps`` drive both integrators with the same paths and record the paired error.

    The fitted log-log slope is ``None`` when ``g`` vanishes along the reference
    trajectories (both integrators then solve the same ODE).  ``constant`` is ``mse / eps``.
    """
    eps = np.asarray(eps_list, dtype=float)
    if eps.size == 0:
        raise DomainError("eps_list is empty")
    if np.any(np.diff(eps) >= 0) or np.any(eps <= 0):
        raise DomainError("eps_list must be positive and decreasing")
    if n_paths < 100:
        raise DomainError("a study needs at least 100 paths")
    paths = sample_wiener_batch(np.linspace(0.0, p.T, n_steps + 1), n_paths, p.m, seed)
    ref_traj = integrate_stratonovich(p, paths)
    ref = ref_traj.states[..., -1, :]
    noiseless = not np.any(p.g(0.0, ref_traj.states))
    mse, lo, hi = [], [], []
    for e in eps:
        approx_end = integrate_approx_ode(p, smooth_path_ou(paths, e)).states[..., -1, :]
        sq = np.sum((approx_end - ref) ** 2, axis=-1)
        m = float(np.mean(sq))
        half = 1.96 * float(np.std(sq, ddof=1)) / math.sqrt(n_paths)
        mse.append(m)
        lo.append(m - half)
        hi.append(m + half)
    mse = np.array(mse)
    slope = None if noiseless else loglog_slope(eps, mse)
    return StudyTable(eps, mse, np.array(lo), np.array(hi), n_paths, int(seed), slope, mse / eps)


@dataclass(frozen=True)
class ChainRuleReport:
    lhs: np.ndarray
    rhs: np.ndarray
    gap: np.ndarray
    tol: float
    passed: bool
    growth_ok: bool


def _grad(phi, t, x):
    n = x.shape[-1]
    cols = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = FD_STEP
        cols.append((phi(t, x + e) - phi(t, x - e)) / (2 * FD_STEP))
    return np.stack(cols, axis=-1)


def ito_formula_check(phi: Callable, p: SDEProblem, path: WienerPath, tol: float = 0.1,
                      dphi_x: Callable | None = None, dphi_t: Callable | None = None,
                      growth: float = 1e6, trajectory: TrajectoryTable | None = None) -> ChainRuleReport:
    """Compare ``phi(T, x(T))`` with the Stratonovich chain rule along the computed path.

    ``rhs = phi(0, x0) + sum [d_s phi + <d_x phi, f>] h + sum_j <d_x phi, g_j> dw^j``
    with every integrand at the interval midpoint.  Passes when each path's gap
    is at most ``tol (1 + |phi(T, x(T))|)``.  ``growth`` bounds ``|d_x phi|``
    on the visited states.
    """
    traj = trajectory if trajectory is not None else integrate_stratonovich(p, path)
    X = traj.states
    t = traj.times
    dx = dphi_x or (lambda s, y: _grad(phi, s, y))
    dt = dphi_t or (lambda s, y: (phi(s + FD_STEP, y) - phi(s - FD_STEP, y)) / (2 * FD_STEP))
    rhs = np.asarray(phi(t[0], X[..., 0, :]), dtype=float)
    max_grad = 0.0
    dW = path.increments
    for i in range(t.size - 1):
        h = t[i + 1] - t[i]
        s = t[i] + h / 2
        xm = 0.5 * (X[..., i, :] + X[..., i + 1, :])
        gphi = dx(s, xm)
        max_grad = max(max_grad, float(np.max(np.abs(gphi))))
        rhs = rhs + (dt(s, xm) + np.sum(gphi * p.f(s, xm), axis=-1)) * h
        rhs = rhs + np.einsum("...i,...ij,...j->...", gphi, p.g(s, xm), dW[..., i, :])
    lhs = np.asarray(phi(t[-1], X[..., -1, :]), dtype=float)
    gap = np.abs(lhs - rhs)
    passed = bool(np.all(gap <= tol * (1 + np.abs(lhs))))
    return ChainRuleReport(lhs, rhs, gap, tol, passed, max_grad <= growth)
