"""Initial-value machinery for linear and nonlinear ODE systems.

Fixed-step RK4 and Picard integrators, fundamental matrices with their
inverse from the adjoint system, Liouville and constant-variation
identities, a scaling-and-squaring matrix exponential, exponential
stability and Lyapunov-exponent checks, and delay ODEs by the method of
steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import FieldSpec, TimeGrid, TrajectoryTable, as_field
from .errors import DivergenceError, DomainError, IntegrityError, NonConvergenceError
from .quadrature import gauss_legendre

LIPSCHITZ_FLAG = 1e6


# ---------------------------------------------------------------- Gronwall


@dataclass(frozen=True)
class GronwallBound:
    """``x -> M exp(int_a^x alpha)`` with the integral tabulated on a grid."""

    M: float
    nodes: np.ndarray
    values: np.ndarray

    def __call__(self, x):
        return np.interp(x, self.nodes, self.values)


def gronwall_bound(M: float, alpha: Callable, grid: TimeGrid) -> GronwallBound:
    """Upper bound for any phi with ``phi(x) <= M + int_a^x alpha(t) phi(t) dt``."""
    if M < 0:
        raise DomainError(f"Gronwall constant must be nonnegative, got {M}")
    xs = grid.nodes
    a = np.broadcast_to(np.asarray(alpha(xs), dtype=float), xs.shape)
    if np.any(a < 0):
        raise DomainError("alpha must be nonnegative on the grid")
    cum = cumulative_trapezoid(a, grid.h)
    return GronwallBound(float(M), xs, M * np.exp(cum))


def cumulative_trapezoid(values: np.ndarray, h: float) -> np.ndarray:
    """Running trapezoid integral along axis 0, starting at 0."""
    values = np.asarray(values, dtype=float)
    out = np.zeros_like(values)
    out[1:] = np.cumsum(0.5 * h * (values[1:] + values[:-1]), axis=0)
    return out


# ---------------------------------------------------------------- RK4


def rk4_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_integrate(f, times: np.ndarray, y0, method: str = "rk4") -> np.ndarray:
    """Integrate ``y' = f(t, y)`` through the given (possibly uneven) nodes."""
    y = np.array(y0, dtype=float)
    out = np.empty((len(times),) + y.shape)
    out[0] = y
    for i in range(len(times) - 1):
        y = rk4_step(f, times[i], y, times[i + 1] - times[i])
        if not np.all(np.isfinite(y)):
            raise DivergenceError(
                f"{method}: non-finite state at t={times[i + 1]:.6g}",
                last_node=i, last_state=out[i].copy())
        out[i + 1] = y
    return out


def lipschitz_probe(f: FieldSpec, t: float, y0: np.ndarray) -> float:
    """Largest difference quotient of ``f`` on shrinking pairs around ``y0``."""
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    scale = 1.0 + np.linalg.norm(y0)
    worst = 0.0
    for k in range(2, 15, 2):
        d = scale * 10.0 ** (-k)
        for j in range(y0.size):
            e = np.zeros_like(y0)
            e[j] = d
            for a, b in ((y0, y0 + e), (y0 - e, y0 + e)):
                num = np.linalg.norm(np.atleast_1d(f(t, b)) - np.atleast_1d(f(t, a)))
                worst = max(worst, num / np.linalg.norm(b - a))
    return float(worst)


def solve_ivp(f, x0: float, y0, grid: TimeGrid) -> TrajectoryTable:
    """Classical RK4 on ``grid``; ``states[0]`` is ``y0`` exactly.

    The result carries a ``non_unique`` flag when the Lipschitz probe at
    ``y0`` exceeds 1e6 (e.g. ``y' = 2 sqrt|y|`` from 0).
    """
    f = as_field(f)
    if abs(x0 - grid.t0) > 1e-12 * max(1.0, abs(x0)):
        raise DomainError(f"initial point {x0} must be the first grid node {grid.t0}")
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    ratio = lipschitz_probe(f, grid.t0, y0)
    states = rk4_integrate(f, grid.nodes, y0)
    diag = {"h": grid.h, "lipschitz_ratio": ratio, "non_unique": bool(ratio > LIPSCHITZ_FLAG)}
    return TrajectoryTable(grid.nodes, states, "rk4", diag)


# ---------------------------------------------------------------- linear systems


@dataclass(frozen=True)
class LinearSystemSpec:
    """``z' = A(x) z + b(x)``; ``b`` may be None for the homogeneous system."""

    A: Callable
    b: Callable | None = None
    dim: int | None = None

    def __post_init__(self):
        n = np.atleast_2d(self.A(0.0)).shape[0] if self.dim is None else self.dim
        object.__setattr__(self, "dim", n)

    def matrix(self, x) -> np.ndarray:
        return np.atleast_2d(np.asarray(self.A(x), dtype=float))

    def forcing(self, x) -> np.ndarray:
        if self.b is None:
            return np.zeros(self.dim)
        return np.atleast_1d(np.asarray(self.b(x), dtype=float))

    def rhs(self, x, z):
        return self.matrix(x) @ z + self.forcing(x)


def as_matrix_function(A) -> Callable:
    if callable(A):
        return A
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return lambda x: A


def picard_solve(spec, x0: float, y0, grid: TimeGrid, tol: float = 1e-10,
                 max_iter: int = 100) -> TrajectoryTable:
    """Successive substitution on ``z(x) = z0 + int_{x0}^x F(t, z(t)) dt``.

    The integral is a running trapezoid sum on ``grid``.  Iteration stops
    when the sup-norm gap between successive iterates drops below ``tol``.
    """
    if tol <= 0 or max_iter < 1:
        raise DomainError("picard_solve needs tol > 0 and max_iter >= 1")
    if abs(x0 - grid.t0) > 1e-12 * max(1.0, abs(x0)):
        raise DomainError(f"initial point {x0} must be the first grid node {grid.t0}")
    xs = grid.nodes
    if isinstance(spec, LinearSystemSpec):
        # coefficients do not change between sweeps
        As = np.array([spec.matrix(x) for x in xs])
        bs = np.array([spec.forcing(x) for x in xs])

        def sweep(z):
            return np.einsum("nij,nj->ni", As, z) + bs
    else:
        rhs = as_field(spec)

        def sweep(z):
            return np.array([rhs(x, zi) for x, zi in zip(xs, z)])
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    z = np.tile(y0, (len(xs), 1))
    gaps = []
    for k in range(1, max_iter + 1):
        F = sweep(z)
        z_new = y0 + cumulative_trapezoid(F, grid.h)
        if not np.all(np.isfinite(z_new)):
            bad = int(np.argmax(~np.all(np.isfinite(z_new), axis=1)))
            raise DivergenceError("picard iterate became non-finite", bad - 1, z_new[bad - 1])
        gap = float(np.max(np.abs(z_new - z)))
        gaps.append(gap)
        z = z_new
        if gap < tol:
            return TrajectoryTable(xs, z, "picard",
                                   {"iterations": k, "gaps": gaps, "h": grid.h})
    raise NonConvergenceError(
        f"picard: no convergence in {max_iter} iterations (last gap {gaps[-1]:.3e})",
        gap=gaps[-1], iterations=max_iter)


@dataclass(frozen=True)
class FundamentalMatrixTable:
    """``C(x; x0)`` and its inverse ``D`` on every grid node."""

    x0: float
    nodes: np.ndarray
    C: np.ndarray
    D: np.ndarray
    det: np.ndarray

    def at_index(self, i):
        return self.C[i]


def _two_sided(f, grid: TimeGrid, x0: float, y0) -> np.ndarray:
    """Integrate from the node ``x0`` forward and backward over the whole grid."""
    i0 = grid.index_of(x0)
    xs = grid.nodes
    y0 = np.asarray(y0, dtype=float)
    out = np.empty((len(xs),) + y0.shape)
    fwd = rk4_integrate(f, xs[i0:], y0)
    out[i0:] = fwd
    if i0 > 0:
        bwd = rk4_integrate(f, xs[i0::-1], y0)
        out[:i0 + 1] = bwd[::-1]
    return out


def fundamental_matrix(A, x0: float, grid: TimeGrid, det_tol: float = 1e-300) -> FundamentalMatrixTable:
    """Fundamental matrix of ``z' = A(x) z`` normalised at ``x0``.

    ``D`` solves the adjoint system ``D' = -D A`` with ``D(x0) = I`` and is
    returned alongside; ``D C = I`` holds up to integration error.
    """
    A = as_matrix_function(A)
    n = np.atleast_2d(A(x0)).shape[0]
    eye = np.eye(n)
    C = _two_sided(lambda x, M: np.atleast_2d(A(x)) @ M, grid, x0, eye)
    D = _two_sided(lambda x, M: -M @ np.atleast_2d(A(x)), grid, x0, eye)
    det = np.linalg.det(C)
    if np.any(~np.isfinite(det)) or np.any(np.abs(det) <= det_tol):
        i = int(np.argmin(np.abs(det)))
        raise IntegrityError(f"fundamental matrix singular at x={grid.nodes[i]:.6g}")
    return FundamentalMatrixTable(float(x0), grid.nodes, C, D, det)


def trace_integral(A, x0: float, xs: np.ndarray, order: int = 8) -> np.ndarray:
    """``int_{x0}^{x} Tr A`` at each x, by Gauss-Legendre on every grid interval."""
    A = as_matrix_function(A)
    out = np.zeros(len(xs))
    i0 = int(np.argmin(np.abs(xs - x0)))

    def piece(a, b):
        nodes, w = gauss_legendre(a, b, order)
        return sum(wi * np.trace(np.atleast_2d(A(t))) for t, wi in zip(nodes, w))

    for i in range(i0 + 1, len(xs)):
        out[i] = out[i - 1] + piece(xs[i - 1], xs[i])
    for i in range(i0 - 1, -1, -1):
        out[i] = out[i + 1] - piece(xs[i], xs[i + 1])
    return out


@dataclass(frozen=True)
class ResidualReport:
    name: str
    residual: float
    tolerance: float
    passed: bool
    details: dict = field(default_factory=dict)


def liouville_check(A, table: FundamentalMatrixTable, tol: float = 1e-6) -> ResidualReport:
    """Compare ``det C(x; x0)`` with ``exp int Tr A`` node by node."""
    W = np.exp(trace_integral(A, table.x0, table.nodes))
    abs_err = np.abs(table.det - W)
    rel = abs_err / np.abs(W)
    return ResidualReport("liouville", float(np.max(rel)), tol, bool(np.max(rel) <= tol),
                          {"abs_residual": float(np.max(abs_err)), "wronskian": W})


def constant_variation_solution(spec: LinearSystemSpec, x0: float, z0, grid: TimeGrid) -> TrajectoryTable:
    """``z(x) = C(x; x0) [z0 + int_{x0}^x C^{-1}(t; x0) b(t) dt]`` on ``grid``."""
    table = fundamental_matrix(spec.A, x0, grid)
    z0 = np.atleast_1d(np.asarray(z0, dtype=float))
    xs = grid.nodes
    g = np.array([table.D[i] @ spec.forcing(x) for i, x in enumerate(xs)])
    i0 = grid.index_of(x0)
    integ = cumulative_trapezoid(g, grid.h)
    integ = integ - integ[i0]
    states = np.einsum("nij,nj->ni", table.C, z0 + integ)
    return TrajectoryTable(xs, states, "constant-variation", {"h": grid.h})


# ---------------------------------------------------------------- matrix exponential


def matrix_exp(A, t: float = 1.0) -> np.ndarray:
    """``exp(t A)`` by scaling and squaring of the truncated Taylor series."""
    M = np.atleast_2d(np.asarray(A, dtype=float)) * t
    n = M.shape[0]
    norm = np.linalg.norm(M, 1)
    s = 0
    if norm > 0.5:
        s = int(math.ceil(math.log2(norm / 0.5)))
    X = M / (2.0 ** s)
    term = np.eye(n)
    out = np.eye(n)
    for k in range(1, 40):
        term = term @ X / k
        out = out + term
        if np.linalg.norm(term, 1) <= 1e-18 * np.linalg.norm(out, 1):
            break
    for _ in range(s):
        out = out @ out
    return out


# ---------------------------------------------------------------- stability


@dataclass(frozen=True)
class StabilityReport:
    two_w: float
    w: float
    decay_rate: float
    verdict: bool
    hurwitz: bool
    bound_holds: bool
    fitted_exponent: float
    witness_norms: np.ndarray
    notes: str = ""


def exponential_stability_check(A, grid: TimeGrid, samples: Sequence, tol: float = 1e-8) -> StabilityReport:
    """Test ``|z(t)| <= |z0| exp(w t)`` with ``2w = max spec(A + A^T)``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    try:
        two_w = float(np.max(np.linalg.eigvalsh(A + A.T)))
        hurwitz = bool(np.max(np.linalg.eigvals(A).real) < 0)
    except np.linalg.LinAlgError as exc:
        raise DivergenceError(f"eigen-solver failure: {exc}") from exc
    w = 0.5 * two_w
    ts = grid.nodes - grid.t0
    norms = []
    holds = True
    slopes = []
    for z0 in samples:
        z0 = np.atleast_1d(np.asarray(z0, dtype=float))
        traj = rk4_integrate(lambda t, z: A @ z, grid.nodes, z0)
        nz = np.linalg.norm(traj, axis=1)
        norms.append(nz)
        bound = np.linalg.norm(z0) * np.exp(w * ts) * (1.0 + tol)
        holds &= bool(np.all(nz <= bound + 1e-300))
        ok = nz > 0
        if np.count_nonzero(ok) > 2:
            slopes.append(np.polyfit(ts[ok], np.log(nz[ok]), 1)[0])
    verdict = w < 0
    notes = ""
    if hurwitz and not verdict:
        notes = "Hurwitz-only: spectrum of A is stable but A + A^T is not negative definite"
    fitted = float(max(slopes)) if slopes else float("nan")
    return StabilityReport(two_w, w, -w, bool(verdict), hurwitz, holds, fitted,
                           np.array(norms), notes)


def lyapunov_exponent_bound(A_family: Sequence) -> float:
    """``max_i ||A_i + A_i^T||_2``; every gamma < -bound is a Lyapunov exponent."""
    if len(A_family) == 0:
        raise DomainError("Lyapunov bound needs a nonempty matrix family")
    return float(max(np.linalg.norm(np.atleast_2d(A) + np.atleast_2d(A).T, 2) for A in A_family))


@dataclass(frozen=True)
class LyapunovReport:
    gamma: float
    threshold: float
    admissible: bool
    weighted_norms: np.ndarray
    decays: bool


def verify_lyapunov_exponent(A_family: Sequence, gamma: float, x0, horizon: float,
                             switch_times: Sequence = (), schedule: Sequence = (0,),
                             forcing: Sequence | None = None, n: int = 4000,
                             ratio: float = 1e-2) -> LyapunovReport:
    """Integrate the switched system and check that ``e^{gamma t}|z(t)|`` decays.

    ``schedule[k]`` picks the active family member on
    ``[switch_times[k-1], switch_times[k])``; ``forcing[i]`` is the constant
    drive for member ``i``.  ``decays`` is true when the weighted norm at the
    horizon is below ``ratio`` times its running maximum.
    """
    threshold = lyapunov_exponent_bound(A_family)
    mats = [np.atleast_2d(np.asarray(A, dtype=float)) for A in A_family]
    dim = mats[0].shape[0]
    drives = [np.zeros(dim)] * len(mats) if forcing is None else [np.atleast_1d(a) for a in forcing]
    bounds = np.asarray(switch_times, dtype=float)

    def active(t):
        return schedule[min(int(np.searchsorted(bounds, t, side="right")), len(schedule) - 1)]

    def rhs(t, z):
        i = active(t)
        return mats[i] @ z + drives[i]

    grid = TimeGrid(0.0, horizon, n)
    traj = rk4_integrate(rhs, grid.nodes, np.atleast_1d(np.asarray(x0, dtype=float)))
    weighted = np.exp(gamma * grid.nodes) * np.linalg.norm(traj, axis=1)
    decays = bool(weighted[-1] <= ratio * max(np.max(weighted), 1e-300))
    admissible = bool(gamma < 0 and abs(gamma) > threshold)
    return LyapunovReport(gamma, threshold, admissible, weighted, decays)


# ---------------------------------------------------------------- delay ODEs


def solve_delay_ode(f, sigma: float, history, grid: TimeGrid) -> TrajectoryTable:
    """Method of steps for ``y'(t) = f(t, y(t), y(t - sigma))``, ``t >= 0``.

    ``history`` is a callable on ``[-sigma, 0]`` or a ``(times, values)``
    table covering it.  Internal nodes are the grid nodes plus every
    multiple of ``sigma`` so no step straddles a segment boundary; delayed
    values inside the run are read back by linear interpolation.
    """
    if sigma <= 0:
        raise DomainError("delay must be positive")
    if abs(grid.t0) > 1e-14:
        raise DomainError("delay problems start at t = 0")
    hist = _history_callable(history, sigma)
    y_init = np.atleast_1d(np.asarray(hist(0.0), dtype=float))

    marks = sigma * np.arange(1, int(math.floor(grid.t1 / sigma + 1e-12)) + 1)
    nodes = np.union1d(grid.nodes, marks)
    nodes = nodes[np.concatenate([[True], np.diff(nodes) > 1e-12 * max(1.0, grid.t1)])]

    ys = np.empty((len(nodes), y_init.size))
    ys[0] = y_init

    def delayed(s, i_known):
        if s <= 0.0:
            return np.atleast_1d(np.asarray(hist(s), dtype=float))
        known = nodes[: i_known + 1]
        vals = ys[: i_known + 1]
        return np.array([np.interp(s, known, vals[:, j]) for j in range(vals.shape[1])])

    for i in range(len(nodes) - 1):
        t, h = nodes[i], nodes[i + 1] - nodes[i]

        def rhs(tt, yy):
            return np.atleast_1d(np.asarray(f(tt, yy, delayed(tt - sigma, i)), dtype=float))

        y_next = rk4_step(rhs, t, ys[i], h)
        if not np.all(np.isfinite(y_next)):
            raise DivergenceError(f"delay ODE diverged at t={nodes[i + 1]:.6g}", i, ys[i].copy())
        ys[i + 1] = y_next

    keep = np.array([int(np.argmin(np.abs(nodes - x))) for x in grid.nodes])
    return TrajectoryTable(grid.nodes, ys[keep], "method-of-steps",
                           {"sigma": sigma, "internal_nodes": len(nodes), "diverged": False})


def _history_callable(history, sigma):
    if callable(history):
        probe = np.linspace(-sigma, 0.0, 7)
        try:
            vals = [np.asarray(history(s), dtype=float) for s in probe]
        except Exception as exc:  # noqa: BLE001 - any failure means no coverage
            raise DomainError(f"history does not cover [-sigma, 0]: {exc}") from exc
        if not all(np.all(np.isfinite(v)) for v in vals):
            raise DomainError("history is not finite on [-sigma, 0]")
        return history
    ts, vs = history
    ts = np.asarray(ts, dtype=float)
    vs = np.asarray(vs, dtype=float)
    if ts.min() > -sigma + 1e-12 or ts.max() < -1e-12:
        raise DomainError(f"history table covers [{ts.min()}, {ts.max()}], need [-{sigma}, 0]")
    if vs.ndim == 1:
        return lambda s: np.interp(s, ts, vs)
    return lambda s: np.array([np.interp(s, ts, vs[:, j]) for j in range(vs.shape[1])])
