"""First-order PDEs by characteristics.

First integrals of vector fields, Clairaut/Lagrange implicit ODEs, and the
Cauchy problem for quasilinear and fully nonlinear Hamilton-Jacobi equations

    dS/dt + <dS/dx, g(t, x, S)> = L(t, x, S)          (quasilinear)
    du/dt + H(t, x, u, du/dx) = 0                     (nonlinear)

solved by integrating characteristic strips and inverting ``x(t, xi) = x``
with damped Newton.  Callables are batched: ``x`` and ``p`` arrive with
shape ``(B, n)``, ``u`` with shape ``(B,)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .core import SolutionTable, TimeGrid, as_field
from .errors import CausticError, DomainError, IntegrityError
from .ode_core import rk4_integrate

NEWTON_TOL = 1e-10
NEWTON_MAX = 50
MAX_HALVINGS = 8


# ---------------------------------------------------------------- first integrals


@dataclass(frozen=True)
class FirstIntegralReport:
    gradient_residual: float
    drift: float
    constant: bool
    passed: bool
    tol: float
    notes: tuple = ()


def verify_first_integral(u: Callable, f, samples, grad_u: Optional[Callable] = None,
                          tol: float = 1e-8, horizon: float = 1.0,
                          n_steps: int = 1000) -> FirstIntegralReport:
    """Check ``<grad u(y), f(y)> = 0`` on ``samples`` and along one trajectory.

    ``u`` maps a state vector to a scalar; ``f`` is an autonomous field.
    The trajectory starts at the first sample and runs for ``horizon``.
    """
    f = as_field(f, autonomous=True)
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    from .core import central_jacobian

    def grad(y):
        if grad_u is not None:
            return np.asarray(grad_u(y), dtype=float)
        return central_jacobian(lambda z: np.atleast_1d(u(z)), y)[0]

    grads = np.array([grad(y) for y in samples])
    res = max(abs(float(g @ f(0.0, y))) for g, y in zip(grads, samples))
    constant = bool(np.max(np.abs(grads)) <= tol)
    ts = np.linspace(0.0, horizon, n_steps + 1)
    traj = rk4_integrate(f, ts, samples[0])
    u0 = float(u(samples[0]))
    drift = max(abs(float(u(y)) - u0) for y in traj)
    notes = ("constant (not a first integral)",) if constant else ()
    passed = bool(res <= tol and drift <= tol and not constant)
    return FirstIntegralReport(res, drift, constant, passed, tol, notes)


# ---------------------------------------------------------------- Clairaut / Lagrange


def _derivative(fun: Callable, h: float = 1e-4) -> Callable:
    """Scalar derivative by the 4-point central stencil."""
    def d(z):
        s = h * (1.0 + abs(z))
        return (8.0 * (fun(z + s) - fun(z - s)) - (fun(z + 2 * s) - fun(z - 2 * s))) / (12.0 * s)
    return d


@dataclass(frozen=True)
class ClairautCurve:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    residual: float
    slope_error: float
    stationary_z: bool
    fold: bool
    notes: tuple = ()

    def to_csv(self, path=None) -> str:
        from .core import write_csv
        return write_csv(["t", "x", "y", "z"], np.column_stack([self.t, self.x, self.y, self.z]),
                         path)


def solve_clairaut(a: Callable, b: Callable, init, grid: TimeGrid, da: Optional[Callable] = None,
                   db: Optional[Callable] = None, tol: float = 1e-8) -> ClairautCurve:
    """Characteristic curve of ``y = x a(y') + b(y')``.

    With ``F(x, y, z) = x a(z) + b(z) - y`` the system is
    ``x' = x a'(z) + b'(z)``, ``y' = z x'``, ``z' = z - a(z)``.
    """
    da = da or _derivative(a)
    db = db or _derivative(b)
    x0, y0, z0 = (float(v) for v in init)
    if abs(x0 * a(z0) + b(z0) - y0) > tol:
        raise DomainError(f"initial point violates y = x a(z) + b(z) by "
                          f"{abs(x0 * a(z0) + b(z0) - y0):.3e}")
    if abs(x0 * da(z0) + db(z0)) <= tol:
        raise DomainError("x0 a'(z0) + b'(z0) vanishes: the curve cannot be parameterized by x")

    def rhs(t, s):
        x, y, z = s
        xp = x * da(z) + db(z)
        return np.array([xp, z * xp, z - a(z)])

    ts = grid.nodes
    states = rk4_integrate(rhs, ts, np.array([x0, y0, z0]), method="clairaut")
    x, y, z = states.T
    residual = float(np.max(np.abs(y - x * np.array([a(v) for v in z])
                                   - np.array([b(v) for v in z]))))
    xp = np.array([rhs(0.0, s)[0] for s in states])
    fold = bool(np.any(np.sign(xp) != np.sign(xp[0])) or np.any(np.abs(xp) <= tol))
    notes = []
    if fold:
        notes.append("fold: dx/dt vanishes along the curve")
        keep = np.cumprod(np.sign(xp) == np.sign(xp[0])).astype(bool)
    else:
        keep = np.ones(len(ts), dtype=bool)
    # reparameterize by x: centred difference quotient dy/dx against z
    idx = np.flatnonzero(keep)
    if len(idx) >= 3:
        i = idx[1:-1]
        slope = (y[i + 1] - y[i - 1]) / (x[i + 1] - x[i - 1])
        slope_error = float(np.max(np.abs(slope - z[i])))
    else:
        slope_error = float("nan")
    stationary = bool(abs(z0 - a(z0)) <= tol)
    if stationary:
        notes.append("stationary z: z - a(z) vanishes at z0")
    return ClairautCurve(ts, x, y, z, residual, slope_error, stationary, fold, tuple(notes))


# ---------------------------------------------------------------- Hamilton-Jacobi problems

KINDS = ("linear", "quasilinear", "nonlinear")


def _fd_partial(fun: Callable, args: list, which: int, h: float = 1e-3) -> np.ndarray:
    """Partial derivatives of a batched scalar ``fun(*args)`` in argument ``which``.

    Returns shape ``(B,)`` for scalar arguments and ``(B, n)`` for vector ones.
    """
    v = np.asarray(args[which], dtype=float)
    s = h * (1.0 + np.abs(v))

    def shifted(delta, j=None):
        new = list(args)
        w = v.copy()
        if j is None:
            w = w + delta
        else:
            w[..., j] = w[..., j] + delta[..., j]
        new[which] = w
        return np.asarray(fun(*new), dtype=float)

    def stencil(j=None):
        return (8.0 * (shifted(s, j) - shifted(-s, j))
                - (shifted(2 * s, j) - shifted(-2 * s, j))) / (12.0 * (s if j is None else s[..., j]))

    if v.ndim <= 1:
        return stencil()
    return np.stack([stencil(j) for j in range(v.shape[-1])], axis=-1)


@dataclass(frozen=True)
class HJProblem:
    """Cauchy problem for a first-order equation solved along characteristics.

    ``kind`` "linear"/"quasilinear" uses ``g(t, x, u)`` and ``L(t, x, u)``;
    "nonlinear" uses ``H(t, x, u, p)`` with optional analytic partials
    ``H_x``, ``H_u``, ``H_p`` (finite differences otherwise).  ``x_axes`` is a
    tuple of uniform 1-D node arrays, one per space dimension.
    """

    kind: str
    u0: Callable
    x_axes: tuple
    t_grid: TimeGrid
    H: Optional[Callable] = None
    H_x: Optional[Callable] = None
    H_u: Optional[Callable] = None
    H_p: Optional[Callable] = None
    g: Optional[Callable] = None
    L: Optional[Callable] = None
    grad_u0: Optional[Callable] = None
    substeps: int = 4
    lattice_factor: int = 4
    lattice_margin: float = 0.1
    compat_tol: float = 1e-6

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"kind must be one of {KINDS}, got {self.kind!r}")
        axes = self.x_axes
        if isinstance(axes, np.ndarray) and axes.ndim == 1:
            axes = (axes,)
        axes = tuple(np.asarray(a, dtype=float) for a in axes)
        if not axes or any(a.ndim != 1 or a.size < 1 for a in axes):
            raise DomainError("x_axes must be a nonempty tuple of nonempty 1-D arrays")
        object.__setattr__(self, "x_axes", axes)
        if self.kind == "nonlinear" and self.H is None:
            raise DomainError("nonlinear problems need a Hamiltonian H")
        if self.kind != "nonlinear" and (self.g is None or self.L is None):
            raise DomainError("linear/quasilinear problems need g and L")
        if self.substeps < 1 or self.lattice_factor < 1:
            raise DomainError("substeps and lattice_factor must be >= 1")

    @property
    def dim(self) -> int:
        return len(self.x_axes)

    @property
    def t0(self) -> float:
        return self.t_grid.t0

    # batched pieces --------------------------------------------------------

    def initial_u(self, xi):
        return np.asarray(self.u0(xi), dtype=float).reshape(len(xi))

    def initial_p(self, xi):
        if self.grad_u0 is not None:
            return np.asarray(self.grad_u0(xi), dtype=float).reshape(xi.shape)
        return _fd_partial(lambda x: self.u0(x), [xi], 0)

    def hamiltonian(self, t, x, u, p):
        return np.asarray(self.H(t, x, u, p), dtype=float)

    def partials(self, t, x, u, p):
        args = [t, x, u, p]
        Hx = self.H_x(t, x, u, p) if self.H_x else _fd_partial(self.H, args, 1)
        Hu = self.H_u(t, x, u, p) if self.H_u else _fd_partial(self.H, args, 2)
        Hp = self.H_p(t, x, u, p) if self.H_p else _fd_partial(self.H, args, 3)
        return (np.asarray(Hx, dtype=float).reshape(x.shape),
                np.broadcast_to(np.asarray(Hu, dtype=float), u.shape),
                np.asarray(Hp, dtype=float).reshape(p.shape))


@dataclass(frozen=True)
class CharStrip:
    """One characteristic strip sampled on the time grid."""

    label: np.ndarray
    times: np.ndarray
    x: np.ndarray
    p: Optional[np.ndarray]
    u: np.ndarray


def _strip_rhs(problem: HJProblem) -> Callable:
    n = problem.dim
    if problem.kind == "nonlinear":
        def rhs(t, s):
            x, p, u = s[:, :n], s[:, n:2 * n], s[:, 2 * n]
            Hx, Hu, Hp = problem.partials(t, x, u, p)
            H = problem.hamiltonian(t, x, u, p)
            du = -H + np.sum(p * Hp, axis=1)
            return np.column_stack([Hp, -(Hx + p * Hu[:, None]), du])
    else:
        def rhs(t, s):
            x, u = s[:, :n], s[:, n]
            gx = np.asarray(problem.g(t, x, u), dtype=float).reshape(x.shape)
            Lx = np.broadcast_to(np.asarray(problem.L(t, x, u), dtype=float), u.shape)
            return np.column_stack([gx, Lx])
    return rhs


def _initial_states(problem: HJProblem, xi: np.ndarray) -> np.ndarray:
    u = problem.initial_u(xi)
    if problem.kind == "nonlinear":
        return np.column_stack([xi, problem.initial_p(xi), u])
    return np.column_stack([xi, u])


def _fine_times(problem: HJProblem, k: int) -> np.ndarray:
    g = problem.t_grid
    return np.linspace(g.t0, g.nodes[k], k * problem.substeps + 1)


def _march(problem: HJProblem, xi: np.ndarray, upto: int, record: bool = False):
    """Integrate strips from labels ``xi`` to time node ``upto``."""
    rhs = _strip_rhs(problem)
    s = _initial_states(problem, xi)
    if upto == 0:
        return s[None] if record else s
    ts = _fine_times(problem, upto)
    out = [s] if record else None
    for i in range(len(ts) - 1):
        h = ts[i + 1] - ts[i]
        k1 = rhs(ts[i], s)
        k2 = rhs(ts[i] + 0.5 * h, s + 0.5 * h * k1)
        k3 = rhs(ts[i] + 0.5 * h, s + 0.5 * h * k2)
        k4 = rhs(ts[i] + h, s + h * k3)
        s = s + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if record and (i + 1) % problem.substeps == 0:
            out.append(s)
    if not np.all(np.isfinite(s)):
        raise CausticError("characteristic strips blew up", location=(problem.t_grid.nodes[upto], None))
    return np.array(out) if record else s


def characteristic_strips(problem: HJProblem, labels) -> list:
    """Strips through the given labels, one ``CharStrip`` per label."""
    xi = np.atleast_2d(np.asarray(labels, dtype=float))
    if xi.shape[1] != problem.dim:
        xi = xi.reshape(-1, problem.dim)
    hist = _march(problem, xi, problem.t_grid.n, record=True)
    n = problem.dim
    strips = []
    for j in range(len(xi)):
        traj = hist[:, j]
        p = traj[:, n:2 * n] if problem.kind == "nonlinear" else None
        strips.append(CharStrip(xi[j], problem.t_grid.nodes, traj[:, :n], p, traj[:, -1]))
    return strips


def _uniform_step(a: np.ndarray) -> float:
    if a.size < 2:
        return 1.0
    d = np.diff(a)
    if np.max(np.abs(d - d[0])) > 1e-9 * max(1.0, abs(d[0])):
        raise DomainError("spatial axes must be uniform")
    return float(d[0])


def _lattice_axes(problem: HJProblem):
    axes = []
    for a in problem.x_axes:
        h = _uniform_step(a)
        lo, hi = float(a[0]), float(a[-1])
        margin = problem.lattice_margin * max(hi - lo, 1.0)
        m = max(5, int(round((hi - lo + 2 * margin) / h * problem.lattice_factor)) + 1)
        axes.append(np.linspace(lo - margin, hi + margin, m))
    return axes


def _fd4_axis(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Fourth-order central derivative; the two nodes at each end are NaN."""
    v = np.moveaxis(values, axis, 0)
    out = np.full_like(v, np.nan)
    out[2:-2] = (8.0 * (v[3:-1] - v[1:-3]) - (v[4:] - v[:-4])) / (12.0 * h)
    return np.moveaxis(out, 0, axis)


@dataclass(frozen=True)
class CompatibilityReport:
    """``max |d u / d xi_k - <p, d x / d xi_k>|`` per time node on the lattice."""

    values: np.ndarray
    initial: float
    tol: float
    passed: bool
    monotone: bool


@dataclass(frozen=True)
class HJSolution:
    u: SolutionTable
    p: Optional[SolutionTable]
    compatibility: Optional[CompatibilityReport]
    inversion_residual: float
    newton_iterations: np.ndarray
    psi: np.ndarray = field(repr=False)


def _lattice_history(problem: HJProblem):
    """Strips from the lattice, recorded at every time node."""
    axes = _lattice_axes(problem)
    mesh = np.meshgrid(*axes, indexing="ij")
    xi = np.stack([m.ravel() for m in mesh], axis=-1)
    hist = _march(problem, xi, problem.t_grid.n, record=True)
    shape = tuple(a.size for a in axes)
    return axes, hist.reshape((hist.shape[0],) + shape + (hist.shape[-1],))


def _lattice_jacobians(problem: HJProblem, axes, hist):
    """``d x / d xi`` on the lattice for every time node, shape (K, *lattice, n, n)."""
    n = problem.dim
    steps = [a[1] - a[0] for a in axes]
    cols = []
    for k in range(n):
        cols.append(_fd4_axis(hist[..., :n], steps[k], axis=1 + k))
    J = np.stack(cols, axis=-1)
    return J


def _compatibility(problem: HJProblem, axes, hist, tol) -> CompatibilityReport:
    n = problem.dim
    steps = [a[1] - a[0] for a in axes]
    lam = np.zeros(hist.shape[0])
    for k in range(n):
        du = _fd4_axis(hist[..., -1], steps[k], axis=1 + k)
        dx = _fd4_axis(hist[..., :n], steps[k], axis=1 + k)
        p = hist[..., n:2 * n]
        val = np.abs(du - np.sum(p * dx, axis=-1))
        lam = np.maximum(lam, np.nanmax(val.reshape(hist.shape[0], -1), axis=1))
    monotone = bool(np.all(lam <= lam[0] + tol))
    return CompatibilityReport(lam, float(lam[0]), tol, bool(np.all(lam <= tol)), monotone)


def _invert(problem: HJProblem, X: np.ndarray, seed: np.ndarray, k: int, jac_interp):
    """Damped Newton for ``x_hat(t_k, xi) = X`` with exact strip re-integration."""
    n = problem.dim
    t = problem.t_grid.nodes[k]
    xi = seed.copy()
    state = _march(problem, xi, k)
    r = state[:, :n] - X
    rn = np.max(np.abs(r), axis=1)
    for it in range(1, NEWTON_MAX + 1):
        active = rn > NEWTON_TOL
        if not np.any(active):
            return xi, state, it - 1
        idx = np.flatnonzero(active)
        J = jac_interp(xi[idx])
        det = np.linalg.det(J)
        if np.any(~np.isfinite(det)) or np.any(det <= 0.0):
            bad = idx[np.argmax(~np.isfinite(det) | (det <= 0.0))]
            raise CausticError(f"characteristic map degenerates at t={t:.6g}",
                               location=(t, X[bad].copy()))
        step = np.linalg.solve(J, r[idx][..., None])[..., 0]
        lam = np.ones(len(idx))
        pending = np.arange(len(idx))
        for _ in range(MAX_HALVINGS + 1):
            trial = xi[idx[pending]] - lam[pending, None] * step[pending]
            st = _march(problem, trial, k)
            rt = np.max(np.abs(st[:, :n] - X[idx[pending]]), axis=1)
            ok = rt < rn[idx[pending]]
            acc = idx[pending[ok]]
            xi[acc] = trial[ok]
            state[acc] = st[ok]
            r[acc] = st[ok][:, :n] - X[acc]
            rn[acc] = rt[ok]
            pending = pending[~ok]
            if pending.size == 0:
                break
            lam[pending] *= 0.5
        if pending.size:
            # no decrease even after halving: accept only if already converged
            stuck = idx[pending]
            if np.any(rn[stuck] > NEWTON_TOL):
                bad = stuck[np.argmax(rn[stuck])]
                raise CausticError(
                    f"Newton inversion stalled at t={t:.6g} (residual {rn[bad]:.3e})",
                    location=(t, X[bad].copy()))
    if np.any(rn > NEWTON_TOL):
        bad = int(np.argmax(rn))
        raise CausticError(f"Newton inversion did not reach {NEWTON_TOL} in {NEWTON_MAX} steps "
                           f"at t={t:.6g}", location=(t, X[bad].copy()))
    return xi, state, NEWTON_MAX


def _check_fold(problem, k, xhat, J, lo, hi):
    """Caustic if the lattice Jacobian degenerates anywhere its image meets the output box."""
    n = problem.dim
    xs = xhat.reshape(-1, n)
    det = np.linalg.det(J.reshape(-1, n, n))
    inside = np.all((xs >= lo) & (xs <= hi), axis=1)
    bad = inside & ~(det > 0.0)
    if np.any(bad):
        i = np.flatnonzero(bad)[np.argmin(det[bad])]
        t = problem.t_grid.nodes[k]
        raise CausticError(f"characteristics cross at t={t:.6g} (det {det[i]:.3e})",
                           location=(t, xs[i].copy()))


def _solve(problem: HJProblem) -> HJSolution:
    n = problem.dim
    axes = problem.x_axes
    mesh = np.meshgrid(*axes, indexing="ij")
    X = np.stack([m.ravel() for m in mesh], axis=-1)
    grid_shape = tuple(a.size for a in axes)
    K = problem.t_grid.n + 1

    laxes, hist = _lattice_history(problem)
    Jlat = _lattice_jacobians(problem, laxes, hist)
    compat = _compatibility(problem, laxes, hist, problem.compat_tol) \
        if problem.kind == "nonlinear" else None
    # interior lattice nodes where the 4th-order stencil is defined
    inner = tuple(slice(2, -2) for _ in range(n))
    inner_axes = [a[2:-2] for a in laxes]

    U = np.empty((K,) + grid_shape)
    P = np.empty((K,) + grid_shape + (n,)) if problem.kind == "nonlinear" else None
    psi = np.empty((K, X.shape[0], n))
    iters = np.zeros(K, dtype=int)
    worst = 0.0

    state = _initial_states(problem, X)
    xi = X.copy()
    psi[0] = xi
    U[0] = state[:, -1].reshape(grid_shape)
    if P is not None:
        P[0] = state[:, n:2 * n].reshape(grid_shape + (n,))
    lo = np.array([a[0] for a in axes])
    hi = np.array([a[-1] for a in axes])
    for k in range(1, K):
        Jk = Jlat[k][inner]
        _check_fold(problem, k, hist[k][inner][..., :n], Jk, lo, hi)
        interp = RegularGridInterpolator(inner_axes, Jk, bounds_error=False, fill_value=None)
        xi, state, it = _invert(problem, X, xi, k, interp)
        iters[k] = it
        worst = max(worst, float(np.max(np.abs(state[:, :n] - X))))
        psi[k] = xi
        U[k] = state[:, -1].reshape(grid_shape)
        if P is not None:
            P[k] = state[:, n:2 * n].reshape(grid_shape + (n,))
    if compat is not None and not compat.passed:
        raise IntegrityError(f"strip compatibility breached: max |lambda| = "
                             f"{np.max(compat.values):.3e} > {compat.tol}")
    names = ["x"] if n == 1 else [f"x{i + 1}" for i in range(n)]
    tax = (("t", problem.t_grid.nodes),) + tuple(zip(names, axes))
    info = {"kind": problem.kind, "inversion_residual": worst,
            "lattice_nodes": int(np.prod([a.size for a in laxes]))}
    method = "characteristics-" + problem.kind
    u_table = SolutionTable(tax, U, method, info)
    p_table = SolutionTable(tax, P if n > 1 else P[..., 0], method, info) if P is not None else None
    return HJSolution(u_table, p_table, compat, worst, iters, psi)


def solve_quasilinear_hj(problem: HJProblem) -> HJSolution:
    """``S(t, x) = u(t, psi(t, x))`` from strips ``x' = g``, ``u' = L``."""
    if problem.kind not in ("linear", "quasilinear"):
        raise DomainError("solve_quasilinear_hj needs kind 'linear' or 'quasilinear'")
    return _solve(problem)


def solve_nonlinear_hj(problem: HJProblem) -> HJSolution:
    """Full strips ``x' = H_p``, ``p' = -(H_x + p H_u)``, ``u' = -H + <p, H_p>``.

    Raises ``CausticError`` when inversion fails and ``IntegrityError`` when
    the lattice compatibility defect exceeds ``problem.compat_tol``.
    """
    if problem.kind != "nonlinear":
        raise DomainError("solve_nonlinear_hj needs kind 'nonlinear'")
    return _solve(problem)


@dataclass(frozen=True)
class ResidualEstimate:
    max_residual: float
    constant: float
    h_t: float
    h_x: float
    residual: np.ndarray = field(repr=False)


def hj_residual(problem: HJProblem, u_table: SolutionTable, scheme: str = "central") -> ResidualEstimate:
    """Finite-difference residual of the governing equation at interior nodes.

    ``scheme="central"``: second order in t, fourth order in x.
    ``scheme="low"``: forward difference in t, second order central in x,
    so the residual behaves like ``C (h_t + h_x^2)``.
    """
    U = np.asarray(u_table.values, dtype=float)
    ts = u_table.axes[0][1]
    axes = [a for _, a in u_table.axes[1:]]
    n = len(axes)
    ht = float(ts[1] - ts[0])
    hs = [_uniform_step(a) for a in axes]
    if scheme == "central":
        Ut = np.full_like(U, np.nan)
        Ut[1:-1] = (U[2:] - U[:-2]) / (2 * ht)
        grads = [_fd4_axis(U, h, 1 + k) for k, h in enumerate(hs)]
    elif scheme == "low":
        Ut = np.full_like(U, np.nan)
        Ut[:-1] = (U[1:] - U[:-1]) / ht
        grads = []
        for k, h in enumerate(hs):
            v = np.moveaxis(U, 1 + k, 0)
            d = np.full_like(v, np.nan)
            d[1:-1] = (v[2:] - v[:-2]) / (2 * h)
            grads.append(np.moveaxis(d, 0, 1 + k))
    else:
        raise DomainError(f"unknown residual scheme {scheme!r}")
    mesh = np.meshgrid(ts, *axes, indexing="ij")
    T = mesh[0].ravel()
    Xb = np.stack([m.ravel() for m in mesh[1:]], axis=-1)
    Ub = U.ravel()
    Pb = np.stack([g.ravel() for g in grads], axis=-1)
    ok = np.isfinite(Ut.ravel()) & np.all(np.isfinite(Pb), axis=1)
    res = np.full(U.size, np.nan)
    t_vals = np.unique(T[ok])
    for t in t_vals:
        sel = ok & (T == t)
        if problem.kind == "nonlinear":
            r = Ut.ravel()[sel] + problem.hamiltonian(t, Xb[sel], Ub[sel], Pb[sel])
        else:
            g = np.asarray(problem.g(t, Xb[sel], Ub[sel]), dtype=float).reshape(-1, n)
            r = Ut.ravel()[sel] + np.sum(Pb[sel] * g, axis=1) - problem.L(t, Xb[sel], Ub[sel])
        res[sel] = r
    res = res.reshape(U.shape)
    mx = float(np.nanmax(np.abs(res)))
    hx = max(hs)
    return ResidualEstimate(mx, mx / (ht + hx**2), ht, hx, res)
