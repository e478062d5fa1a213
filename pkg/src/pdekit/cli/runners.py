"""Solver dispatch for the three verbs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..core import SolutionTable, TimeGrid, write_csv
from ..errors import DomainError
from ..first_order_pde import HJProblem, hj_residual, solve_nonlinear_hj
from ..ode_core import fundamental_matrix, liouville_check
from ..quadrature import QuadratureSpec
from ..second_order import (WaveProblem, dalembert_solve, heat_kernel_mass, heat_solve_grid,
                            kirchhoff_solve, max_principle_check, poisson_kernel_sphere_integral)
from ..stochastic import (SDEProblem, integrate_approx_ode, integrate_stratonovich, loglog_slope,
                          sample_wiener, smooth_path_ou, wz_convergence_study)
from .expr import ExpressionError, parse_expr
from .problem import ProblemFile, ProblemFileError


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tol: float
    passed: bool

    def line(self) -> str:
        return f"check {self.name} = {self.value:.6e} (limit {self.tol:.3e}) {'PASS' if self.passed else 'FAIL'}"


@dataclass
class Outcome:
    """What a runner produced: CSV text, checks and free-form notes."""

    csv: str
    checks: list = field(default_factory=list)
    notes: list = field(default_factory=list)


def _times(pf: ProblemFile):
    ts = pf.numbers("t", section="grid")
    if not ts or min(ts) < 0:
        raise ProblemFileError("[grid] t must be a nonempty list of nonnegative times")
    return np.array(ts)


# ---------------------------------------------------------------- solve


def _hj_problem(pf: ProblemFile) -> HJProblem:
    H = pf.expr("H", ("t", "x", "u", "p"))
    u0 = pf.expr("u0", ("x",))
    xs = pf.linspace("x")
    grid = TimeGrid(0.0, pf.number("t1", section="grid"), pf.integer("nt", section="grid"))
    Hx, Hu, Hp, du0 = H.diff("x"), H.diff("u"), H.diff("p"), u0.diff("x")

    def call(e):
        return lambda t, x, u, p: e(t=t, x=x[:, 0], u=u, p=p[:, 0])

    def col(e):
        return lambda t, x, u, p: e(t=t, x=x[:, 0], u=u, p=p[:, 0])[:, None]

    return HJProblem("nonlinear", u0=lambda X: u0(x=X[:, 0]), x_axes=(xs,), t_grid=grid, H=call(H),
                     H_x=col(Hx), H_u=call(Hu), H_p=col(Hp), grad_u0=lambda X: du0(x=X[:, 0])[:, None])


def _col0(e):
    return lambda X: e(x=np.asarray(X, dtype=float).reshape(len(X), -1)[:, 0])


def solve_heat(pf):
    phi = pf.expr("phi", ("x",))
    table = heat_solve_grid(_col0(phi), _times(pf), pf.linspace("x"),
                            diffusivity=pf.number("diffusivity", 1.0))
    return Outcome(table.to_csv())


def solve_wave1d(pf):
    u0, u1 = pf.expr("u0", ("x",)), pf.expr("u1", ("x",), "0")
    p = WaveProblem(1, pf.number("c", 1.0), _col0(u0), _col0(u1))
    ts, xs = _times(pf), pf.linspace("x")
    vals = np.array([[dalembert_solve(p, t, x) for x in xs] for t in ts])
    return Outcome(SolutionTable((("t", ts), ("x", xs)), vals, "dalembert").to_csv())


def solve_hj(pf):
    sol = solve_nonlinear_hj(_hj_problem(pf))
    return Outcome(sol.u.to_csv(), notes=[f"inversion residual {sol.inversion_residual:.3e}"])


def _sde(pf) -> SDEProblem:
    f, g = pf.expr("f", ("t", "x")), pf.expr("g", ("t", "x"))
    return SDEProblem(lambda t, x: f(t=t, x=x[..., 0])[..., None],
                      lambda t, x: g(t=t, x=x[..., 0])[..., None, None],
                      (pf.number("x0"),), pf.number("T", 1.0))


def solve_sde(pf):
    p = _sde(pf)
    n = pf.integer("n_steps", 1000, section="grid")
    path = sample_wiener(np.linspace(0.0, p.T, n + 1), 1, pf.seed)
    cols = [path.times, path.w[:, 0], integrate_stratonovich(p, path).states[:, 0]]
    header = ["t", "w", "x"]
    if "eps" in pf.params:
        eps = pf.number("eps")
        cols.append(integrate_approx_ode(p, smooth_path_ou(path, eps)).states[:, 0])
        header.append("x_eps")
    return Outcome(write_csv(header, np.column_stack(cols)))


# ---------------------------------------------------------------- verify


def verify_kernel(pf):
    kernel = pf.text("kernel")
    nodes = pf.integer("nodes", 64)
    tol = pf.number("tol", 1e-8, section="checks")
    if kernel == "heat":
        point = pf.numbers("x", "0")
        sigma = pf.number("sigma", 1.0)
        mass = heat_kernel_mass(sigma, point, nodes=nodes)
    elif kernel == "poisson":
        point = pf.numbers("y", "0, 0, 0")
        mass = poisson_kernel_sphere_integral(np.array(point), pf.number("r", 1.0), len(point),
                                              QuadratureSpec("sphere", (nodes,)))
    else:
        raise ProblemFileError(f"kernel must be 'heat' or 'poisson', got {kernel!r}")
    res = abs(mass - 1.0)
    rows = [(kernel, mass, res)]
    return Outcome(write_csv(["kernel", "integral", "residual"], rows),
                   [Check(f"{kernel}-kernel-normalization", res, tol, res <= tol)])


def verify_max_principle(pf):
    kind = pf.text("kind", "harmonic")
    if kind == "heat":
        u = pf.expr("u", ("t", "x"))
        a1, a2 = pf.linspace("t"), pf.linspace("x")
        names = ("t", "x")
        vals = u(t=a1[:, None], x=a2[None, :])
    elif kind == "harmonic":
        u = pf.expr("u", ("x", "y"))
        a1, a2 = pf.linspace("x"), pf.linspace("y")
        names = ("x", "y")
        X, Y = np.meshgrid(a1, a2, indexing="ij")
        vals = u(x=X, y=Y)
        if pf.text("domain", "rectangle") == "disk":
            cx, cy = 0.5 * (a1[0] + a1[-1]), 0.5 * (a2[0] + a2[-1])
            R = min(a1[-1] - cx, a2[-1] - cy)
            vals = np.where((X - cx) ** 2 + (Y - cy) ** 2 <= R * R * (1 + 1e-12), vals, np.nan)
    else:
        raise ProblemFileError(f"max-principle kind must be 'harmonic' or 'heat', got {kind!r}")
    table = SolutionTable(((names[0], a1), (names[1], a2)), vals, "candidate")
    tol = pf.number("tol", 1e-12, section="checks")
    rep = max_principle_check(table, kind, tol=tol)
    excess = max(rep.max_value - rep.boundary_max, rep.boundary_min - rep.min_value, 0.0)
    notes = [] if rep.passed else [f"interior extremum at {names[0]}={rep.witness[0]:.6g}, "
                                   f"{names[1]}={rep.witness[1]:.6g}"]
    return Outcome(table.to_csv(), [Check("max-principle-excess", excess, tol, rep.passed)], notes)


def verify_liouville(pf):
    rows = [r for r in pf.text("A").split(";") if r.strip()]
    entries = [[e for e in r.split(",")] for r in rows]
    n = len(entries)
    if n == 0 or any(len(r) != n for r in entries):
        raise ProblemFileError("[params] A must be a square matrix: rows ';', entries ','")
    try:
        exprs = [[parse_expr(e, ("x",)) for e in r] for r in entries]
    except ExpressionError as exc:
        raise ProblemFileError(f"[params] A: {exc}") from None
    A = lambda x: np.array([[float(e(x=x)) for e in r] for r in exprs])  # noqa: E731
    xs = pf.linspace("x")
    x0 = pf.number("x0", xs[0], section="grid")
    grid = TimeGrid(xs[0], xs[-1], xs.size - 1)
    table = fundamental_matrix(A, x0, grid)
    tol = pf.number("tol", 1e-6, section="checks")
    rep = liouville_check(A, table, tol)
    csv = write_csv(["x", "det", "exp_trace_integral"],
                    np.column_stack([table.nodes, table.det, rep.details["wronskian"]]))
    return Outcome(csv, [Check("liouville-relative", rep.residual, tol, rep.passed)])


def verify_residual(pf):
    prob = _hj_problem(pf)
    sol = solve_nonlinear_hj(prob)
    est = hj_residual(prob, sol.u)
    tol = pf.number("tol", 1e-3, section="checks")
    return Outcome(sol.u.to_csv(), [Check("hj-pde-residual", est.max_residual, tol, est.max_residual <= tol)])


# ---------------------------------------------------------------- converge


def _sweep(pf, key):
    vals = pf.numbers(key, "", section="sweep")
    if not vals:
        raise ProblemFileError(f"[sweep] {key} is empty")
    return vals


def _band(pf, lo_default, hi_default=math.inf):
    return (pf.number("min_slope", lo_default, section="checks"),
            pf.number("max_slope", hi_default, section="checks") if "max_slope" in pf.checks else hi_default)


def converge_wz(pf):
    eps = _sweep(pf, "eps")
    if any(b >= a for a, b in zip(eps, eps[1:])) or min(eps) <= 0:
        raise ProblemFileError("[sweep] eps must be positive and decreasing")
    study = wz_convergence_study(_sde(pf), eps, n_paths=pf.integer("n_paths", 1000, section="sweep"),
                                 seed=pf.seed, n_steps=pf.integer("n_steps", 2000, section="sweep"))
    lo, hi = _band(pf, 0.8)
    if study.slope is None:
        return Outcome(study.to_csv(), notes=["no diffusion: slope not fitted"])
    return Outcome(study.to_csv(), [Check("wz-loglog-slope", study.slope, lo, lo <= study.slope <= hi)],
                   [f"slope band [{lo}, {hi}]"])


def converge_wave(pf):
    hs = _sweep(pf, "h")
    if any(b >= a for a, b in zip(hs, hs[1:])) or min(hs) <= 0 or len(hs) < 2:
        raise ProblemFileError("[sweep] h needs at least two positive decreasing steps")
    u0 = pf.expr("u0", ("x", "y", "z"))
    u1 = pf.expr("u1", ("x", "y", "z"), "0")
    c = pf.number("c", 1.0)
    p = WaveProblem(3, c, lambda X: u0(x=X[:, 0], y=X[:, 1], z=X[:, 2]),
                    lambda X: u1(x=X[:, 0], y=X[:, 1], z=X[:, 2]))
    t0 = pf.number("t0", 0.6)
    P = np.array(pf.numbers("point", "0, 0, 0"))
    if P.size != 3:
        raise ProblemFileError("[params] point needs three coordinates")
    if t0 - max(hs) <= 0:
        raise DomainError("t0 must exceed the largest step")
    res = []
    for h in hs:
        centre = kirchhoff_solve(p, t0, P)
        utt = (kirchhoff_solve(p, t0 + h, P) - 2 * centre + kirchhoff_solve(p, t0 - h, P)) / h**2
        lap = sum(kirchhoff_solve(p, t0, P + h * e) + kirchhoff_solve(p, t0, P - h * e) - 2 * centre
                  for e in np.eye(3)) / h**2
        res.append(abs(utt - c * c * lap))
    slope = loglog_slope(hs, res)
    lo, hi = _band(pf, 1.7, 2.5)
    return Outcome(write_csv(["h", "residual"], zip(hs, res)),
                   [Check("wave-residual-order", slope, lo, lo <= slope <= hi)], [f"order band [{lo}, {hi}]"])


SOLVE = {"heat": solve_heat, "wave1d": solve_wave1d, "hamilton_jacobi": solve_hj, "sde": solve_sde}
VERIFY = {"kernel_normalization": verify_kernel, "max_principle": verify_max_principle,
          "liouville": verify_liouville, "residual": verify_residual}
CONVERGE = {"wong_zakai": converge_wz, "wave_residual": converge_wave}
VERBS = {"solve": SOLVE, "verify": VERIFY, "converge": CONVERGE}
