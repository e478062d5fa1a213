import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import assume, given, settings, strategies as st
from pytest import approx
from scipy.optimize import brentq

from pdekit.ck_series import (
    EvolutionSystem,
    OrderLimitError,
    T,
    X,
    ck_majorant_radius,
    ck_series_solve,
    laplace_evolution_system,
    series_residual,
)
from pdekit.core import FieldSpec, TimeGrid
from pdekit.errors import CausticError, DomainError, UnsupportedError
from pdekit.first_order_pde import (
    HJProblem,
    characteristic_strips,
    hj_residual,
    solve_clairaut,
    solve_nonlinear_hj,
    solve_quasilinear_hj,
    verify_first_integral,
)

# ---------------------------------------------------------------- first integrals

HAMILTON = FieldSpec(lambda y: np.array([y[1], -y[0]]), autonomous=True)


class TestFirstIntegral:
    samples = np.random.default_rng(0).uniform(-1, 1, size=(20, 2))

    def test_energy(self):
        rep = verify_first_integral(lambda y: 0.5 * (y[0] ** 2 + y[1] ** 2), HAMILTON,
                                    self.samples)
        assert rep.passed
        assert rep.gradient_residual < 1e-8 and rep.drift < 1e-8

    def test_constant_flagged(self):
        rep = verify_first_integral(lambda y: 3.0, HAMILTON, self.samples)
        assert rep.gradient_residual == 0.0
        assert rep.constant and not rep.passed
        assert "constant" in rep.notes[0]

    def test_translation(self):
        rep = verify_first_integral(lambda y: y[1], lambda y: np.array([1.0, 0.0]), self.samples,
                                    grad_u=lambda y: np.array([0.0, 1.0]))
        assert rep.gradient_residual == 0.0 and rep.passed

    def test_non_integral(self):
        rep = verify_first_integral(lambda y: y[0], HAMILTON, self.samples)
        assert not rep.passed


# ---------------------------------------------------------------- Clairaut


class TestClairaut:
    grid = TimeGrid(0.0, 1.0, 200)

    def test_clairaut_line(self):
        c = solve_clairaut(lambda z: z, lambda z: z * z, (1.0, 2.0, 1.0), self.grid)
        assert c.residual < 1e-8
        assert np.allclose(c.z, 1.0)
        assert np.allclose(c.y, c.x + 1.0, atol=1e-12)
        assert c.slope_error < 1e-8

    def test_lines_through_origin(self):
        c = solve_clairaut(lambda z: z, lambda z: 0.0 * z, (1.0, 0.7, 0.7), self.grid)
        assert np.allclose(c.y, 0.7 * c.x, atol=1e-12)
        assert c.residual < 1e-8

    def test_stationary_z(self):
        c = solve_clairaut(lambda z: 0.0 * z, lambda z: z, (0.0, 0.0, 0.0), self.grid)
        assert c.stationary_z
        assert np.all(c.z == 0.0)

    def test_curved_family(self):
        # a(z) = z^2 moves z; the implicit relation must still hold
        c = solve_clairaut(lambda z: z * z, lambda z: math.sin(z), (0.5, 0.5 * 0.09 + math.sin(0.3), 0.3),
                           TimeGrid(0.0, 0.5, 2000))
        assert c.residual < 1e-8
        assert c.slope_error < 1e-5

    def test_inconsistent_start(self):
        with pytest.raises(DomainError):
            solve_clairaut(lambda z: z, lambda z: z * z, (1.0, 5.0, 1.0), self.grid)
        with pytest.raises(DomainError):
            solve_clairaut(lambda z: z, lambda z: z * z, (-2.0, -1.0, 1.0), self.grid)


# ---------------------------------------------------------------- Hamilton-Jacobi

XS = np.linspace(-2.0, 2.0, 41)


def _linear(a, phi, grid, L=None):
    return HJProblem("linear", u0=lambda x: phi(x[:, 0]), x_axes=(XS,), t_grid=grid,
                     g=lambda t, x, u: np.full_like(x, a),
                     L=L or (lambda t, x, u: 0.0 * u))


class TestQuasilinear:
    def test_translation(self):
        grid = TimeGrid(0.0, 1.0, 20)
        sol = solve_quasilinear_hj(_linear(0.7, np.sin, grid))
        t = grid.nodes[:, None]
        assert np.allclose(sol.u.values, np.sin(XS[None] - 0.7 * t), atol=1e-9)
        assert sol.inversion_residual <= 1e-9

    def test_pure_source(self):
        grid = TimeGrid(0.5, 1.5, 10)
        prob = HJProblem("linear", u0=lambda x: x[:, 0] ** 2, x_axes=(XS,), t_grid=grid,
                         g=lambda t, x, u: 0.0 * x, L=lambda t, x, u: 2.5 + 0.0 * u)
        sol = solve_quasilinear_hj(prob)
        expect = XS[None] ** 2 + 2.5 * (grid.nodes[:, None] - 0.5)
        assert np.allclose(sol.u.values, expect, atol=1e-12)

    def test_time_dependent_linear_field(self):
        # dS/dt + a(t) x dS/dx = 0 with a = cos t: S = phi(x exp(-sin t))
        grid = TimeGrid(0.0, 1.0, 20)
        prob = HJProblem("linear", u0=lambda x: np.tanh(x[:, 0]), x_axes=(XS,), t_grid=grid,
                         g=lambda t, x, u: np.cos(t) * x, L=lambda t, x, u: 0.0 * u)
        sol = solve_quasilinear_hj(prob)
        t = grid.nodes[:, None]
        assert np.allclose(sol.u.values, np.tanh(XS[None] * np.exp(-np.sin(t))), atol=1e-8)

    def test_burgers(self):
        # S_t + S S_x = 0, S(0, x) = x: S = x / (1 + t)
        grid = TimeGrid(0.0, 1.0, 20)
        prob = HJProblem("quasilinear", u0=lambda x: x[:, 0], x_axes=(XS,), t_grid=grid,
                         g=lambda t, x, u: u[:, None], L=lambda t, x, u: 0.0 * u)
        sol = solve_quasilinear_hj(prob)
        assert np.allclose(sol.u.values, XS[None] / (1 + grid.nodes[:, None]), atol=1e-9)

    def test_two_dimensional_translation(self):
        ax = np.linspace(-1, 1, 11)
        grid = TimeGrid(0.0, 0.5, 5)
        prob = HJProblem("linear", u0=lambda x: np.sin(x[:, 0]) * np.cos(x[:, 1]),
                         x_axes=(ax, ax), t_grid=grid, lattice_factor=2,
                         g=lambda t, x, u: np.tile([0.3, -0.4], (len(x), 1)),
                         L=lambda t, x, u: 0.0 * u)
        sol = solve_quasilinear_hj(prob)
        T_, X1, X2 = np.meshgrid(grid.nodes, ax, ax, indexing="ij")
        assert np.allclose(sol.u.values, np.sin(X1 - 0.3 * T_) * np.cos(X2 + 0.4 * T_), atol=1e-9)

    def test_kind_mismatch(self):
        with pytest.raises(DomainError):
            solve_nonlinear_hj(_linear(1.0, np.sin, TimeGrid(0, 1, 4)))


def _cos_problem(nx=200, nt=50, t1=0.1, analytic=True):
    xs = np.linspace(-math.pi, math.pi, nx)
    extra = dict(H_p=lambda t, x, u, p: -2 * p, H_x=lambda t, x, u, p: 0 * x,
                 H_u=lambda t, x, u, p: 0 * u, grad_u0=lambda x: -np.sin(x)) if analytic else {}
    return HJProblem("nonlinear", u0=lambda x: np.cos(x[:, 0]), x_axes=(xs,),
                     t_grid=TimeGrid(0.0, t1, nt), H=lambda t, x, u, p: -p[:, 0] ** 2, **extra)


def _cos_exact(t, x):
    # strips x = l + 2 t sin l, u = cos l - t sin^2 l, monotone in l for t < 1/2
    lam = brentq(lambda l: l + 2 * t * math.sin(l) - x, x - 2 * t - 1e-9, x + 2 * t + 1e-9,
                 xtol=1e-15)
    return math.cos(lam) - t * math.sin(lam) ** 2


class TestNonlinearHJ:
    @pytest.fixture(scope="class")
    @staticmethod
    def cos_solution():
        prob = _cos_problem()
        return prob, solve_nonlinear_hj(prob)

    def test_matches_strip_oracle(self, cos_solution):
        prob, sol = cos_solution
        xs = prob.x_axes[0]
        for k in (10, 25, 50):
            t = prob.t_grid.nodes[k]
            expect = np.array([_cos_exact(t, x) for x in xs[::7]])
            assert np.max(np.abs(sol.u.values[k, ::7] - expect)) < 1e-9

    def test_pde_residual(self, cos_solution):
        prob, sol = cos_solution
        assert hj_residual(prob, sol.u).max_residual < 1e-4

    def test_gradient_table(self, cos_solution):
        prob, sol = cos_solution
        # p equals du/dx; compare with the derivative of the strip oracle at the end time
        lam = sol.psi[-1][:, 0]
        assert np.allclose(sol.p.values[-1], -np.sin(lam), atol=1e-10)

    def test_inversion_and_compatibility(self, cos_solution):
        _, sol = cos_solution
        assert sol.inversion_residual <= 1e-9
        comp = sol.compatibility
        assert np.max(comp.values) < 1e-6
        assert comp.monotone

    def test_constant_gradient(self):
        xs = np.linspace(-1, 1, 21)
        prob = HJProblem("nonlinear", u0=lambda x: 1.5 * x[:, 0], x_axes=(xs,),
                         t_grid=TimeGrid(0, 0.5, 10), H=lambda t, x, u, p: -p[:, 0] ** 2)
        sol = solve_nonlinear_hj(prob)
        expect = 1.5 * xs[None] + 2.25 * prob.t_grid.nodes[:, None]
        assert np.allclose(sol.u.values, expect, atol=1e-10)

    def test_decoupled_quadrature(self):
        # H = h(t, x): x frozen, u = u0 - int h dt
        xs = np.linspace(-1, 1, 21)
        prob = HJProblem("nonlinear", u0=lambda x: np.exp(x[:, 0]), x_axes=(xs,),
                         t_grid=TimeGrid(0, 1, 10), H=lambda t, x, u, p: np.cos(t) * x[:, 0])
        sol = solve_nonlinear_hj(prob)
        t = prob.t_grid.nodes[:, None]
        assert np.allclose(sol.u.values, np.exp(xs[None]) - np.sin(t) * xs[None], atol=1e-9)

    def test_finite_difference_fallback_agrees(self):
        a = solve_nonlinear_hj(_cos_problem(nx=40, nt=10))
        b = solve_nonlinear_hj(_cos_problem(nx=40, nt=10, analytic=False))
        assert np.max(np.abs(a.u.values - b.u.values)) < 1e-9

    def test_caustic(self):
        with pytest.raises(CausticError) as exc:
            solve_nonlinear_hj(_cos_problem(nx=60, nt=20, t1=1.0))
        t, x = exc.value.location
        assert 0.5 <= t <= 0.6

    def test_residual_refinement_rate(self):
        # low-order residual behaves like C (h_t + h_x^2): refine x by 2 and t by 4
        r1 = hj_residual(_cos_problem(40, 8), solve_nonlinear_hj(_cos_problem(40, 8)).u, "low")
        p2 = _cos_problem(79, 32)
        r2 = hj_residual(p2, solve_nonlinear_hj(p2).u, "low")
        ratio = r1.max_residual / r2.max_residual
        assert 3.0 <= ratio <= 5.0

    def test_strips(self):
        prob = _cos_problem(nx=10, nt=10)
        (s,) = characteristic_strips(prob, [0.4])
        t = prob.t_grid.nodes
        assert np.allclose(s.x[:, 0], 0.4 + 2 * t * math.sin(0.4), atol=1e-12)
        assert np.allclose(s.u, math.cos(0.4) - t * math.sin(0.4) ** 2, atol=1e-12)

    def test_problem_validation(self):
        with pytest.raises(DomainError):
            HJProblem("weird", u0=np.sin, x_axes=(XS,), t_grid=TimeGrid(0, 1, 2))
        with pytest.raises(DomainError):
            HJProblem("nonlinear", u0=np.sin, x_axes=(XS,), t_grid=TimeGrid(0, 1, 2))
        with pytest.raises(DomainError):
            HJProblem("linear", u0=np.sin, x_axes=(np.array([]),), t_grid=TimeGrid(0, 1, 2),
                      g=lambda *a: 0, L=lambda *a: 0)


# ---------------------------------------------------------------- Cauchy-Kowalevska


class TestCKSeries:
    def test_exercise_two(self):
        sol = ck_series_solve(laplace_evolution_system("x**2 + y**2"), 8)
        assert sp.expand(sol.as_expr(2) - T**2 * X**2 / 2) == 0
        assert sol.coefficient(2, 2, 2) == Fraction(1, 2)

    def test_exercise_three(self):
        sol = ck_series_solve(laplace_evolution_system("y**2"), 8)
        assert sp.expand(sol.as_expr(2) - (T**2 * X**2 / 2 - T**4 / 12)) == 0

    def test_zero_forcing(self):
        sol = ck_series_solve(laplace_evolution_system(0), 8)
        assert all(not c for c in sol.coefficients)

    def test_residual_vanishes(self):
        u1 = sp.Symbol("u1")
        system = EvolutionSystem(((T + u1,),), (X * u1 + 1 + T**2,))
        sol = ck_series_solve(system, 9)
        assert series_residual(system, sol, through=sol.order - 2) == {}
        # independent check with sympy differentiation and truncation
        u = sol.as_expr(0)
        r = sp.expand(sp.diff(u, T) - (T + u) * sp.diff(u, X) - (X * u + 1 + T**2))
        low = [m for m in sp.Poly(r, T, X).monoms() if sum(m) <= sol.order - 2]
        assert low == []

    def test_shifted_initial_data(self):
        # u_t = u_x, u(0, x) = x^3: u = (x + t)^3
        system = EvolutionSystem(((1,),), (0,), initial=(X**3,))
        sol = ck_series_solve(system, 6)
        assert sp.expand(sol.as_expr(0) - (X + T) ** 3) == 0
        assert sol.coefficient(0, 3) == 1

    def test_known_analytic_solution(self):
        # u_t = u^2 + 1, u(0) = 0: u = tan t
        u1 = sp.Symbol("u1")
        sol = ck_series_solve(EvolutionSystem(((0,),), (u1**2 + 1,)), 11)
        tan = sp.series(sp.tan(T), T, 0, 12).removeO()
        assert sp.expand(sol.as_expr(0) - tan) == 0

    def test_unsupported(self):
        with pytest.raises(UnsupportedError):
            ck_series_solve(EvolutionSystem(((0,),), (sp.sin(X),)), 4)

    def test_order_limit(self, monkeypatch):
        import pdekit.ck_series as ck
        monkeypatch.setattr(ck, "MAX_BITS", 8)
        u1 = sp.Symbol("u1")
        with pytest.raises(OrderLimitError):
            ck_series_solve(EvolutionSystem(((0,),), (u1**2 + 1,)), 14)

    def test_csv(self):
        sol = ck_series_solve(laplace_evolution_system("y**2"), 4)
        lines = sol.to_csv(j=2).splitlines()
        assert lines[0] == "l,k,numerator,denominator"
        assert "4,0,-1,12" in lines
        assert "2,2,1,2" in lines
        assert len(lines) == 1 + 15


class TestMajorant:
    def test_radius(self):
        assert ck_majorant_radius(1, 1, 16).T == 1.0

    def test_zero_data(self):
        m = ck_majorant_radius(2.0, 3, 4.0)
        for x in (-1.9, 0.0, 1.5):
            assert m.W(0.0, x) == 0.0

    def test_quadratic(self):
        m = ck_majorant_radius(1, 1, 1)
        for t in (0.0, 0.01, 0.05):
            w = m.W(t, 0.0)
            assert w == approx(0.5 * (1 - math.sqrt(1 - 4 * t)), abs=1e-15)
            assert w * w - w + t == approx(0.0, abs=1e-15)

    @settings(deadline=None, max_examples=40)
    @given(M=st.floats(0.1, 5), N=st.integers(1, 5), rho=st.floats(0.5, 10),
           ft=st.floats(0.05, 0.9), fx=st.floats(-0.9, 0.9))
    def test_solves_majorant_equation(self, M, N, rho, ft, fx):
        m = ck_majorant_radius(M, N, rho)
        t, x = ft * m.T, fx * math.sqrt(rho) * 0.9
        # W is real for t < T only where x <= rho / 2
        assume(x <= 0.45 * rho)
        h = 1e-6 * max(m.T, 1e-3)
        wt = (m.W(t + h, x) - m.W(t - h, x)) / (2 * h)
        k = 1e-6
        wx = (m.W(t, x + k) - m.W(t, x - k)) / (2 * k)
        w = m.W(t, x)
        rhs = M * rho / (rho - x - N * w) * (1 + N * wx)
        assert wt == approx(rhs, rel=1e-5)

    def test_domain(self):
        with pytest.raises(DomainError):
            ck_majorant_radius(0, 1, 1)
        m = ck_majorant_radius(1, 1, 1)
        with pytest.raises(DomainError):
            m.W(m.T, 0.0)
        with pytest.raises(DomainError):
            m.W(0.0, 1.0)
