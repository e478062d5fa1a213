import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from pytest import approx
from scipy.linalg import expm

from pdekit.core import TimeGrid
from pdekit.errors import DomainError, HypothesisError
from pdekit.ode_core import rk4_integrate
from pdekit.stochastic import (
    FlowFactorization,
    SDEProblem,
    WienerPath,
    commuting_flow_solution,
    functional_S_check,
    integrate_approx_ode,
    integrate_stratonovich,
    ito_formula_check,
    loglog_slope,
    path_rng,
    psi_fixed_point,
    sample_wiener,
    sample_wiener_batch,
    smooth_path_ou,
    wz_convergence_study,
    zero_diffusion,
)

LIN = SDEProblem(lambda t, x: 0 * x, lambda t, x: x[..., None], (1.0,), 1.0)
ADD = SDEProblem(lambda t, x: 0 * x, lambda t, x: np.ones(np.shape(x) + (1,)), (0.3,), 1.0)


def exp_flow(s, z):
    return z * np.exp(np.asarray(s, dtype=float))[..., None]


def shift_flow(s, z):
    return z + np.asarray(s, dtype=float)[..., None]


def tanh_fac(**kw):
    return FlowFactorization(lambda x: x, lambda x: x, lambda l: np.tanh(np.asarray(l)[..., 0]),
                             T=0.5, V=1.0, K=1.5, F=exp_flow, G=exp_flow, box=([-1.5], [1.5]), **kw)


class TestWiener:
    def test_trivial_grid(self):
        p = sample_wiener([0.0], m=2, seed=1)
        assert p.w.shape == (1, 2) and np.all(p.w == 0)

    def test_moments(self):
        p = sample_wiener_batch(np.linspace(0, 1, 21), 10_000, 1, seed=7)
        end = p.w[:, -1, 0]
        assert 0.97 <= end.var() <= 1.03
        assert abs(end.mean()) <= 0.03

    def test_starts_at_zero(self):
        p = sample_wiener(TimeGrid(0.0, 2.0, 50), m=3, seed=4)
        assert np.all(p.w[0] == 0) and p.m == 3

    def test_batch_matches_single(self):
        b = sample_wiener_batch(np.linspace(0, 1, 11), 5, 2, seed=9)
        assert np.array_equal(b.path(3).w, sample_wiener(np.linspace(0, 1, 11), 2, 9, index=3).w)

    @settings(deadline=None, max_examples=20)
    @given(seed=st.integers(0, 2**63 - 1))
    def test_deterministic(self, seed):
        a = sample_wiener(np.linspace(0, 1, 17), 2, seed)
        b = sample_wiener(np.linspace(0, 1, 17), 2, seed)
        assert np.array_equal(a.w, b.w)

    def test_distinct_indices(self):
        assert not np.array_equal(path_rng(1, 0).standard_normal(4), path_rng(1, 1).standard_normal(4))

    def test_coarsen(self):
        p = sample_wiener(np.linspace(0, 1, 9), 1, 0)
        c = p.coarsen(4)
        assert np.array_equal(c.w, p.w[[0, 4, 8]])
        with pytest.raises(DomainError):
            p.coarsen(3)

    def test_bad_m(self):
        with pytest.raises(DomainError):
            sample_wiener([0.0, 1.0], m=0)


class TestSmoothing:
    def test_zero_path(self):
        t = np.linspace(0, 1, 11)
        s = smooth_path_ou(WienerPath(t, np.zeros((11, 1)), 0), 0.1)
        assert np.all(s.v == 0)

    def test_reconstruction(self):
        p = sample_wiener(np.linspace(0, 1, 101), 2, 3)
        s = smooth_path_ou(p, 0.05)
        assert np.all(s.v[0] == 0)
        assert np.allclose(s.v + s.eta, p.w, atol=1e-15)

    def test_matches_fine_ode(self):
        # oracle: RK4 on v' = beta (w - v) with w linear between nodes
        p = sample_wiener(np.linspace(0, 1, 21), 1, 11)
        eps = 0.07
        s = smooth_path_ou(p, eps)
        fine = np.linspace(0, 1, 20 * 400 + 1)
        w_lin = lambda t: np.interp(t, p.times, p.w[:, 0])
        v = rk4_integrate(lambda t, y: (w_lin(t) - y) / eps, fine, np.array([0.0]))
        assert np.max(np.abs(v[::400, 0] - s.v[:, 0])) < 1e-8

    def test_mean_square_bound(self):
        p = sample_wiener_batch(np.linspace(0, 1, 201), 10_000, 1, seed=2)
        for eps in (0.02, 0.1):
            s = smooth_path_ou(p, eps)
            for i in (100, 200):
                assert np.mean(s.eta[:, i, 0] ** 2) <= 1.1 * eps

    def test_slow_filter(self):
        p = sample_wiener(np.linspace(0, 1, 101), 1, 5)
        s = smooth_path_ou(p, 1e4)
        assert np.max(np.abs(s.v)) < 1e-3 * max(1.0, np.max(np.abs(p.w)))

    def test_gap_linear_in_eps(self):
        p = sample_wiener_batch(np.linspace(0, 1, 1001), 2000, 1, seed=4)
        eps = np.array([0.01, 0.02, 0.05, 0.1])
        gaps = [np.mean(smooth_path_ou(p, e).eta[:, -1, 0] ** 2) for e in eps]
        assert loglog_slope(eps, gaps) == approx(1.0, abs=0.15)

    def test_bad_eps(self):
        with pytest.raises(DomainError):
            smooth_path_ou(sample_wiener([0.0, 1.0]), 0.0)


class TestStratonovich:
    def test_no_noise_is_euler(self):
        p = SDEProblem(lambda t, x: -x, zero_diffusion(1), (1.0,), 1.0)
        path = sample_wiener(np.linspace(0, 1, 1001), 1, 0)
        end = integrate_stratonovich(p, path).final[0]
        assert end == approx(math.exp(-1), abs=1e-3)
        assert end == approx((1 - 1e-3) ** 1000, rel=1e-12)

    def test_additive_exact(self):
        path = sample_wiener(np.linspace(0, 1, 101), 1, 3)
        x = integrate_stratonovich(ADD, path).states[:, 0]
        assert np.allclose(x, 0.3 + path.w[:, 0], atol=1e-13)

    def test_geometric_strong_order(self):
        fine = sample_wiener_batch(np.linspace(0, 1, 2049), 1000, 1, seed=8)
        errs, hs = [], []
        for f in (1, 4, 16):
            p = fine.coarsen(f)
            x = integrate_stratonovich(LIN, p).states[:, -1, 0]
            errs.append(np.sqrt(np.mean((x - np.exp(p.w[:, -1, 0])) ** 2)))
            hs.append(1.0 / (p.times.size - 1))
        assert errs[0] < 5 * math.sqrt(hs[0])
        assert loglog_slope(hs, errs) == approx(0.5, abs=0.2)

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            integrate_stratonovich(LIN, sample_wiener([0.0, 1.0], m=2))
        with pytest.raises(DomainError):
            SDEProblem(lambda t, x: x, lambda t, x: x, (1.0, 2.0))

    def test_analytic_jacobian_matches_fd(self):
        g = lambda t, x: np.stack([x, x**2], axis=-1)  # n=1, m=2 -> (..., 1, 2)
        dg = lambda t, x: np.stack([np.ones_like(x), 2 * x], axis=-1)[..., None]
        a = SDEProblem(lambda t, x: 0 * x, g, (0.5,), 1.0, m=2, dg=dg)
        b = SDEProblem(lambda t, x: 0 * x, g, (0.5,), 1.0, m=2)
        x = np.array([[0.5], [1.3]])
        assert np.allclose(a.correction(0, x), b.correction(0, x), atol=1e-8)
        # (1/2)(x + 2x^3)
        assert np.allclose(a.correction(0, x)[:, 0], 0.5 * (x[:, 0] + 2 * x[:, 0] ** 3))


class TestApproxODE:
    def test_no_noise(self):
        p = SDEProblem(lambda t, x: -x, zero_diffusion(1), (1.0,), 1.0)
        s = smooth_path_ou(sample_wiener(np.linspace(0, 1, 51), 1, 0), 0.2)
        assert integrate_approx_ode(p, s).final[0] == approx(math.exp(-1), abs=1e-8)

    def test_separable(self):
        s = smooth_path_ou(sample_wiener(np.linspace(0, 1, 201), 1, 6), 0.05)
        x = integrate_approx_ode(LIN, s).states[:, 0]
        assert np.allclose(x, np.exp(s.v[:, 0]), rtol=1e-6)

    def test_halving_moves_toward_limit(self):
        path = sample_wiener_batch(np.linspace(0, 1, 801), 200, 1, seed=12)
        target = np.exp(path.w[:, -1, 0])
        errs = [np.mean((integrate_approx_ode(LIN, smooth_path_ou(path, e)).states[:, -1, 0] - target) ** 2)
                for e in (0.2, 0.1, 0.05)]
        assert errs[0] > errs[1] > errs[2]


class TestStudy:
    def test_geometric_slope(self):
        st_ = wz_convergence_study(LIN, [0.1, 0.05, 0.025], n_paths=1000, seed=1, n_steps=2000)
        assert st_.slope >= 0.8
        assert st_.mse[-1] < st_.mse[0]
        assert np.all(np.diff(st_.mse) <= 0)
        assert np.max(st_.constant) < 10.0
        assert np.all(st_.ci_low <= st_.mse) and np.all(st_.mse <= st_.ci_high)

    def test_commuting_linear_system(self):
        A = np.array([[-0.2, 0.3], [0.3, -0.2]])
        B = np.array([[0.5, 0.2], [0.2, 0.5]])  # symmetric circulants commute
        assert np.allclose(A @ B, B @ A)
        p = SDEProblem(lambda t, x: x @ A.T, lambda t, x: (x @ B.T)[..., None], (1.0, -0.5), 1.0,
                       dg=lambda t, x: np.broadcast_to(B[:, None, :], np.shape(x)[:-1] + (2, 1, 2)))
        st_ = wz_convergence_study(p, [0.1, 0.05, 0.025], n_paths=500, seed=2, n_steps=2000)
        assert st_.slope >= 0.8
        # closed form e^{At + B w(t)} x0 versus the reference integrator
        paths = sample_wiener_batch(np.linspace(0, 1, 2001), 50, 1, seed=2)
        ref = integrate_stratonovich(p, paths).states[:, -1]
        exact = np.array([expm(A + B * w) @ np.array(p.x0) for w in paths.w[:, -1, 0]])
        assert np.sqrt(np.mean(np.sum((ref - exact) ** 2, axis=1))) < 5 * math.sqrt(1 / 2000)

    def test_no_noise_skips_slope(self):
        p = SDEProblem(lambda t, x: -x, zero_diffusion(1), (1.0,), 1.0)
        st_ = wz_convergence_study(p, [0.1, 0.05], n_paths=100, seed=0, n_steps=200)
        # Euler reference against RK4: squared O(h) gap, h = 1/200
        assert st_.slope is None and np.all(st_.mse < (1 / 200) ** 2)

    def test_deterministic_csv(self):
        a = wz_convergence_study(LIN, [0.1, 0.05], n_paths=100, seed=3, n_steps=200).to_csv()
        b = wz_convergence_study(LIN, [0.1, 0.05], n_paths=100, seed=3, n_steps=200).to_csv()
        assert a == b and a.splitlines()[0] == "epsilon,mse,ci_low,ci_high,n_paths,seed"

    @pytest.mark.parametrize("eps,n", [([], 100), ([0.05, 0.1], 100), ([0.1, -0.1], 100), ([0.1], 99)])
    def test_bad_input(self, eps, n):
        with pytest.raises(DomainError):
            wz_convergence_study(LIN, eps, n_paths=n)


class TestChainRule:
    paths = sample_wiener_batch(np.linspace(0, 1, 4097), 200, 1, seed=5)

    def test_linear_phi_additive_exact(self):
        r = ito_formula_check(lambda t, x: t + x[..., 0], ADD, self.paths,
                              dphi_x=lambda t, x: np.ones_like(x), dphi_t=lambda t, x: np.ones(x.shape[:-1]))
        assert r.passed and np.max(r.gap) < 1e-12

    def test_identity_phi(self):
        r = ito_formula_check(lambda t, x: x[..., 0], LIN, self.paths, tol=0.5)
        assert r.passed and r.growth_ok

    def test_square_closed_form(self):
        r = ito_formula_check(lambda t, x: x[..., 0] ** 2, LIN, self.paths, tol=0.5)
        exact = np.exp(2 * self.paths.w[:, -1, 0])
        assert np.sqrt(np.mean((r.lhs - exact) ** 2)) < 10 * math.sqrt(1 / 4096) * math.e
        assert np.sqrt(np.mean((r.rhs - exact) ** 2)) < 10 * math.sqrt(1 / 4096) * math.e

    @pytest.mark.parametrize("phi", [lambda t, x: x[..., 0] ** 2, lambda t, x: x[..., 0] ** 3 - x[..., 0],
                                     lambda t, x: t * x[..., 0] + x[..., 0] ** 2])
    def test_gap_order_half(self, phi):
        gaps, hs = [], []
        for f in (1, 4, 16, 64):
            p = self.paths.coarsen(f)
            gaps.append(np.mean(ito_formula_check(phi, LIN, p).gap))
            hs.append(1.0 / (p.times.size - 1))
        assert loglog_slope(hs, gaps) == approx(0.5, abs=0.15)

    def test_growth_flag(self):
        r = ito_formula_check(lambda t, x: x[..., 0] ** 3, LIN, self.paths, growth=1e-3)
        assert not r.growth_ok


class TestFactorization:
    def test_rho_rejected(self):
        with pytest.raises(HypothesisError):
            FlowFactorization(lambda x: x, lambda x: x, lambda l: l[..., 0], T=1.0, V=1.0, K=1.0)

    def test_non_commuting_rejected(self):
        with pytest.raises(HypothesisError):
            FlowFactorization(lambda x: np.ones_like(x), lambda x: x**2, lambda l: l[..., 0],
                              T=0.5, V=1.0, K=1.0, box=([-1.0], [1.0]))

    def test_bound_violation_rejected(self):
        with pytest.raises(HypothesisError):
            FlowFactorization(lambda x: x, lambda x: x, lambda l: np.tanh(l[..., 0]),
                              T=0.5, V=1.0, K=0.5, box=([-1.5], [1.5]))

    def test_constant_phi_one_step(self):
        fac = FlowFactorization(lambda x: x, lambda x: x, lambda l: 0 * l[..., 0] + 0.7,
                                T=1.0, V=0.0, K=2.0, F=exp_flow, G=exp_flow)
        r = psi_fixed_point(fac, 0.6, [1.3])
        assert r.lam[0] == approx(1.3 * math.exp(-0.42), rel=1e-15)
        assert r.gaps[1] == 0.0

    @pytest.mark.parametrize("numeric", [False, True])
    @settings(deadline=None, max_examples=15)
    @given(t=st.floats(0, 0.5), z=st.floats(-3, 3))
    def test_shift_closed_form(self, numeric, t, z):
        flows = {} if numeric else {"F": shift_flow, "G": shift_flow}
        fac = FlowFactorization(lambda x: np.ones_like(x), lambda x: np.ones_like(x),
                                lambda l: np.asarray(l)[..., 0], T=0.5, V=1.0, K=1.0, **flows)
        r = psi_fixed_point(fac, t, [z])
        assert r.lam[0] == approx(z / (1 + t), abs=1e-9)
        assert r.residual < 1e-9
        assert r.dominated

    def test_tanh_ratio(self):
        fac = tanh_fac()
        for z in (-1.2, 0.4, 1.4):
            r = psi_fixed_point(fac, 0.5, [z])
            assert r.residual < 1e-12
            assert r.ratios and all(q <= fac.rho for q in r.ratios)
            assert r.contracts
            assert r.dominated
            assert abs(r.lam[0] - z) <= r.bound

    def test_time_outside(self):
        with pytest.raises(DomainError):
            psi_fixed_point(tanh_fac(), 0.6, [0.1])

    def test_z_hat_inverse(self):
        fac = tanh_fac()
        path = sample_wiener(np.linspace(0, 0.5, 51), 1, 4)
        x = np.full((51, 1), 0.8)
        zh = fac.z_hat(path.w[:, 0], x)
        assert np.allclose(fac.flow_g(path.w[:, 0], zh), x, atol=1e-14)
        num = FlowFactorization(lambda x: x, lambda x: x, lambda l: np.tanh(np.asarray(l)[..., 0]),
                                T=0.5, V=1.0, K=1.5)
        assert np.allclose(num.flow_g(path.w[::10, 0], num.z_hat(path.w[::10, 0], x[::10])), x[::10],
                           atol=1e-9)

    def test_solution_closed_form(self):
        fac = tanh_fac()
        path = sample_wiener(np.linspace(0, 0.5, 101), 1, 9)
        tr = commuting_flow_solution(fac, path, [0.8])
        exact = 0.8 * np.exp(path.times * math.tanh(0.8) + path.w[:, 0])
        assert np.allclose(tr.states[:, 0], exact, rtol=1e-14)
        assert tr.states[0, 0] == 0.8

    def test_solution_vs_stratonovich(self):
        fac = tanh_fac()
        paths = sample_wiener_batch(np.linspace(0, 0.5, 1001), 100, 1, seed=10)
        lam = np.array([0.8])
        sde = integrate_stratonovich(
            SDEProblem(lambda t, x: math.tanh(0.8) * x, lambda t, x: x[..., None], (0.8,), 0.5), paths)
        h = 0.5 / 1000
        for k in range(100):
            xh = commuting_flow_solution(fac, paths.path(k), lam).states[:, 0]
            scale = max(1.0, np.max(np.abs(xh)))
            assert np.max(np.abs(xh - sde.states[k, :, 0])) < 5 * math.sqrt(h) * scale

    def test_solution_non_commuting(self):
        fac = FlowFactorization(lambda x: np.ones_like(x), lambda x: x**2, lambda l: l[..., 0],
                                T=0.5, V=1.0, K=1.0)
        with pytest.raises(HypothesisError):
            commuting_flow_solution(fac, sample_wiener(np.linspace(0, 0.5, 11)), [0.2])


class TestFunctional:
    def test_tanh_overlap(self):
        rep = functional_S_check(tanh_fac(), lambda x: x[..., 0], 0.25, [0.6], n_paths=10_000, seed=0,
                                 n_steps=200)
        assert rep.overlap

    def test_constant(self):
        rep = functional_S_check(tanh_fac(), lambda x: 0 * x[..., 0] + 2.0, 0.25, [0.6], n_paths=200,
                                 n_steps=100)
        assert rep.direct == approx(2.0, abs=1e-14) and rep.nested == approx(2.0, abs=1e-14)

    def test_terminal(self):
        rep = functional_S_check(tanh_fac(), lambda x: x[..., 0] ** 2, 0.5, [0.6], n_paths=200, n_steps=100)
        assert rep.direct == rep.nested == approx(0.36)
        assert rep.direct_ci == (rep.direct, rep.direct)
