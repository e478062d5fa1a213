"""Commuting drift and diffusion: flow factorization of ``dx = phi(lam) f(x) dt + g(x) o dw``.

With ``[g, f] = 0`` the solution is ``G(w(t)) o F(t phi(lam))[lam]``.  The
inverse problem ``x_hat(t; lam) = x`` reduces to the deterministic fixed
point ``lam = F(-t phi(lam))[z]`` at ``z = G(-w(t))[x]``, a contraction
when ``rho = T V K < 1`` with ``V = sup |phi'|`` and ``K = sup |f|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..core import TrajectoryTable
from ..errors import DomainError, HypothesisError, NonConvergenceError
from ..flows import commutation_test, flow, sample_box
from ..quadrature import gauss_hermite
from .sde import SDEProblem, integrate_stratonovich
from .wiener import WienerPath, sample_wiener_batch


def _rowwise_flow(field, sigma, z):
    z = np.asarray(z, dtype=float)
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), z.shape[:-1])
    if z.ndim == 1:
        return flow(field, float(sigma), z)
    flat = z.reshape(-1, z.shape[-1])
    out = np.array([flow(field, float(s), row) for s, row in zip(sigma.ravel(), flat)])
    return out.reshape(z.shape)


@dataclass(frozen=True)
class FlowFactorization:
    """Fields ``f, g``, weight ``phi`` and contraction data ``(T, V, K)``.

    ``F(sigma, z)`` and ``G(tau, z)`` may give the flows in closed form
    (vectorized over leading axes); otherwise RK4 flows are used.  With
    ``box`` the bracket ``[g, f]`` and the bounds ``V``, ``K`` are checked
    on samples of the box.  ``flow_tol`` is the accuracy credited to the
    RK4 flow in gap comparisons; closed-form flows are credited zero.
    """

    f: Callable
    g: Callable
    phi: Callable
    T: float
    V: float
    K: float
    dphi: Callable | None = None
    F: Callable | None = None
    G: Callable | None = None
    box: tuple | None = None
    flow_tol: float = 1e-11

    def __post_init__(self):
        if self.T <= 0 or self.V < 0 or self.K < 0:
            raise DomainError("need T > 0 and nonnegative V, K")
        if self.rho >= 1:
            raise HypothesisError(f"rho = T V K = {self.rho:.4g} is not below 1")
        if self.box is not None:
            rep = commutation_test([self.g, self.f], self.box)
            if not rep.passed:
                raise HypothesisError(f"[g, f] does not vanish: {rep.worst:.3e} at {rep.witness_point}")
            pts = sample_box(self.box, 256, seed=1)
            if np.max(np.linalg.norm(self.f(pts), axis=-1)) > self.K * (1 + 1e-12):
                raise HypothesisError("sampled |f| exceeds the supplied bound K")
            if np.max(np.abs(self._dphi(pts))) > self.V * (1 + 1e-6) + 1e-12:
                raise HypothesisError("sampled |phi'| exceeds the supplied bound V")

    @property
    def rho(self) -> float:
        return self.T * self.V * self.K

    def _dphi(self, x):
        if self.dphi is not None:
            return np.asarray(self.dphi(x), dtype=float)
        h = 1e-6
        n = x.shape[-1]
        return np.stack([(self.phi(x + h * e) - self.phi(x - h * e)) / (2 * h) for e in np.eye(n)],
                        axis=-1)

    def flow_f(self, sigma, z):
        return self.F(sigma, z) if self.F is not None else _rowwise_flow(self.f, sigma, z)

    def flow_g(self, tau, z):
        return self.G(tau, z) if self.G is not None else _rowwise_flow(self.g, tau, z)

    def z_hat(self, w_t, x):
        """``G(-w(t))[x]``."""
        return self.flow_g(-np.asarray(w_t, dtype=float), x)


@dataclass(frozen=True)
class PsiResult:
    lam: np.ndarray
    gaps: tuple
    residual: float
    bound: float
    rho: float
    noise: float = 0.0

    @property
    def ratios(self) -> tuple:
        """Consecutive gap ratios while both gaps sit well above the rounding floor."""
        floor = 1e6 * self.noise
        return tuple(b / a for a, b in zip(self.gaps, self.gaps[1:]) if a > floor and b > floor)

    @property
    def contracts(self) -> bool:
        """``gap_{k+1} <= rho gap_k`` up to the rounding ``noise`` of one gap."""
        return all(b <= self.rho * a + self.noise for a, b in zip(self.gaps, self.gaps[1:]))

    @property
    def dominated(self) -> bool:
        """Every gap is at most ``rho^k r(T, z)``."""
        return all(g <= self.rho**k * self.bound * (1 - self.rho) * (1 + 1e-9) + self.noise
                   for k, g in enumerate(self.gaps))


def _psi_iterate(fac, t, z, tol, max_iter):
    lam = np.array(z, dtype=float)
    gaps = []
    for _ in range(max_iter):
        new = fac.flow_f(-t * fac.phi(lam), z)
        gap = np.max(np.linalg.norm(np.atleast_2d(new - lam), axis=-1))
        gaps.append(float(gap))
        lam = new
        if gap <= tol:
            return lam, gaps
    raise NonConvergenceError("psi fixed point did not converge", gap=gaps[-1], iterations=len(gaps))


def psi_fixed_point(fac: FlowFactorization, t: float, z, tol: float = 1e-13,
                    max_iter: int = 1000) -> PsiResult:
    """``lam = psi_hat(t, z)`` by ``lam_{k+1} = F(-t phi(lam_k))[z]`` from ``lam_0 = z``."""
    if not 0 <= t <= fac.T:
        raise DomainError(f"t = {t} outside [0, T]")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    lam, gaps = _psi_iterate(fac, t, z, tol, max_iter)
    residual = float(np.linalg.norm(fac.flow_f(t * fac.phi(lam), lam) - z))
    r = fac.T * fac.K * abs(float(fac.phi(z)))
    bound = r / (1 - fac.rho)
    if float(np.linalg.norm(lam - z)) > bound * (1 + 1e-9) + 1e-14:
        raise NonConvergenceError("fixed point left the a-priori ball", gap=gaps[-1],
                                  iterations=len(gaps))
    noise = 16 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(z))), float(np.max(np.abs(lam))))
    if fac.F is None:
        noise += 2 * fac.flow_tol
    return PsiResult(lam, tuple(gaps), residual, bound, fac.rho, noise)


def commuting_flow_solution(fac: FlowFactorization, path: WienerPath, lam) -> TrajectoryTable:
    """``x_hat(t_i; lam) = G(w(t_i)) o F(t_i phi(lam))[lam]`` node by node (scalar noise)."""
    if path.m != 1:
        raise DomainError("the factorization uses a scalar Wiener process")
    if fac.box is None:
        box = (np.asarray(lam) - 1.0, np.asarray(lam) + 1.0)
        rep = commutation_test([fac.g, fac.f], box)
        if not rep.passed:
            raise HypothesisError(f"[g, f] does not vanish: {rep.worst:.3e}")
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    t = path.times
    c = float(fac.phi(lam))
    inner = np.array([fac.flow_f(ti * c, lam) for ti in t])
    w = path.w[:, 0]
    states = np.array([fac.flow_g(wi, zi) for wi, zi in zip(w, inner)])
    return TrajectoryTable(t, states, "flow-factorization", {"seed": path.seed})


def factorized_sde(fac: FlowFactorization, lam, x0=None, T=None) -> SDEProblem:
    """The SDE ``dx = phi(lam) f(x) dt + g(x) o dw`` as an SDEProblem."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    c = float(fac.phi(lam))
    x0 = lam if x0 is None else x0
    return SDEProblem(lambda t, x: c * fac.f(x), lambda t, x: fac.g(x)[..., None],
                      tuple(np.atleast_1d(x0)), T if T is not None else fac.T)


@dataclass(frozen=True)
class FunctionalReport:
    direct: float
    direct_ci: tuple
    nested: float
    nested_ci: tuple

    @property
    def overlap(self) -> bool:
        return self.direct_ci[0] <= self.nested_ci[1] and self.nested_ci[0] <= self.direct_ci[1]


def _mean_ci(samples):
    samples = np.asarray(samples, dtype=float)
    m = float(np.mean(samples))
    half = 1.96 * float(np.std(samples, ddof=1)) / math.sqrt(samples.size) if samples.size > 1 else 0.0
    return m, (m - half, m + half)


def functional_S_check(fac: FlowFactorization, h: Callable, t: float, x, n_paths: int = 10_000,
                       seed: int = 0, n_steps: int = 400, n_gh: int = 40) -> FunctionalReport:
    """Two estimates of ``S(t, x) = E h(x_hat_psi(T; t, x))``.

    Direct: Euler-Maruyama on ``ds x = phi(psi(t, x)) f ds + g o dw`` over
    ``[t, T]`` per outer path.  Nested: ``E u(t, x; psi(t, x))`` with
    ``u(t, x; lam) = E h(G(w(T) - w(t)) o F((T - t) phi(lam))[x])`` by
    Gauss-Hermite in the Gaussian increment.  Both share the outer paths.
    """
    T = fac.T
    x = np.atleast_1d(np.asarray(x, dtype=float))
    times = np.linspace(0.0, T, n_steps + 1)
    i_t = int(round(t / T * n_steps))
    if abs(times[i_t] - t) > 1e-12 * max(1.0, T):
        raise DomainError("t must be a node of the outer grid")
    if i_t == n_steps:
        v = float(h(x[None])[0])
        return FunctionalReport(v, (v, v), v, (v, v))
    paths = sample_wiener_batch(times, n_paths, 1, seed)
    w_t = paths.w[:, i_t, 0]
    z = fac.z_hat(w_t, np.broadcast_to(x, (n_paths, x.size)))
    lam, _ = _psi_iterate(fac, t, z, 1e-13, 1000)
    c = fac.phi(lam)  # (P,)
    # direct: SDE from t to T with per-path drift weight c
    xs = np.broadcast_to(x, (n_paths, x.size)).copy()
    probe = SDEProblem(lambda s, y: fac.f(y), lambda s, y: fac.g(y)[..., None], tuple(x), T)
    dW = paths.increments[:, i_t:, 0]
    for k in range(n_steps - i_t):
        dt = times[i_t + k + 1] - times[i_t + k]
        xs = xs + (c[:, None] * fac.f(xs) + probe.correction(0.0, xs)) * dt + fac.g(xs) * dW[:, k, None]
    direct = h(xs)
    # nested: Gauss-Hermite over w(T) - w(t) ~ N(0, T - t)
    zq, wq = gauss_hermite(n_gh)
    inner = fac.flow_f((T - t) * c, np.broadcast_to(x, (n_paths, x.size)))
    u = np.zeros(n_paths)
    for zk, wk in zip(zq, wq):
        u += wk * h(fac.flow_g(np.full(n_paths, math.sqrt(2 * (T - t)) * zk), inner))
    u /= math.sqrt(math.pi)
    d, dci = _mean_ci(direct)
    n_, nci = _mean_ci(u)
    return FunctionalReport(d, dci, n_, nci)
