"""Power-series solutions of analytic evolution systems in one space variable.

The system ``du_j/dt = sum_k a_jk(t, x, u) du_k/dx + b_j(t, x, u)`` with
polynomial coefficients is solved exactly in rational arithmetic: the
Taylor coefficients ``c[l, k]`` of ``t^l x^k`` are fixed order by order in
``t`` by successive substitution truncated at total degree ``N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import sympy as sp

from .core import write_csv
from .errors import DomainError, SolverError, UnsupportedError

T, X = sp.symbols("t x")
MAX_BITS = 4096


class OrderLimitError(SolverError):
    """Rational coefficients grew beyond the supported size."""


# truncated bivariate polynomials: {(l, k): Fraction}, total degree <= N


def _add(p, q):
    out = dict(p)
    for key, v in q.items():
        out[key] = out.get(key, 0) + v
    return {k: v for k, v in out.items() if v != 0}


def _scale(p, c):
    return {k: v * c for k, v in p.items()} if c != 0 else {}


def _mul(p, q, N):
    out = {}
    for (l1, k1), v1 in p.items():
        for (l2, k2), v2 in q.items():
            if l1 + l2 + k1 + k2 <= N:
                key = (l1 + l2, k1 + k2)
                out[key] = out.get(key, 0) + v1 * v2
    return {k: v for k, v in out.items() if v != 0}


def _dx(p):
    return {(l, k - 1): v * k for (l, k), v in p.items() if k > 0}


def _int_t(p, N):
    return {(l + 1, k): v / (l + 1) for (l, k), v in p.items() if l + k + 1 <= N}


def _pow(p, e, N, cache):
    if e in cache:
        return cache[e]
    if e == 0:
        r = {(0, 0): Fraction(1)}
    else:
        r = _mul(_pow(p, e - 1, N, cache), p, N)
    cache[e] = r
    return r


@dataclass(frozen=True)
class _PolyCoef:
    """A coefficient polynomial in (t, x, u_1..u_m) as monomial exponent tuples."""

    terms: tuple  # ((et, ex, (e1..em)), Fraction)

    @classmethod
    def from_expr(cls, expr, us):
        expr = sp.sympify(expr)
        try:
            poly = sp.Poly(sp.expand(expr), T, X, *us, domain="QQ")
        except (sp.polys.polyerrors.PolynomialError, sp.polys.polyerrors.CoercionFailed) as exc:
            raise UnsupportedError(f"coefficient {expr} is not a polynomial with rational "
                                   f"coefficients in t, x, u") from exc
        if expr.free_symbols - {T, X, *us}:
            raise UnsupportedError(f"unknown symbols in coefficient {expr}")
        terms = []
        for monom, c in poly.terms():
            q = sp.Rational(c)
            terms.append(((monom[0], monom[1], tuple(monom[2:])), Fraction(int(q.p), int(q.q))))
        return cls(tuple(terms))

    def compose(self, comps, N, pow_caches):
        """Substitute truncated series ``comps`` for u and return a truncated series."""
        out = {}
        for (et, ex, eu), c in self.terms:
            if et + ex > N:
                continue
            term = {(et, ex): c}
            for j, e in enumerate(eu):
                if e:
                    term = _mul(term, _pow(comps[j], e, N, pow_caches[j]), N)
                    if not term:
                        break
            out = _add(out, term)
        return out


@dataclass(frozen=True)
class EvolutionSystem:
    """``du/dt = A(t, x, u) du/dx + b(t, x, u)`` with polynomial entries.

    Entries are sympy expressions (or strings) in ``t``, ``x`` and
    ``u1..uN``.  ``initial`` optionally holds polynomial Cauchy data
    ``u(0, x)`` in ``x``; it is removed by the shift ``u -> u - u(0, x)``.
    """

    A: tuple
    b: tuple
    initial: tuple | None = None

    def __post_init__(self):
        N = len(self.b)
        if N == 0 or len(self.A) != N or any(len(row) != N for row in self.A):
            raise DomainError("A must be N x N and b must have N entries")
        if self.initial is not None and len(self.initial) != N:
            raise DomainError("initial data must have one entry per component")

    @property
    def size(self) -> int:
        return len(self.b)

    @property
    def symbols(self):
        return sp.symbols(f"u1:{self.size + 1}")


@dataclass(frozen=True)
class SeriesSolution2D:
    """Exact coefficients ``c[j][(l, k)]`` of ``t^l x^k`` in component ``j``."""

    coefficients: tuple
    order: int
    base_point: tuple = (0, 0)

    def component(self, j: int = 0) -> dict:
        return self.coefficients[j]

    def coefficient(self, l: int, k: int, j: int = 0) -> Fraction:
        return self.coefficients[j].get((l, k), Fraction(0))

    def as_expr(self, j: int = 0):
        return sum((sp.Rational(v.numerator, v.denominator) * T**l * X**k
                    for (l, k), v in self.coefficients[j].items()), sp.Integer(0))

    def __call__(self, t: float, x: float, j: int = 0) -> float:
        return float(sum(float(v) * t**l * x**k for (l, k), v in self.coefficients[j].items()))

    def to_csv(self, path=None, j: int = 0) -> str:
        rows = []
        for l in range(self.order + 1):
            for k in range(self.order + 1 - l):
                v = self.coefficient(l, k, j)
                rows.append((l, k, v.numerator, v.denominator))
        return write_csv(["l", "k", "numerator", "denominator"], rows, path)


def _check_size(series):
    for p in series:
        for v in p.values():
            if v.numerator.bit_length() > MAX_BITS or v.denominator.bit_length() > MAX_BITS:
                raise OrderLimitError("rational coefficient size exceeded; lower the order")


def _series_of_expr(expr, N):
    p = sp.Poly(sp.expand(sp.sympify(expr)), T, X, domain="QQ")
    out = {}
    for (l, k), c in p.terms():
        if l + k <= N:
            q = sp.Rational(c)
            out[(l, k)] = Fraction(int(q.p), int(q.q))
    return out


def ck_series_solve(system: EvolutionSystem, order: int) -> SeriesSolution2D:
    """Taylor coefficients through total degree ``order`` of the analytic solution."""
    if order < 1:
        raise DomainError("order must be >= 1")
    N = order
    m = system.size
    us = system.symbols
    A = [[_PolyCoef.from_expr(e, us) for e in row] for row in system.A]
    b = [_PolyCoef.from_expr(e, us) for e in system.b]
    if system.initial is not None:
        init = []
        for e in system.initial:
            e = sp.sympify(e)
            if e.free_symbols - {X}:
                raise UnsupportedError("initial data must be a polynomial in x")
            init.append(_series_of_expr(e, N))
    else:
        init = [{} for _ in range(m)]
    u = [{} for _ in range(m)]  # shifted unknown, zero Cauchy data
    for _ in range(N):
        full = [_add(u[j], init[j]) for j in range(m)]
        caches = [{} for _ in range(m)]
        dfull = [_dx(p) for p in full]
        new = []
        for j in range(m):
            rhs = b[j].compose(full, N, caches)
            for k in range(m):
                if A[j][k].terms:
                    rhs = _add(rhs, _mul(A[j][k].compose(full, N, caches), dfull[k], N))
            new.append(_int_t(rhs, N))
        _check_size(new)
        if new == u:
            break
        u = new
    coeffs = tuple(_add(u[j], init[j]) for j in range(m))
    return SeriesSolution2D(coeffs, N)


def series_residual(system: EvolutionSystem, sol: SeriesSolution2D, through: int | None = None):
    """Nonzero Taylor coefficients of the substituted equation up to total degree ``through``.

    An empty dict means the residual vanishes identically through that degree.
    """
    N = sol.order
    through = N - 1 if through is None else through
    us = system.symbols
    m = system.size
    comps = [dict(c) for c in sol.coefficients]
    caches = [{} for _ in range(m)]
    out = {}
    for j in range(m):
        lhs = {(l - 1, k): v * l for (l, k), v in comps[j].items() if l > 0}
        rhs = _PolyCoef.from_expr(system.b[j], us).compose(comps, N, caches)
        for k in range(m):
            rhs = _add(rhs, _mul(_PolyCoef.from_expr(system.A[j][k], us).compose(comps, N, caches),
                                 _dx(comps[k]), N))
        r = _add(lhs, _scale(rhs, -1))
        bad = {key: v for key, v in r.items() if key[0] + key[1] <= through and v != 0}
        if bad:
            out[j] = bad
    if system.initial is not None:
        for j, e in enumerate(system.initial):
            data = _series_of_expr(e, N)
            got = {(0, k): v for (l, k), v in comps[j].items() if l == 0}
            diff = _add(got, _scale(data, -1))
            if diff:
                out.setdefault(j, {}).update({("data",) + key: v for key, v in diff.items()})
    return out


def laplace_evolution_system(f) -> EvolutionSystem:
    """``u_xx + u_yy = f(x, y)`` with ``u(0, y) = u_x(0, y) = 0`` as a first-order system.

    The evolution variable ``t`` plays the role of ``x`` and the series
    variable ``x`` plays ``y``.  Components: ``u1 = u_y``, ``u2 = u_x``,
    ``u3 = u``; the solution is component 2.
    """
    xx, yy = sp.symbols("x y")
    f = sp.sympify(f).subs({xx: T, yy: X}, simultaneous=True)
    u1, u2, u3 = sp.symbols("u1:4")
    A = ((0, 1, 0), (-1, 0, 0), (0, 0, 0))
    return EvolutionSystem(A, (0, f, u2))


@dataclass(frozen=True)
class MajorantEstimate:
    """Majorant data: ``T = rho / (16 M N)`` and the explicit majorant ``W``."""

    M: float
    N: int
    rho: float
    T: float

    def W(self, t, x):
        """``(1/2N)[rho - x - sqrt((rho - x)^2 - 4 M N rho t)]`` on ``|x| < sqrt(rho)``, ``0 <= t < T``."""
        if not (0.0 <= t < self.T) or abs(x) >= math.sqrt(self.rho):
            raise DomainError(f"(t, x) = ({t}, {x}) outside 0 <= t < {self.T}, |x| < sqrt(rho)")
        disc = (self.rho - x) ** 2 - 4.0 * self.M * self.N * self.rho * t
        if disc < 0:
            raise DomainError("negative discriminant")
        return (self.rho - x - math.sqrt(disc)) / (2.0 * self.N)


def ck_majorant_radius(M: float, N: int, rho: float) -> MajorantEstimate:
    if not (M > 0 and N > 0 and rho > 0):
        raise DomainError("M, N and rho must be positive")
    return MajorantEstimate(float(M), int(N), float(rho), rho / (16.0 * M * N))
