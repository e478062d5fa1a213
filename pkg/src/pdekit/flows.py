"""Local flows of autonomous vector fields and what can be read off them.

Flows and their Jacobians come from fixed-step RK4 on the field and its
variational equation.  Lie brackets use the convention
``[Y1, Y2] = dY1 . Y2 - dY2 . Y1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import FieldSpec, as_field
from .errors import DivergenceError, DomainError, IntegrityError
from .ode_core import rk4_step

DEFAULT_STEP = 2e-3


@dataclass(frozen=True)
class FlowMap:
    """The local flow ``s -> G(s)[x]`` of an autonomous field."""

    field: FieldSpec
    step: float = DEFAULT_STEP
    max_time: float = 10.0

    def __call__(self, t, x):
        return flow(self.field, t, x, step=self.step, max_time=self.max_time)


def _autonomous(Y) -> FieldSpec:
    return as_field(Y, autonomous=True)


def _n_steps(t, step):
    return max(1, int(math.ceil(abs(t) / step - 1e-9)))


def flow(Y, t: float, x, step: float = DEFAULT_STEP, max_time: float = np.inf) -> np.ndarray:
    """Solve ``dz/ds = Y(z)``, ``z(0) = x`` up to ``s = t`` (negative t runs backward).

    ``x`` may carry leading batch axes when ``Y`` is vectorised.
    """
    Y = _autonomous(Y)
    if abs(t) > max_time:
        raise DomainError(f"|t|={abs(t)} exceeds the flow's max time {max_time}")
    z = np.array(x, dtype=float)
    if t == 0:
        return z
    n = _n_steps(t, step)
    h = t / n
    f = lambda s, y: Y(s, y)  # noqa: E731
    for i in range(n):
        z = rk4_step(f, i * h, z, h)
        if not np.all(np.isfinite(z)):
            raise DivergenceError(f"flow blew up at s={(i + 1) * h:.6g}", i)
    return z


def flow_jacobian(Y, t: float, x, step: float = DEFAULT_STEP, return_adjoint: bool = False,
                  det_tol: float = 1e-12):
    """Jacobian of ``x -> flow(Y, t, x)`` from the variational equation.

    With ``return_adjoint`` also returns ``H`` solving ``H' = -H dY(z)``,
    ``H(0) = I``, which is the inverse of the Jacobian.
    """
    Y = _autonomous(Y)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = x.size
    n = _n_steps(t, step) if t != 0 else 1
    h = t / n

    def rhs(s, state):
        z = state[:d]
        Z = state[d:d + d * d].reshape(d, d)
        J = Y.jacobian(s, z)
        out = [Y(s, z), (J @ Z).ravel()]
        if return_adjoint:
            H = state[d + d * d:].reshape(d, d)
            out.append((-H @ J).ravel())
        return np.concatenate(out)

    parts = [x, np.eye(d).ravel()]
    if return_adjoint:
        parts.append(np.eye(d).ravel())
    state = np.concatenate(parts)
    if t != 0:
        for i in range(n):
            state = rk4_step(rhs, i * h, state, h)
            if not np.all(np.isfinite(state)):
                raise DivergenceError(f"variational flow blew up at s={(i + 1) * h:.6g}", i)
    Z = state[d:d + d * d].reshape(d, d)
    if abs(np.linalg.det(Z)) < det_tol:
        raise IntegrityError("flow Jacobian is numerically singular")
    if return_adjoint:
        return Z, state[d + d * d:].reshape(d, d)
    return Z


def divergence(Y, x) -> float:
    Y = _autonomous(Y)
    return float(np.trace(Y.jacobian(0.0, x)))


def lie_bracket(Y1, Y2, x) -> np.ndarray:
    """``dY1(x) Y2(x) - dY2(x) Y1(x)``."""
    Y1 = _autonomous(Y1)
    Y2 = _autonomous(Y2)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    a = Y1.jacobian(0.0, x) @ Y2(0.0, x)
    b = Y2.jacobian(0.0, x) @ Y1(0.0, x)
    return a - b


@dataclass(frozen=True)
class CommutationReport:
    passed: bool
    worst: float
    witness_point: np.ndarray | None
    witness_pair: tuple | None
    tol: float


def sample_box(box, n: int, seed: int = 0) -> np.ndarray:
    lo, hi = (np.atleast_1d(np.asarray(b, dtype=float)) for b in box)
    rng = np.random.default_rng(seed)
    pts = lo + (hi - lo) * rng.random((n, lo.size))
    return np.vstack([pts, 0.5 * (lo + hi)])


def commutation_test(fields: Sequence, box, tol: float = 1e-8, n_samples: int = 64,
                     seed: int = 0) -> CommutationReport:
    """Do all pairwise brackets vanish on sampled points of ``box = (lo, hi)``?"""
    if len(fields) < 2:
        raise DomainError("commutation test needs at least two fields")
    pts = sample_box(box, n_samples, seed)
    worst, where, pair = 0.0, None, None
    for i in range(len(fields)):
        for j in range(i + 1, len(fields)):
            for p in pts:
                v = float(np.linalg.norm(lie_bracket(fields[i], fields[j], p)))
                if v > worst:
                    worst, where, pair = v, p, (i, j)
    return CommutationReport(worst <= tol, worst, where, pair, tol)


@dataclass(frozen=True)
class OrbitSpec:
    """Ordered fields ``Y_1..Y_m``, parameter box ``prod(-a_i, a_i)`` and base point."""

    fields: tuple
    half_widths: tuple
    x0: np.ndarray
    step: float = DEFAULT_STEP

    def __post_init__(self):
        if len(self.fields) < 1:
            raise DomainError("an orbit needs at least one field")
        if len(self.half_widths) != len(self.fields):
            raise DomainError("one half-width per field")
        if any(a <= 0 for a in self.half_widths):
            raise DomainError("half-widths must be positive")


def orbit(spec: OrbitSpec, p: Sequence) -> np.ndarray:
    """``G_1(t_1) o ... o G_m(t_m)(x0)``: the last field acts first."""
    if len(p) != len(spec.fields):
        raise DomainError("parameter tuple length must match the number of fields")
    for t, a in zip(p, spec.half_widths):
        if abs(t) >= a:
            raise DomainError(f"parameter {t} outside (-{a}, {a})")
    z = np.array(spec.x0, dtype=float)
    for Y, t in reversed(list(zip(spec.fields, p))):
        z = flow(Y, t, z, step=spec.step)
    return z


@dataclass(frozen=True)
class VolumeReport:
    passed: bool
    max_det_deviation: float
    max_divergence: float
    dets: np.ndarray = field(repr=False)


def volume_preservation_check(Y, t: float, sample_points, tol: float = 1e-8) -> VolumeReport:
    """Measure ``|det d flow - 1|`` and ``|div Y|`` over sample points."""
    dets = np.array([np.linalg.det(flow_jacobian(Y, t, p)) for p in sample_points])
    divs = np.array([abs(divergence(Y, p)) for p in sample_points])
    dev = float(np.max(np.abs(dets - 1.0)))
    mdiv = float(np.max(divs))
    return VolumeReport(bool(dev <= tol and mdiv <= tol), dev, mdiv, dets)
