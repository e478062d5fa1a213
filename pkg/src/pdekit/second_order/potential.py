"""Newtonian potential of a density supported in a ball."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from ..quadrature import QuadratureSpec, gauss_legendre, sphere_rule


def ray_segment(P: np.ndarray, omega: np.ndarray, R: float, center=None):
    """Parameter interval ``[r0, r1]`` (r >= 0) where ``P + r omega`` lies in ``B(center, R)``.

    Rays that miss the ball get ``r0 = r1 = 0``.
    """
    c = np.zeros(P.shape[-1]) if center is None else np.asarray(center, dtype=float)
    q = P - c
    bq = omega @ q
    disc = bq**2 - (q @ q - R * R)
    root = np.sqrt(np.maximum(disc, 0.0))
    r0 = np.maximum(-bq - root, 0.0)
    r1 = np.maximum(-bq + root, 0.0)
    r0 = np.where(disc > 0, r0, 0.0)
    r1 = np.where(disc > 0, r1, 0.0)
    return r0, r1


def _shell_integral(P, R, integrand, n_r, n_theta):
    """``int_{B(0,R)} integrand(Q) / |P - Q| dQ`` by spherical shells about ``P``.

    The ``r^2`` Jacobian absorbs the ``1/r`` singularity, leaving ``r dr``.
    """
    omega, w_omega = sphere_rule(n_theta)
    r0, r1 = ray_segment(P, omega, R)
    s, ws = gauss_legendre(0.0, 1.0, n_r)
    length = (r1 - r0)[:, None]
    r = r0[:, None] + length * s[None, :]
    pts = P[None, None, :] + r[..., None] * omega[:, None, :]
    vals = integrand(pts.reshape(-1, 3)).reshape(r.shape)
    return float(np.sum(w_omega[:, None] * length * ws[None, :] * r * vals))


@dataclass(frozen=True)
class PotentialReport:
    """Finite-difference check of ``Delta u = -4 pi rho`` at interior probes."""

    probes: np.ndarray
    laplacian: np.ndarray
    target: np.ndarray
    relative_error: np.ndarray
    skipped: tuple
    notes: tuple

    @property
    def max_relative_error(self) -> float:
        return float(np.max(self.relative_error)) if self.relative_error.size else 0.0


def newtonian_potential(rho, points, R: float = 1.0, quad: QuadratureSpec | None = None,
                        probes=None, h: float = 0.05):
    """``u(P) = int_{B(0,R)} rho(Q) / |P - Q| dQ`` in three dimensions.

    ``rho`` maps an ``(N, 3)`` array of points to ``(N,)`` densities and
    is taken as zero outside the ball.  ``quad.nodes = (n_r, n_theta)``.
    With ``probes`` a residual report is returned as well; probes whose
    7-point stencil straddles the sphere are skipped.
    """
    if R <= 0:
        raise DomainError("ball radius must be positive")
    quad = quad or QuadratureSpec("sphere", (48, 32))
    n_r = int(quad.nodes[0])
    n_theta = int(quad.nodes[1] if len(quad.nodes) > 1 else quad.nodes[0])
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != 3:
        raise DomainError("the Newtonian potential is three dimensional")

    def u(P):
        return _shell_integral(P, R, rho, n_r, n_theta)

    values = np.array([u(P) for P in pts])
    if probes is None:
        return values
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    kept, lap, tgt, skipped, notes = [], [], [], [], []
    for P in probes:
        if abs(np.linalg.norm(P) - R) <= 2 * h:
            skipped.append(P)
            notes.append(f"probe {P.tolist()} within 2h of the density's support boundary")
            continue
        acc = -6.0 * u(P)
        for e in np.eye(3):
            acc += u(P + h * e) + u(P - h * e)
        kept.append(P)
        lap.append(acc / h**2)
        tgt.append(-4.0 * np.pi * float(rho(P[None])[0]) if np.linalg.norm(P) < R else 0.0)
    lap, tgt = np.array(lap), np.array(tgt)
    scale = np.maximum(np.abs(tgt), 1e-300)
    rel = np.abs(lap - tgt) / np.where(np.abs(tgt) > 0, scale, 1.0)
    report = PotentialReport(np.array(kept), lap, tgt, rel, tuple(skipped), tuple(notes))
    return values, report
