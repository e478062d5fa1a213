"""Maximum-principle verification on tabulated solutions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import SolutionTable
from ..errors import DomainError

KINDS = ("harmonic", "heat", "elliptic-A", "parabolic-A")


def spd_sqrt(A) -> np.ndarray:
    """Symmetric square root by orthogonal eigendecomposition ``T D^(1/2) T^T``."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError("A must be square")
    if np.max(np.abs(A - A.T)) > 1e-12 * max(1.0, np.max(np.abs(A))):
        raise DomainError("A is not symmetric")
    d, T = np.linalg.eigh(A)
    if d.min() <= 0:
        raise DomainError(f"A is not positive definite (min eigenvalue {d.min():.3e})")
    return (T * np.sqrt(d)) @ T.T


@dataclass(frozen=True)
class MaxPrincipleReport:
    passed: bool
    max_value: float
    min_value: float
    boundary_max: float
    boundary_min: float
    witness: tuple | None
    kind: str


def _boundary_mask(inside: np.ndarray, time_axis: bool) -> np.ndarray:
    """Nodes of the domain with a neighbour outside it or on the grid edge.

    For parabolic tables the first axis is time: its initial slice belongs
    to the boundary while the final slice does not.
    """
    padded = np.pad(inside, 1, constant_values=False)
    mask = np.zeros_like(inside)
    spatial = range(1, inside.ndim) if time_axis else range(inside.ndim)
    core = tuple(slice(1, -1) for _ in range(inside.ndim))
    for ax in spatial:
        for shift in (1, -1):
            mask |= ~np.roll(padded, shift, axis=ax)[core]
    mask &= inside
    if time_axis:
        mask[0] |= inside[0]
    return mask


def max_principle_check(u: SolutionTable, kind: str, A=None, tol: float = 1e-12) -> MaxPrincipleReport:
    """Check that the extremes of ``u`` are attained on the relevant boundary.

    Nodes holding NaN are outside the domain.  For the ``-A`` kinds ``A``
    must be SPD; the substitution ``x = A^(1/2) y`` maps the grid's domain
    to its image while keeping boundary nodes on the boundary, so the
    comparison is made on the same node set.
    """
    if kind not in KINDS:
        raise DomainError(f"kind must be one of {KINDS}")
    if kind.endswith("-A"):
        if A is None:
            raise DomainError(f"kind {kind} needs a matrix A")
        spd_sqrt(A)
    vals = np.asarray(u.values, dtype=float)
    inside = np.isfinite(vals)
    if not inside.any():
        raise DomainError("table has no finite values")
    mask = _boundary_mask(inside, kind in ("heat", "parabolic-A"))
    gmax, gmin = np.nanmax(vals), np.nanmin(vals)
    bmax, bmin = vals[mask].max(), vals[mask].min()
    ok_max = bmax >= gmax - tol
    ok_min = bmin <= gmin + tol
    witness = None
    if not (ok_max and ok_min):
        idx = np.nanargmax(vals) if not ok_max else np.nanargmin(vals)
        idx = np.unravel_index(idx, vals.shape)
        witness = tuple(float(ax[1][i]) for ax, i in zip(u.axes, idx))
    return MaxPrincipleReport(bool(ok_max and ok_min), float(gmax), float(gmin), float(bmax),
                              float(bmin), witness, kind)
