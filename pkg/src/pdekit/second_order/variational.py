"""Pointwise Euler-Lagrange residual of a candidate minimizer on a grid."""

from __future__ import annotations

from typing import Callable

import numpy as np


def _fd_partial(fun, args, which, h=1e-6):
    """Central difference of ``fun`` in argument ``which`` (componentwise if vector)."""
    x, z, u = args
    if which == "z":
        return (fun(x, z + h, u) - fun(x, z - h, u)) / (2 * h)
    out = []
    for i in range(u.shape[-1]):
        e = np.zeros(u.shape[-1])
        e[i] = h
        out.append((fun(x, z, u + e) - fun(x, z, u - e)) / (2 * h))
    return np.stack(out, axis=-1)


def euler_lagrange_residual(L: Callable, z: np.ndarray, axes, L_z: Callable | None = None,
                            L_u: Callable | None = None) -> np.ndarray:
    """``L_z - sum_i d/dx_i [L_{u_i}]`` at interior nodes of a tensor grid.

    ``L(x, z, u)`` takes points ``(..., m)``, values ``(...)`` and gradients
    ``(..., m)``.  ``L_u`` returns ``(..., m)``.  Gradients of ``z`` and the
    divergence use central differences, so the residual lives on nodes at
    least two away from the grid edge.
    """
    axes = [np.asarray(a, dtype=float) for a in axes]
    z = np.asarray(z, dtype=float)
    m = len(axes)
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    grad = np.stack(np.gradient(z, *axes, edge_order=2), axis=-1)
    args = (X, z, grad)
    Lz = L_z(*args) if L_z else _fd_partial(L, args, "z")
    Lu = L_u(*args) if L_u else _fd_partial(L, args, "u")
    div = sum(np.gradient(Lu[..., i], axes[i], axis=i, edge_order=2) for i in range(m))
    res = np.asarray(Lz - div, dtype=float)
    core = tuple(slice(2, -2) for _ in range(m))
    return res[core]
