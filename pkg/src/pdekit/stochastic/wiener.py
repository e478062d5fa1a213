"""Seeded Wiener paths and their Ornstein-Uhlenbeck smoothing."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import TimeGrid
from ..errors import DomainError


def path_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Generator for path ``index`` of a study seeded with ``seed`` (spawn-key scheme)."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


@dataclass(frozen=True)
class WienerPath:
    """``w`` sampled at ``times``; shape ``(n+1, m)`` or ``(P, n+1, m)`` for a batch of P paths."""

    times: np.ndarray
    w: np.ndarray
    seed: int

    @property
    def m(self) -> int:
        return self.w.shape[-1]

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.w, axis=-2)

    @property
    def batched(self) -> bool:
        return self.w.ndim == 3

    @property
    def n_paths(self) -> int:
        return self.w.shape[0] if self.batched else 1

    def path(self, k: int) -> "WienerPath":
        return WienerPath(self.times, self.w[k], self.seed) if self.batched else self

    def coarsen(self, factor: int) -> "WienerPath":
        """Same path on every ``factor``-th node (increments summed, so still exact)."""
        n = self.times.size - 1
        if factor < 1 or n % factor:
            raise DomainError(f"factor {factor} does not divide {n} intervals")
        return WienerPath(self.times[::factor], self.w[..., ::factor, :], self.seed)


def _times(grid) -> np.ndarray:
    if isinstance(grid, TimeGrid):
        return grid.nodes
    t = np.atleast_1d(np.asarray(grid, dtype=float))
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise DomainError("time nodes must increase")
    return t


def sample_wiener(grid, m: int = 1, seed: int = 0, index: int = 0) -> WienerPath:
    """One standard ``m``-dimensional Wiener path with ``w(t0) = 0``.

    ``grid`` is a TimeGrid or an increasing array of nodes; a single node
    gives the trivial path.
    """
    if m < 1:
        raise DomainError("need m >= 1")
    t = _times(grid)
    rng = path_rng(seed, index)
    dw = rng.standard_normal((t.size - 1, m)) * np.sqrt(np.diff(t))[:, None]
    w = np.vstack([np.zeros((1, m)), np.cumsum(dw, axis=0)])
    return WienerPath(t, w, int(seed))


def sample_wiener_batch(grid, n_paths: int, m: int = 1, seed: int = 0) -> WienerPath:
    """``n_paths`` paths; path ``k`` equals ``sample_wiener(grid, m, seed, index=k)``."""
    paths = [sample_wiener(grid, m, seed, k).w for k in range(n_paths)]
    return WienerPath(_times(grid), np.stack(paths), int(seed))


@dataclass(frozen=True)
class SmoothedPath:
    """``v`` solves ``v' = beta (w - v)``, ``v(0) = 0``, with ``beta = 1/eps``; ``eta = w - v``."""

    source: WienerPath
    eps: float
    v: np.ndarray

    @property
    def beta(self) -> float:
        return 1.0 / self.eps

    @property
    def eta(self) -> np.ndarray:
        return self.source.w - self.v

    def vdot(self, i: int, s):
        """``dv/dt = beta eta`` at offset ``s`` in interval ``i`` (``w`` linear there)."""
        t = self.source.times
        h = t[i + 1] - t[i]
        d = self.source.w[..., i + 1, :] - self.source.w[..., i, :]
        e0 = self.v[..., i, :] - self.source.w[..., i, :]
        E = math.exp(-self.beta * s)
        e = e0 * E - d / h * (1.0 - E) / self.beta
        return -self.beta * e


def smooth_path_ou(path: WienerPath, eps: float) -> SmoothedPath:
    """Exact exponential update of the filter for piecewise-linear ``w``:

    ``v_{i+1} = w_{i+1} + (v_i - w_i) E - dw_i (1 - E) / (beta h)`` with ``E = exp(-beta h)``.
    """
    if not eps > 0:
        raise DomainError("eps must be positive")
    beta = 1.0 / eps
    t = path.times
    v = np.zeros_like(path.w)
    for i in range(t.size - 1):
        h = t[i + 1] - t[i]
        E = math.exp(-beta * h)
        d = path.w[..., i + 1, :] - path.w[..., i, :]
        v[..., i + 1, :] = (path.w[..., i + 1, :] + (v[..., i, :] - path.w[..., i, :]) * E
                            - d * (1.0 - E) / (beta * h))
    return SmoothedPath(path, float(eps), v)
