"""Shared data types: grids, vector fields, solution tables and CSV output."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError

CSV_FLOAT = "%.17g"


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t0 < t0 + h < ... < t1`` with ``n`` intervals."""

    t0: float
    t1: float
    n: int

    def __post_init__(self):
        if not (np.isfinite(self.t0) and np.isfinite(self.t1)):
            raise DomainError("grid endpoints must be finite")
        if self.n < 1:
            raise DomainError(f"grid needs n >= 1 intervals, got {self.n}")
        if not self.t1 > self.t0:
            raise DomainError(f"grid needs t1 > t0, got [{self.t0}, {self.t1}]")

    @property
    def h(self) -> float:
        return (self.t1 - self.t0) / self.n

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.t0, self.t1, self.n + 1)

    def __len__(self):
        return self.n + 1

    def index_of(self, x: float, tol: float = 1e-12) -> int:
        """Index of the node equal to ``x``; raises if ``x`` is not a node."""
        i = int(round((x - self.t0) / self.h))
        if i < 0 or i > self.n or abs(self.t0 + i * self.h - x) > tol * max(1.0, abs(x)):
            raise DomainError(f"{x} is not a node of {self}")
        return i

    def refined(self, factor: int) -> "TimeGrid":
        return TimeGrid(self.t0, self.t1, self.n * factor)


def central_jacobian(func: Callable, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Jacobian of ``func`` at ``x`` by 4-point central differences.

    The step is ``step * (1 + |x|)``; the stencil is fourth order.
    """
    x = np.asarray(x, dtype=float)
    f0 = np.atleast_1d(np.asarray(func(x), dtype=float))
    n = x.size
    h = step * (1.0 + np.linalg.norm(x))
    jac = np.empty((f0.size, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        fp1 = np.atleast_1d(func(x + e))
        fm1 = np.atleast_1d(func(x - e))
        fp2 = np.atleast_1d(func(x + 2 * e))
        fm2 = np.atleast_1d(func(x - 2 * e))
        jac[:, j] = (8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * h)
    return jac


@dataclass(frozen=True)
class FieldSpec:
    """A right-hand side ``func(t, y)`` with an optional analytic Jacobian.

    With ``autonomous=True`` the callables take only the state: ``func(y)``.
    """

    func: Callable
    jac: Optional[Callable] = None
    autonomous: bool = False
    name: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __call__(self, t, y):
        y = np.asarray(y, dtype=float)
        out = self.func(y) if self.autonomous else self.func(t, y)
        return np.asarray(out, dtype=float)

    def jacobian(self, t, y) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if self.jac is not None:
            out = self.jac(y) if self.autonomous else self.jac(t, y)
            return np.atleast_2d(np.asarray(out, dtype=float))
        return central_jacobian(lambda z: self(t, z), y)

    @property
    def has_jacobian(self) -> bool:
        return self.jac is not None


def as_field(obj, autonomous: bool = False) -> FieldSpec:
    if isinstance(obj, FieldSpec):
        return obj
    if callable(obj):
        return FieldSpec(obj, autonomous=autonomous)
    raise TypeError(f"expected a FieldSpec or callable, got {type(obj).__name__}")


def constant_field(c) -> FieldSpec:
    c = np.atleast_1d(np.asarray(c, dtype=float))
    n = c.size
    return FieldSpec(lambda y: np.broadcast_to(c, np.shape(y)).copy(),
                     jac=lambda y: np.zeros((n, n)), autonomous=True, name="constant")


def linear_field(A) -> FieldSpec:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return FieldSpec(lambda y: y @ A.T, jac=lambda y: A, autonomous=True, name="linear")


@dataclass(frozen=True)
class TrajectoryTable:
    """States sampled on a grid.  ``states[0]`` is the Cauchy datum."""

    times: np.ndarray
    states: np.ndarray
    method: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def at(self, t: float) -> np.ndarray:
        """Linear interpolation of the state at time ``t``."""
        ts = self.times
        if t < ts[0] - 1e-12 or t > ts[-1] + 1e-12:
            raise DomainError(f"t={t} outside [{ts[0]}, {ts[-1]}]")
        return np.array([np.interp(t, ts, self.states[:, j]) for j in range(self.states.shape[1])])

    def to_csv(self, path=None) -> str:
        header = ["t"] + [f"y{j}" for j in range(self.states.shape[1])]
        rows = np.column_stack([self.times, self.states])
        return write_csv(header, rows, path)


@dataclass(frozen=True)
class SolutionTable:
    """Values sampled on a tensor grid with provenance.

    ``axes`` is a sequence of ``(name, nodes)`` pairs; ``values`` has shape
    ``tuple(len(nodes) for _, nodes in axes)`` (plus trailing component axes
    when the solution is vector valued).
    """

    axes: tuple
    values: np.ndarray
    method: str
    info: dict = field(default_factory=dict)

    def axis(self, name: str) -> np.ndarray:
        for n, nodes in self.axes:
            if n == name:
                return nodes
        raise KeyError(name)

    def to_csv(self, path=None) -> str:
        names = [n for n, _ in self.axes]
        nodes = [np.asarray(v) for _, v in self.axes]
        mesh = np.meshgrid(*nodes, indexing="ij")
        vals = np.asarray(self.values)
        ncoord = len(nodes)
        flat_vals = vals.reshape(int(np.prod(vals.shape[:ncoord])), -1)
        if flat_vals.shape[1] == 1:
            vheader = ["value"]
        else:
            vheader = [f"value{j}" for j in range(flat_vals.shape[1])]
        rows = np.column_stack([m.ravel() for m in mesh] + [flat_vals])
        return write_csv(names + vheader, rows, path)


def write_csv(header: Sequence[str], rows, path=None) -> str:
    """Write a header plus numeric rows at 17 significant digits.

    Returns the CSV text; also writes it to ``path`` when given.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(header))
    for row in rows:
        w.writerow([fmt_value(v) for v in row])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def fmt_value(v) -> str:
    if isinstance(v, (str, bytes)):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return CSV_FLOAT % float(v)
