"""Problem files: INI-style ``key = value`` lines under ``[section]`` headers.

Sections: ``[problem]`` (``kind``, optional ``seed`` and ``out``),
``[params]`` (coefficients and scalars), ``[grid]``, ``[checks]``
(tolerances and slope bands) and ``[sweep]`` (study parameters).
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .expr import VARIABLES, Expr, ExpressionError, parse_expr


class ProblemFileError(ValueError):
    """The file cannot be read or a field is malformed."""


@dataclass(frozen=True)
class ProblemFile:
    kind: str
    params: dict
    grid: dict
    checks: dict
    sweep: dict
    seed: int = 0
    out: str | None = None
    source: str = "<string>"

    def _get(self, section: str, key: str, default=None):
        table = getattr(self, section)
        if key in table:
            return table[key]
        if default is None:
            raise ProblemFileError(f"[{section}] needs key {key!r}")
        return default

    def expr(self, key: str, allowed=VARIABLES, default=None, section: str = "params") -> Expr:
        try:
            return parse_expr(self._get(section, key, default), allowed)
        except ExpressionError as exc:
            raise ProblemFileError(f"[{section}] {key}: {exc}") from None

    def number(self, key: str, default=None, section: str = "params") -> float:
        raw = self._get(section, key, None if default is None else str(default))
        try:
            value = float(raw)
        except ValueError:
            raise ProblemFileError(f"[{section}] {key} must be a number, got {raw!r}") from None
        if not math.isfinite(value):
            raise ProblemFileError(f"[{section}] {key} must be finite")
        return value

    def integer(self, key: str, default=None, section: str = "params") -> int:
        value = self.number(key, default, section)
        if value != int(value):
            raise ProblemFileError(f"[{section}] {key} must be an integer")
        return int(value)

    def numbers(self, key: str, default=None, section: str = "params") -> list:
        raw = self._get(section, key, default)
        parts = [s for s in str(raw).replace(";", ",").split(",") if s.strip()]
        try:
            return [float(s) for s in parts]
        except ValueError:
            raise ProblemFileError(f"[{section}] {key} must be a comma list of numbers") from None

    def linspace(self, key: str, default=None, section: str = "grid") -> np.ndarray:
        """``start, stop, count`` as an evenly spaced axis."""
        vals = self.numbers(key, default, section)
        if len(vals) != 3 or vals[2] != int(vals[2]) or vals[2] < 2 or not vals[1] > vals[0]:
            raise ProblemFileError(f"[{section}] {key} must be 'start, stop, count' with "
                                   f"stop > start and count >= 2")
        return np.linspace(vals[0], vals[1], int(vals[2]))

    def text(self, key: str, default=None, section: str = "params") -> str:
        return str(self._get(section, key, default)).strip()


def _section(cp, name):
    return dict(cp[name]) if cp.has_section(name) else {}


def parse_problem(text: str, source: str = "<string>") -> ProblemFile:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ProblemFileError(f"{source}: {exc}") from None
    if not cp.has_section("problem") or "kind" not in cp["problem"]:
        raise ProblemFileError(f"{source}: missing [problem] kind")
    head = cp["problem"]
    try:
        seed = int(head.get("seed", "0"))
    except ValueError:
        raise ProblemFileError("seed must be an integer") from None
    if not 0 <= seed < 2**64:
        raise ProblemFileError("seed must be a 64-bit unsigned integer")
    return ProblemFile(head["kind"].strip(), _section(cp, "params"), _section(cp, "grid"),
                       _section(cp, "checks"), _section(cp, "sweep"), seed, head.get("out"), source)


def load_problem(path) -> ProblemFile:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc.strerror}") from None
    return parse_problem(text, str(path))
