"""Command line: ``pdekit {solve,verify,converge} FILE [--out PATH] [--seed N]``.

Exit codes: 0 success, 2 solver error or failed check, 3 unreadable or
malformed problem file.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..errors import CausticError, SolverError
from .problem import ProblemFileError, load_problem
from .runners import VERBS

EXIT_OK, EXIT_SOLVER, EXIT_PARSE = 0, 2, 3


@dataclass(frozen=True)
class RunReport:
    status: int
    wall_time: float
    checks: tuple
    outputs: tuple
    messages: tuple

    def lines(self) -> list:
        out = [c.line() for c in self.checks] + list(self.messages)
        out += [f"wrote {p}" for p in self.outputs]
        out.append(f"status {self.status} in {self.wall_time:.3f} s")
        return out


def _where(loc) -> str:
    if loc is None:
        return "unknown"
    t, x = loc
    xs = "?" if x is None else ", ".join(f"{v:.6g}" for v in np.ravel(x))
    return f"t={float(t):.6g} x=({xs})"


def run(verb: str, path, out=None, seed=None) -> RunReport:
    start = time.perf_counter()

    def done(status, checks=(), outputs=(), messages=()):
        return RunReport(status, time.perf_counter() - start, tuple(checks), tuple(outputs), tuple(messages))

    try:
        pf = load_problem(path)
        if seed is not None:
            if not 0 <= seed < 2**64:
                raise ProblemFileError("seed must be a 64-bit unsigned integer")
            pf = replace(pf, seed=seed)
        table = VERBS[verb]
        if pf.kind not in table:
            raise ProblemFileError(f"unknown kind {pf.kind!r} for {verb}; valid kinds: {', '.join(table)}")
        outcome = table[pf.kind](pf)
    except ProblemFileError as exc:
        return done(EXIT_PARSE, messages=[f"error: {exc}"])
    except CausticError as exc:
        return done(EXIT_SOLVER, messages=[f"error: {exc}", f"caustic location: {_where(exc.location)}"])
    except SolverError as exc:
        return done(EXIT_SOLVER, messages=[f"error: {type(exc).__name__}: {exc}"])
    target = Path(out or pf.out or Path(path).with_suffix(".csv").name)
    target.write_text(outcome.csv)
    ok = all(c.passed for c in outcome.checks)
    return done(EXIT_OK if ok else EXIT_SOLVER, outcome.checks, [str(target)], outcome.notes)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pdekit", description="Batch solver front end.")
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb, table in VERBS.items():
        sp = sub.add_parser(verb, help=f"kinds: {', '.join(table)}")
        sp.add_argument("file", help="problem file")
        sp.add_argument("--out", help="output CSV path")
        sp.add_argument("--seed", type=int, help="override the file's seed")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    report = run(args.verb, args.file, args.out, args.seed)
    for line in report.lines():
        print(line)
    return report.status


if __name__ == "__main__":
    sys.exit(main())
