"""Mean-square gap E|v_eps(t) - w(t)|^2 of the OU smoothing against eps."""

import argparse

import numpy as np

from pdekit.core import write_csv
from pdekit.stochastic import loglog_slope, sample_wiener_batch, smooth_path_ou


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.005, 0.01, 0.02, 0.05, 0.1])
    ap.add_argument("--paths", type=int, default=10_000)
    ap.add_argument("--steps", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="smoothing_study.csv")
    args = ap.parse_args()
    paths = sample_wiener_batch(np.linspace(0.0, 1.0, args.steps + 1), args.paths, 1, args.seed)
    half = args.steps // 2
    rows = []
    for eps in args.eps:
        eta = smooth_path_ou(paths, eps).eta[..., 0]
        rows.append((eps, np.mean(eta[:, half] ** 2), np.mean(eta[:, -1] ** 2)))
        print(f"eps {eps:<7g} E gap^2 at t=0.5: {rows[-1][1]:.5f}  at t=1: {rows[-1][2]:.5f}  "
              f"ratio to eps {rows[-1][2] / eps:.3f}")
    write_csv(["epsilon", "gap_t05", "gap_t1"], rows, args.out)
    print(f"slope at t=1: {loglog_slope([r[0] for r in rows], [r[2] for r in rows]):.3f}")


if __name__ == "__main__":
    main()
