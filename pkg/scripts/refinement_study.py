"""Grid-refinement orders: Kirchhoff residual in 3D and the low-order H-J residual."""

import math

import numpy as np

from pdekit.core import TimeGrid
from pdekit.first_order_pde import HJProblem, hj_residual, solve_nonlinear_hj
from pdekit.second_order import WaveProblem, kirchhoff_solve


def kirchhoff_orders(hs=(0.2, 0.1, 0.05, 0.025)):
    c = 1.2
    p = WaveProblem(3, c, u0=lambda X: np.exp(-np.sum(X**2, axis=1)),
                    u1=lambda X: np.sin(X[:, 0]) * np.cos(X[:, 1]))
    t0, P = 0.6, np.array([0.2, -0.1, 0.3])
    res = []
    for h in hs:
        centre = kirchhoff_solve(p, t0, P)
        utt = (kirchhoff_solve(p, t0 + h, P) - 2 * centre + kirchhoff_solve(p, t0 - h, P)) / h**2
        lap = sum(kirchhoff_solve(p, t0, P + h * e) + kirchhoff_solve(p, t0, P - h * e) - 2 * centre
                  for e in np.eye(3)) / h**2
        res.append(abs(utt - c * c * lap))
    return hs, res


def hj_orders(levels=((40, 8), (79, 32), (157, 128))):
    out = []
    for nx, nt in levels:
        prob = HJProblem("nonlinear", u0=lambda x: np.cos(x[:, 0]),
                         x_axes=(np.linspace(-math.pi, math.pi, nx),), t_grid=TimeGrid(0.0, 0.1, nt),
                         H=lambda t, x, u, p: -p[:, 0] ** 2)
        out.append(hj_residual(prob, solve_nonlinear_hj(prob).u, "low").max_residual)
    return levels, out


def main():
    hs, res = kirchhoff_orders()
    print("Kirchhoff residual |u_tt - c^2 Lap u| at a fixed point")
    for i, (h, r) in enumerate(zip(hs, res)):
        rate = "" if i == 0 else f"  order {math.log2(res[i - 1] / r):.2f}"
        print(f"  h {h:<6g} residual {r:.3e}{rate}")
    levels, res = hj_orders()
    print("H-J low-order residual, h_x halved and h_t quartered per level (expect ratio 4)")
    for i, ((nx, nt), r) in enumerate(zip(levels, res)):
        ratio = "" if i == 0 else f"  ratio {res[i - 1] / r:.2f}"
        print(f"  nx {nx:<4d} nt {nt:<4d} residual {r:.3e}{ratio}")


if __name__ == "__main__":
    main()
