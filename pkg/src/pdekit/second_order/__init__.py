"""Second-order equations: potentials, wave and heat formulas, Riemann's method,
Fourier series on intervals, maximum principles and fixed-point solvers."""

from .ball import (BallProblem, ball_dirichlet_solve, ball_neumann_recover, poisson_kernel,
                   poisson_kernel_sphere_integral, sphere_mean)
from .fourier import (FourierResult, MixedBVP, fourier_hyperbolic_solve, fourier_parabolic_solve,
                      mode_residuals)
from .heat import heat_kernel, heat_kernel_mass, heat_solve, heat_solve_grid
from .maxprinciple import MaxPrincipleReport, max_principle_check, spd_sqrt
from .nonlinear import (EllipticSolution, PicardReport, nonlinear_elliptic_picard,
                        nonlinear_parabolic_picard, parabolic_c1)
from .potential import PotentialReport, newtonian_potential
from .riemann import (RiemannKernel, RiemannProblem, adjoint_problem, riemann_cauchy_solve,
                      riemann_function, riemann_goursat_solve)
from .variational import euler_lagrange_residual
from .wave import (WaveProblem, dalembert_solve, duhamel_solve, kirchhoff_solve, wave2d_poisson_solve,
                   wave_energy)

__all__ = [name for name in dir() if not name.startswith("_")]
