"""Wiener paths, Stratonovich SDEs and their Wong-Zakai approximations, and the
flow factorization of SDEs with commuting drift and diffusion."""

from .factorization import (FlowFactorization, FunctionalReport, PsiResult, commuting_flow_solution,
                            factorized_sde, functional_S_check, psi_fixed_point)
from .sde import (ChainRuleReport, SDEProblem, StudyTable, integrate_approx_ode,
                  integrate_stratonovich, ito_formula_check, loglog_slope, wz_convergence_study,
                  zero_diffusion)
from .wiener import (SmoothedPath, WienerPath, path_rng, sample_wiener, sample_wiener_batch,
                     smooth_path_ou)

__all__ = [name for name in dir() if not name.startswith("_")]
