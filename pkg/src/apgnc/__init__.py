"""Proximal gradient methods with momentum for nonconvex composite problems."""

from .algorithms import (MomentumSchedule, SolverConfig, Trace, run_apg, run_apgnc,
                         run_apgnc_plus, run_inexact_apgnc, run_mapg, run_proximal_gradient)
from .core import CompositeObjective, eval_F
from .problems import generate_nnpca, quadratic_problem, quartic_problem
from .svrg import (SvrgConfig, run_inexact_svrg_apgnc, run_prox_svrg, run_svrg_apgnc,
                   run_svrg_apgnc_plus)

__version__ = "0.1.0"
