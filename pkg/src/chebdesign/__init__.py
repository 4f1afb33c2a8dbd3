"""E- and c-optimal designs for regression models built from a parametric
function and its parameter derivatives, via Chebyshev systems."""

from .asympt import (
    CollapseSpec,
    convergence_check_designs,
    expansion_check,
    gamma_bar,
    gamma_tilde,
    h_const,
    limiting_design,
)
from .cheb import (
    ChebyshevSolution,
    cauchy_vandermonde_det,
    chebU,
    closed_form_cheb_points,
    is_chebyshev_system,
    remez,
)
from .design import Design, cheb_weights, design_c, design_c_onepoint_k1, design_estar, info_matrix
from .errors import *  # noqa: F401,F403
from .model import (
    Basis,
    FunctionSystem,
    Interval,
    ModelSpec,
    eval_f,
    eval_fbar,
    ka_matrix,
    limiting_system,
    linearized_system,
    polynomial_system,
)
from .optimal import (
    Verdict,
    VerificationReport,
    brute_force_c,
    brute_force_E,
    c_variance,
    efficiency,
    eig_ratio_sweep,
    sym_eigen,
    verify_c,
    verify_E,
)

__version__ = "0.1.0"
