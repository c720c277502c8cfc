"""Exterior algebra, SU(3)- and G2-structures, curvature and Hitchin flow on Lie algebras."""
from .coeff import ScalarExpr
from .errors import G2ForgeError
from .exterior import Form, FrameMetric, e, hodge, interior, wedge
from .lie import LieAlgebra, ce_d, jacobi_check, lower_central_series, solvable_extension
from .su3 import SU3Structure, class_predicates, hitchin_j, su3_checks
from .g2 import PHI0, G2Structure, build_phi, conformal_parallel_check, fg_class, torsion
from .curvature import Coframe, coframe_curvature, holonomy_span, ricci
from .flow import FlowState, integrate

__version__ = "0.1.0"

__all__ = [
    "ScalarExpr", "G2ForgeError", "Form", "FrameMetric", "e", "hodge", "interior", "wedge",
    "LieAlgebra", "ce_d", "jacobi_check", "lower_central_series", "solvable_extension",
    "SU3Structure", "class_predicates", "hitchin_j", "su3_checks",
    "PHI0", "G2Structure", "build_phi", "conformal_parallel_check", "fg_class", "torsion",
    "Coframe", "coframe_curvature", "holonomy_span", "ricci", "FlowState", "integrate",
]
