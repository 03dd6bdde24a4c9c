"""Numerical lab for the generalized Menchov-Rademacher maximal operator."""

__version__ = "0.1.0"

from .errors import BoundaryCaseError, FamilyError, GeometryError, InstanceError, MRLabError
from .families import FamilyDescriptor, IndexFamily, enumerate_family
from .geometry import TriangleShape, classify_tri_member, split_htri, split_tri
from .operator import OrthonormalSystem, maximal_function, operator_value
from .estimator import estimate_mr, run_restarts
from .certificates import TRI_EXPONENT, gamma_eigenvalue, master_exponent, tri_bound_table

__all__ = [
    "BoundaryCaseError", "FamilyError", "GeometryError", "InstanceError", "MRLabError",
    "FamilyDescriptor", "IndexFamily", "enumerate_family",
    "TriangleShape", "classify_tri_member", "split_htri", "split_tri",
    "OrthonormalSystem", "maximal_function", "operator_value",
    "estimate_mr", "run_restarts",
    "TRI_EXPONENT", "gamma_eigenvalue", "master_exponent", "tri_bound_table",
]
