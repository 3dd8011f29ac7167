"""Linear SVM training by primal-adjoint gap reduction, with cutting-plane baselines."""

from .dataio import ParseError, SparseDataset, load_libsvm, max_row_norm, parse_libsvm, to_libsvm
from .errors import DivergenceError, Infeasible, InvalidProblem, NoConvergence
from .objective import CuttingPlane, DualPoint, PrimalModel
from .projection import BACKEND, SeparableQpProblem, TransformedQp, solve_separable_qp

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CuttingPlane", "DivergenceError", "DualPoint", "Infeasible", "InvalidProblem",
    "NoConvergence", "ParseError", "PrimalModel", "SeparableQpProblem", "SparseDataset",
    "TransformedQp", "load_libsvm", "max_row_norm", "parse_libsvm", "solve_separable_qp",
    "to_libsvm",
]
