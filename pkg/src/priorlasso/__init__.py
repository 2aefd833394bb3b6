"""Lasso variable selection and estimation under prior constraints ``g(beta) <= 0``."""

__version__ = "0.1.0"

from .constraints import ConstraintSet, evaluate, is_feasible, parse_constraints, serialize  # noqa: E402
from .data import Dataset, read_csv, write_csv  # noqa: E402
from .errors import (  # noqa: E402
    DataError,
    InfeasibleConstraints,
    PriorLassoError,
    SolverError,
)
from .estimator import FitResult, FitSpec, fit_constrained, fit_penalized  # noqa: E402
from .inference import bootstrap_se, degrees_of_freedom  # noqa: E402
from .lsa import LsaSurrogate, fit_lsa_constrained, fit_unpenalized  # noqa: E402
from .qp import solve_qp  # noqa: E402
from .tuning import bic_curve, cross_validate, gcv_curve  # noqa: E402

__all__ = [
    "ConstraintSet", "Dataset", "DataError", "FitResult", "FitSpec", "InfeasibleConstraints",
    "LsaSurrogate", "PriorLassoError", "SolverError", "bic_curve", "bootstrap_se", "cross_validate",
    "degrees_of_freedom", "evaluate", "fit_constrained", "fit_lsa_constrained", "fit_penalized",
    "fit_unpenalized", "gcv_curve", "is_feasible", "parse_constraints", "read_csv", "serialize",
    "solve_qp", "write_csv",
]
