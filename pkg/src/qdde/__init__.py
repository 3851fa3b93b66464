"""qdde: linear q-difference-differential Cauchy problems, solved and certified."""

from ._kernels import BACKEND, NUMBA_ENABLED
from .errors import (ConsistencyError, ContractionSearchError, DataError,
                     DomainError, EmptySeriesError, QddeError,
                     SmallDivisorError, TruncationWindowError)
from .qlaplace import (DomainSpec, QParameter, SpiralGrid, in_spiral_domain,
                       q_laplace_eval, shift_identity_check, theta_eval,
                       theta_lower_envelope)
from .series import (BivariateSeries, Polynomial, UnivariateSeries,
                     borel_q_formal, dilate_t, diff_z, euler_z,
                     laplace_q_formal, mul_poly_z, qpow, scale_z)
from .solver import (AssumptionReport, FitConfig, OperatorTerm, ProblemSpec,
                     Truncation, evaluate_solution, residual_formal,
                     resolve_r0, solve_formal, validate, wh_spiral, wh_taylor)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "NUMBA_ENABLED",
    "QddeError", "DomainError", "EmptySeriesError", "TruncationWindowError",
    "SmallDivisorError", "ConsistencyError", "ContractionSearchError", "DataError",
    "QParameter", "DomainSpec", "SpiralGrid", "theta_eval", "theta_lower_envelope",
    "in_spiral_domain", "q_laplace_eval", "shift_identity_check",
    "UnivariateSeries", "BivariateSeries", "Polynomial", "qpow",
    "mul_poly_z", "dilate_t", "euler_z", "diff_z", "scale_z",
    "borel_q_formal", "laplace_q_formal",
    "ProblemSpec", "OperatorTerm", "Truncation", "FitConfig", "AssumptionReport",
    "validate", "solve_formal", "residual_formal", "wh_taylor", "wh_spiral",
    "evaluate_solution", "resolve_r0",
]
