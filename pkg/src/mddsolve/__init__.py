"""MDD-backed generic constraint engine: compile, propagate, search."""

from .mdd import (
    Mdd,
    MddError,
    ParseError,
    ValidationError,
    accepts,
    conjoin,
    count_solutions,
    deserialize,
    enumerate_solutions,
    from_tuples,
    reduce_full,
    serialize,
    structural_equal,
    validate_mdd,
)
from .propagator import (
    BoundViolation,
    Propagator,
    PropagatorConfig,
    PropagatorStats,
    StateError,
)
from .oracle import (
    OracleCapacityError,
    filter_solutions,
    oracle_entailed,
    oracle_solve,
    oracle_valid_domains,
)
from .search import Csp, Constraint, SearchStats, SolveResult, SolverOptions, parse_csp, parse_csp_text, solve

__version__ = "0.1.0"

__all__ = [
    "Mdd", "MddError", "ParseError", "ValidationError",
    "accepts", "conjoin", "count_solutions", "deserialize",
    "enumerate_solutions", "from_tuples", "reduce_full", "serialize",
    "structural_equal", "validate_mdd",
    "BoundViolation", "Propagator", "PropagatorConfig", "PropagatorStats",
    "StateError",
    "OracleCapacityError", "filter_solutions", "oracle_entailed",
    "oracle_solve", "oracle_valid_domains",
    "Csp", "Constraint", "SearchStats", "SolveResult", "SolverOptions",
    "parse_csp", "parse_csp_text", "solve",
    "__version__",
]
