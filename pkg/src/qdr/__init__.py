"""Exact computer algebra for quantum double ramification hierarchies."""

from .errors import (
    IncompatibleSetup,
    NotDivisible,
    NotExact,
    OddLambdaResidue,
    ParseError,
    QDRError,
    TruncationError,
    UndeclaredParameter,
    WeightOneObstruction,
)
from .scalars import GaussianRational, Scalar, ScalarSum, declare_parameters
from .jets import (
    UNBOUNDED,
    LocalFunctional,
    QDiffPoly,
    TruncationSpec,
    antiderivative,
    d_x,
    differential_degree,
    dilaton_D,
    functional_equal,
    invert_D_minus_1,
    partial,
    substitute,
    truncate,
    variational_derivative,
)
from .serialize import format_qdp, from_structured, parse_qdp, to_structured
from .bracket import Metric, classical_bracket, commutator_density_functional, commutator_functionals, divide_by_hbar
from .hierarchy import HierarchySetup, HierarchyTable, Report, build_hierarchy, flow_equation, verify_all
from .seeds import SEEDS, dispersionless_kdv_oracle, seed_ilw, seed_kdv, seed_toda, toda_miura_substitute

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
