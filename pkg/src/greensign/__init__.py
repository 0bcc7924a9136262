"""Constant-sign characterization of Green's functions for two-point BVPs."""

from .coeffexpr import (
    CoefficientExpr,
    DomainError,
    ExprSyntaxError,
    UnknownIdentifierError,
    parse_expr,
    eval_expr,
    differentiate,
    unparse,
)
from .problem import (
    ProblemSpec,
    DerivedIndices,
    BoundaryFunctional,
    SpaceDescriptor,
    SpaceVariant,
    SpaceCollisionError,
    ValidationError,
    check_na,
    derive_indices,
    build_space,
    adjoint_boundary_conditions,
    adjoint_operator,
    greens_matrix_coeffs,
)
from .odecore import (
    FundamentalSystem,
    MarkovDecomposition,
    IntegrationOverflowError,
    integrate_fundamental,
    eval_solution,
    wronskians,
    markov_decomposition,
)
from .spectral import (
    Direction,
    Eigenvalue,
    SearchConfig,
    EigenvalueNotFoundError,
    SingularReferenceError,
    characteristic_det,
    find_eigenvalue,
    eigenfunction,
)
from .greenfn import (
    GreenFunction,
    SignReport,
    SingularOperatorError,
    build_green,
    classify_sign,
    pg_ng_bounds,
    adjoint_green,
    nonhomog_basis,
)
from .characterize import (
    Endpoint,
    SignCharacterization,
    NecessaryInterval,
    NonexistenceFlags,
    NaViolationError,
    TildeFormError,
    SubsetError,
    DisconjugacyError,
    constant_sign_interval,
    nonexistence_check,
    necessary_interval,
    nonhomogeneous_interval,
    closed_form_shifted_eigen,
)

__version__ = "0.1.0"
