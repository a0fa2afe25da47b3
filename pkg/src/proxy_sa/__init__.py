"""Derivative-based proxies for total and total-interaction sensitivity indices.

The package estimates weighted derivative measures (NUB matrices) of a model
with independent inputs, normalizes them into cheap proxies for total and
superset Sobol-type indices, and checks them against closed forms,
pick-freeze estimates, quadrature identities and classical DGSM bounds.
"""

from .bounds import (
    InteractionSets,
    PoincareConstants,
    centered_inputs_bound,
    classical_bound,
    dgsm,
    general_bound_sum,
    load_interaction_sets,
    ordered_interaction_bound,
    poincare_constants,
)
from .config import StudyConfig, load_config
from .differentiation import DerivativeStack, FDScheme, cross_partial_fd, partial_stack
from .errors import (
    CapabilityError,
    DegenerateModelError,
    DivergenceError,
    DomainError,
    IncompleteInputError,
    InsufficientDataError,
    ProxySAError,
    ReportIOError,
    ShapeError,
    SingularityError,
    UnknownModelError,
    ValidationError,
)
from .estimators import (
    CovMatrix,
    ProxyEstimate,
    StudyResult,
    anova_component,
    estimate_proxy,
    first_order_functional,
    frob_proxy,
    normalized_proxies,
    nub_matrix,
    output_covariance,
    replicate_study,
    tief_functional,
    trace_proxy,
)
from .marginals import InputSpace, Marginal, uniform
from .models import ModelSpec, builtin
from .oracle import (
    EqualityReport,
    ReferenceIndex,
    closed_form_reference,
    pick_freeze_total,
    superset_index,
    verification_suite,
    verify_anova_structure,
    verify_variance_identity,
)
from .report import ReportRow, ReportTable, read_report, run_study, write_report
from .sampling import SampleMatrix, SeedPolicy, UnitSample, prng_points, sobol_points, transform

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
