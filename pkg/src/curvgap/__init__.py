"""Numerical laboratory for curvature gap estimates on periodic model
geometries.

The package builds Hermitian metrics on complex tori, evaluates their Chern
curvature and a family of curvature functionals (holomorphic sectional, real
bisectional, weighted orthogonal Ricci, k-Ricci), certifies sign and
nondegeneracy hypotheses on regions, solves the associated complex
Monge-Ampere continuity paths, and audits every inequality of the resulting
a priori estimate chain with explicit numerical margins.
"""

__version__ = "0.1.0"

from .errors import (
    FieldChecksumError,
    LinearSolveFailure,
    MaxIterExceeded,
    NotPositiveDefinite,
    ParameterError,
    PositivityLoss,
    SingularMetric,
)
from .grid import Grid
from .metrics import (
    CurvatureTensorField,
    MetricField,
    MetricSpec,
    TrigExpr,
    TrigTerm,
    build_metric,
    chern_curvature,
    curvature_at_points,
    mixed_density,
    mixed_top_integral,
    rel_eigvalsh,
)
from .functionals import (
    ExtremalField,
    k_ricci_field,
    kappa_field,
    lambda_max,
    max_rbc_at_point,
    max_rbc_field,
    mu_eta,
    ric_perp_field,
    tau_field,
)
from .certify import (
    HypothesisReport,
    RegionSpec,
    certify_delta1_bounded,
    certify_quasi_negative,
    certify_volume_noncollapse,
    find_delta,
)
from .continuity import (
    ContinuityPath,
    MAProblem,
    PathSample,
    Schedule,
    assemble_problem,
    estimate_c3,
    run_continuation,
    solve_ma,
)
from .audit import (
    AuditRecord,
    AuditReport,
    check_integral_lemma,
    check_schwarz,
    check_sup_ut,
    check_thm2_differential,
    check_trace_bound,
    compute_constants,
    gap_report,
    neg_ricci_volume,
)
from .config import RunConfig
from .rundir import RunDirectory

__all__ = [
    "Grid",
    "TrigTerm",
    "TrigExpr",
    "MetricSpec",
    "MetricField",
    "CurvatureTensorField",
    "build_metric",
    "chern_curvature",
    "curvature_at_points",
    "mixed_density",
    "mixed_top_integral",
    "rel_eigvalsh",
    "ExtremalField",
    "max_rbc_field",
    "max_rbc_at_point",
    "kappa_field",
    "mu_eta",
    "ric_perp_field",
    "tau_field",
    "lambda_max",
    "k_ricci_field",
    "RegionSpec",
    "HypothesisReport",
    "certify_quasi_negative",
    "certify_delta1_bounded",
    "certify_volume_noncollapse",
    "find_delta",
    "Schedule",
    "MAProblem",
    "PathSample",
    "ContinuityPath",
    "assemble_problem",
    "solve_ma",
    "run_continuation",
    "estimate_c3",
    "AuditRecord",
    "AuditReport",
    "check_schwarz",
    "check_trace_bound",
    "check_sup_ut",
    "check_thm2_differential",
    "check_integral_lemma",
    "compute_constants",
    "gap_report",
    "neg_ricci_volume",
    "RunConfig",
    "RunDirectory",
    "ParameterError",
    "NotPositiveDefinite",
    "SingularMetric",
    "PositivityLoss",
    "MaxIterExceeded",
    "LinearSolveFailure",
    "FieldChecksumError",
    "__version__",
]
