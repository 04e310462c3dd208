"""Satellite conjunction risk: collision probability over the hard-body disk,
likelihood inference on the miss distance, and catalog pipelines."""

from .catalog import (
    CatalogSchema,
    CatalogSummary,
    ConjunctionMessage,
    EventGroup,
    derive_features,
    group_events,
    parse_catalog,
    select_decision_epoch,
    summarize,
)
from .collision import (
    DilutionMaximum,
    QuadratureConfig,
    dilution_curve,
    pc_chan,
    pc_hat,
    pc_max,
    pc_quadrature,
)
from .errors import (
    ConjRiskError,
    DegenerateCovarianceError,
    DegenerateGeometryError,
    EmptyCatalogError,
    InvalidInputError,
    PropertyViolationError,
    QuadratureError,
    SchemaError,
    UndefinedVarianceError,
)
from .experiments import (
    ConfusionTable,
    RiskAssessment,
    TimelineSeries,
    assess,
    confusion_matrix,
    scale_covariance,
    synthesize_hit_miss,
    timeline_report,
)
from .geometry import (
    EncounterFrame,
    FullStateCovariance,
    PositionCovariance,
    RelativeState,
    StateVector,
    encounter_basis,
    geometric_miss_distance,
    project_to_encounter_frame,
    relative_state,
)
from .inference import (
    ConfidenceInterval,
    ConstrainedFit,
    TestResult,
    confidence_interval,
    constrained_mle,
    likelihood_root,
    mle,
    profile_loglik,
    significance_probability,
    test_hypothesis,
    wald_statistic,
)
from .montecarlo import calibration_study, coverage_study, mc_pc, theorem_sweep

__version__ = "0.1.0"
