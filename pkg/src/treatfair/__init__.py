"""treatfair: causal auditing and mitigation of treatment disparities.

Audits historical decision data for disparities in continuous treatment
decisions (loan amounts, durations, rates) and their downstream effect on
outcomes, using counterfactuals in a structural causal model; mitigates them
by constructing treatment-fair datasets and policy-marginalized risk scores.
"""
from .errors import (
    DegenerateData,
    EmptyGroup,
    EmptyPolicy,
    Inconsistent,
    IoFailure,
    MissingColumn,
    NegativeRate,
    NonHarmViolation,
    NonInvertible,
    NonNumericCell,
    OutcomeNotBinary,
    PlanOrderViolation,
    RoleMissing,
    SchemaError,
    SchemaMismatch,
    TreatfairError,
    Underdetermined,
    UnknownColumn,
    UnknownValue,
)
from .schema import (
    BINARY,
    CATEGORICAL,
    CONTINUOUS,
    COVARIATE,
    OUTCOME,
    SENSITIVE,
    TREATMENT,
    Column,
    Dataset,
    FeatureSchema,
    schema_from_roles,
)
from .scm import (
    ContinuousMechanism,
    InterventionPlan,
    LearnedAdditive,
    LearnedThreshold,
    Mechanism,
    NoiseSpec,
    RootMechanism,
    Scm,
    ThresholdMechanism,
    abduct,
    counterfactual,
    direct_sensitive_label_effect,
    downstream_outcome,
    path_specific_counterfactual,
    predict,
    sample,
)
from .synth import SynthConfig, build_oracle, generate, synth_schema
from .estimators import (
    EstimatorConfig,
    fit,
    goodness,
    model_from_doc,
    model_to_doc,
    split_dataset,
)
from .metrics import (
    DisparityConfig,
    DisparityReport,
    aggregate_flip_indicators,
    disparity_report,
    dtd,
    dtd_e,
    ttd,
    ttd_e,
    ttd_e_multi,
    ttd_multi,
)
from .mitigation import (
    AnnuityAmount,
    LossReport,
    RateDuration,
    TreatmentPolicy,
    build_fair_dataset,
    esi,
    fair_risk_score,
    fair_risk_scores,
    ks_distance,
    lgd,
    loss_report,
    risk_cdf,
)
from .predictors import (
    DEMOGRAPHIC_PARITY,
    EQUALIZED_ODDS,
    PredictorModel,
    audit_under_policy,
    evaluate,
    postprocess,
    train,
)
from .dataio import (
    SchemaConfig,
    load_csv,
    load_schema_config,
    read_sidecar,
    save_csv,
    save_schema_config,
    schema_config_from_doc,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
