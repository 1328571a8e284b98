//! Time-dependent predictive accuracy metrics for risk models under
//! interval censoring and competing risks.
//!
//! The crate covers the full desk-scale pipeline: domain records and
//! scenario classification ([`cohort`]), quadrature-backed conditional
//! risk prediction ([`predictor`]), model-based and IPCW case/control
//! weighting ([`weights`]), the AUC/Brier/EPCE estimators ([`metrics`]),
//! and a joint-model cohort simulator ([`simulator`]) used to verify the
//! estimators against censoring-free reference metrics.

pub mod cohort;
pub mod error;
pub mod metrics;
pub mod model;
pub mod predictor;
pub mod quad;
pub mod simulator;
pub mod splines;
pub mod weights;

pub use cohort::{
    build_risk_set, classify_scenario, EvaluationWindow, EventKind, RiskSet, ScenarioCode,
    SubjectRecord,
};
pub use error::{Error, Result};
pub use metrics::{
    Approach, Diagnostics, EpceEstimate, LabeledRisks, MetricsReport, PredictedRisk, RocCurve,
    TrueOutcome,
};
pub use model::{ModelParameters, SubjectProfile};
pub use predictor::{
    Cause, CauseHazard, ConstantHazardPredictor, JointModelPredictor, ModelBases, RiskPredictor,
};
pub use quad::QuadratureRule;
pub use simulator::{BiopsySchedule, SimulatedSubject, SimulationConfig};
pub use weights::{CensoringSurvival, WeightPair};
