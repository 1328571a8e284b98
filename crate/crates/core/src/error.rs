use thiserror::Error;

/// Errors raised while validating records, evaluating predictors, or
/// assembling metrics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("event indicator does not match the recorded endpoint: {field}")]
    MismatchedEndpoint { field: &'static str },
    #[error("times are not monotone: {field}")]
    NonMonotoneTimes { field: &'static str },
    #[error("negative time in field {field}")]
    NegativeTime { field: &'static str },
    #[error("invalid evaluation window (t >= 0 and dt > 0 required)")]
    InvalidWindow,
    #[error("no subject remains at risk at the landmark time")]
    EmptyRiskSet,
    #[error("time {time} lies outside the supported range")]
    OutOfSupport { time: f64 },
    #[error("invalid model parameters: {0}")]
    InvalidParameters(String),
    #[error("record is not an absolute case for the window")]
    NotAbsoluteCase,
    #[error("censoring survival is zero at the requested time")]
    ZeroSurvival,
    #[error("total case weight is zero")]
    NoCaseMass,
    #[error("total control weight is zero")]
    NoControlMass,
    #[error("no absolute case in the risk set")]
    NoAbsoluteCases,
    #[error("no absolute control in the risk set")]
    NoAbsoluteControls,
    #[error("every subject contributed zero probability")]
    AllContributionsDegenerate,
    #[error("true event times are required but missing")]
    MissingTruth,
    #[error("invalid simulation configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
