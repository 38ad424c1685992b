use thiserror::Error;

use crate::rational::ParseRationalError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("world set must be nonempty with unique labels: {0}")]
    InvalidWorldSet(String),
    #[error("world set has {0} worlds; at most 64 are supported")]
    TooManyWorlds(usize),
    #[error("unknown world `{0}`")]
    UnknownWorld(String),
    #[error("unknown observation `{0}`")]
    UnknownObservation(String),
    #[error("operands live on different world sets")]
    SpaceMismatch,
    #[error("every weight is zero")]
    AllZeroWeights,
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("conditioning event has probability zero")]
    ZeroProbabilityEvent,
    #[error("kernel row for world `{world}` sums to {sum}, not 1")]
    RowNotNormalized { world: String, sum: String },
    #[error("invalid observation: {0}")]
    InvalidObservation(String),
    #[error("observation {0} has probability zero under the protocol")]
    UnobservableObservation(usize),
    #[error("Jeffrey update undefined: cell {0} has positive weight but zero prior probability")]
    JeffreyUndefined(usize),
    #[error("rule {rule} cannot be applied to a {kind} observation")]
    RuleKindMismatch { rule: String, kind: String },
    #[error("constraint set is infeasible")]
    Infeasible,
    #[error("no distribution absolutely continuous with respect to the prior meets the constraints")]
    NotAbsolutelyContinuousFeasible,
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("observation {0} violates accuracy")]
    AccuracyViolation(usize),
    #[error("invalid alphas: {0}")]
    InvalidAlphas(String),
    #[error("conditional distribution {0} puts mass outside its cell")]
    ConditionalOutsideCell(usize),
    #[error("wrong alphabet shape: {0}")]
    WrongAlphabetShape(String),
    #[error("supported world `{0}` lies in no observation set")]
    UncoveredWorld(String),
    #[error("sensor {0} is not a partition of the world set")]
    NotAPartition(usize),
    #[error("posterior test and kernel test disagree on observation {0}")]
    InconsistentCarVerdict(usize),
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    ParseRational(#[from] ParseRationalError),
    #[error("scenario file: {0}")]
    ScenarioFormat(String),
}
