use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("query point ({x}, {y}) lies outside the field domain")]
    OutOfDomain { x: f64, y: f64 },
    #[error("gradient is undefined or zero at ({x}, {y})")]
    SingularPoint { x: f64, y: f64 },
    #[error("level {level} is not attained by the field (peak {peak})")]
    InfeasibleLevel { level: f64, peak: f64 },
    #[error("sampling region is empty")]
    EmptyRegion,
    #[error("invalid field: {0}")]
    InvalidField(&'static str),
    #[error("step size must be positive, got {0}")]
    NonpositiveStep(f64),
    #[error("derivative mode is Oracle but no oracle derivative was supplied")]
    MissingOracle,
    #[error("invalid controller parameters: {0}")]
    InvalidParams(&'static str),
    #[error("margin infeasible: v*gamma1*cos(eps) = {margin} does not exceed c1 = {c1}")]
    InfeasibleMargin { margin: f64, c1: f64 },
    #[error("bound undefined: atanh argument {0} is not below 1")]
    BoundUndefined(f64),
    #[error("precondition violated: {0}")]
    PreconditionViolated(&'static str),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("trajectory is empty")]
    EmptyTrajectory,
}
