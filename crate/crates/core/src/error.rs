use thiserror::Error;

use crate::allocator::projection::InfeasibilityCertificate;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed scenario file: {0}")]
    Parse(String),

    /// First violated scenario invariant.
    #[error("invalid scenario: {0}")]
    Validation(String),

    #[error("target position coincides with the radar; bearing is undefined")]
    CoincidentPosition,

    #[error("zero range between target and radar; jacobian is undefined")]
    ZeroRange,

    #[error("radar energy P*T is zero; measurement covariance is undefined")]
    ZeroEnergy,

    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),

    #[error("normal matrix is rank deficient (min/max eigenvalue ratio {ratio:.3e}); geometry is unobservable")]
    RankDeficient { ratio: f64 },

    #[error("least squares did not converge after {iterations} iterations (last step norm {step_norm:.3e})")]
    Divergence { iterations: usize, step_norm: f64 },

    #[error("singular matrix in {0}")]
    SingularMatrix(&'static str),

    #[error("singular prior: previous information is not invertible and process noise is zero")]
    SingularPrior,

    #[error("constraint set is empty: {0}")]
    Infeasible(InfeasibilityCertificate),

    #[error("non-finite objective at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("rmse needs at least one trial")]
    EmptyTrials,

    #[error("target {target}, interval {interval}: {source}")]
    Fusion {
        target: usize,
        interval: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("result file: {0}")]
    Output(String),
}
