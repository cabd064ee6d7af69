use thiserror::Error;

use crate::nls::Trajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("not a double well: {0}")]
    NotADoubleWell(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("numerical consistency violated: {0}")]
    Consistency(String),

    #[error("eigensolver did not converge after {iterations} iterations; best residuals {residuals:?}")]
    NotConverged { iterations: usize, residuals: Vec<f64> },

    /// The field became non-finite or its energy norm exploded. The
    /// trajectory recorded up to that point is attached.
    #[error("blow-up detected at t = {t}: {reason}")]
    BlowUp {
        t: f64,
        reason: String,
        partial: Box<Trajectory>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
