use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("trajectory diverged at t = {t} (|component| = {magnitude:e})")]
    DivergedTrajectory { t: f64, magnitude: f64 },

    #[error("all {n_traj} trajectories diverged")]
    AllTrajectoriesDiverged { n_traj: usize },

    #[error("no peak exceeds prominence {min_prominence}")]
    NoPeaksFound { min_prominence: f64 },

    #[error("polariton peaks unresolved: separation {separation} vs width {width}")]
    PeakUnresolved { separation: f64, width: f64 },

    #[error("fixed-point iteration did not converge in {max_iter} iterations (residual {residual:e})")]
    NotConverged { max_iter: usize, residual: f64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::InvalidParameter { .. })
    }
}
