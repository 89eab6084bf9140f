use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("row {row} of the passive dynamics is invalid: {reason}")]
    InvalidPassive { row: usize, reason: String },
    #[error("state cost {state} is invalid: {reason}")]
    InvalidCost { state: usize, reason: String },
    #[error("policy puts mass on state {state} where the passive dynamics has none")]
    AbsoluteContinuity { state: usize },
    #[error("observed transition {from} -> {to} has zero passive probability")]
    IncompatibleTransition { from: usize, to: usize },
    #[error("transition counts contain no observations")]
    EmptyCounts,
    #[error("Z-iteration did not converge after {iterations} sweeps (last change {change:e})")]
    NonConvergence { iterations: usize, change: f64 },
    #[error("desirability of state {state} collapsed to zero; the chain is reducible")]
    CollapsedDesirability { state: usize },
    #[error("basis function {column} does not touch any state")]
    EmptyBasisColumn { column: usize },
    #[error("trajectory {trajectory} has non-consecutive time index {t} at position {position}")]
    NonConsecutiveTime {
        trajectory: usize,
        position: usize,
        t: usize,
    },
    #[error("state index {state} out of range for {count} states")]
    StateOutOfRange { state: usize, count: usize },
    #[error("input row {row}: {reason}")]
    Validation { row: usize, reason: String },
    #[error("{divergent} of {total} post-warmup transitions diverged (limit {pct:.1}%)", pct = .limit * 100.0)]
    Divergences {
        divergent: usize,
        total: usize,
        limit: f64,
    },
    #[error("non-finite log density or gradient at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("ELBO diverged at iteration {iteration} (window mean {window_mean:e}, best {best:e})")]
    ElboDiverged {
        iteration: usize,
        window_mean: f64,
        best: f64,
    },
}

impl Error {
    /// Failures of a numerical procedure, as opposed to invalid inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::CollapsedDesirability { .. }
                | Error::Divergences { .. }
                | Error::NonFinite { .. }
                | Error::ElboDiverged { .. }
        )
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
