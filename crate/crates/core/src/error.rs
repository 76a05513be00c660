use crate::replicator::StrategyDistribution;

/// Errors reported by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("strategy values must lie in [0,1]: p={p}, q={q}")]
    InvalidStrategy { p: f64, q: f64 },

    #[error("strategy grid needs at least 2 offers, got {0}")]
    GridTooSmall(usize),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("migration target is undefined with a single group")]
    SingleGroup,

    #[error("u = 0 is a pole of the weak-selection expressions; require u > 0")]
    MutationPole,

    #[error("the closed form requires at least 2 groups; use the kernel-sum form for M = 1")]
    ClosedFormNeedsGroups,

    #[error(
        "stationary solve stopped after {steps} steps with residual {residual:.3e} (tol {tol:.3e})"
    )]
    NonConvergence {
        steps: u64,
        residual: f64,
        tol: f64,
        /// Best iterate seen, so callers can inspect or retry from it.
        best: Box<StrategyDistribution>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
