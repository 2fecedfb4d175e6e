use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// `e^g = 1 + M g` has no positive root for `M < 2`.
    #[error("efficiency exponent {exponent} admits no positive root of f(g) = g f'(g)")]
    NoPositiveRoot { exponent: u32 },

    #[error("decorrelator infeasible: signature correlation matrix is singular (rcond {rcond:.3e})")]
    DecorrelatorInfeasible { rcond: f64 },

    /// More users share a carrier than the processing gain supports at the target SINR.
    #[error("infeasible occupancy: {users} users on one carrier with gamma* = {gamma_star}, N = {processing_gain}")]
    InfeasibleOccupancy {
        users: usize,
        gamma_star: f64,
        processing_gain: usize,
    },

    #[error("SINR balancing did not converge: target infeasible without a power limit")]
    BalancingInfeasible,

    #[error("user {user} needs {power:.3e} W, above the power limit")]
    PowerLimit { user: usize, power: f64 },

    #[error("enumeration of {candidates} assignments exceeds the cap of {cap}")]
    EnumerationCap { candidates: u128, cap: u128 },

    #[error("index out of range: {0}")]
    Index(String),
}
