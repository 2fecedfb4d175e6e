//! Non-cooperative power and carrier control for multicarrier CDMA.
//!
//! Each user picks one carrier and a transmit power to maximise bits delivered
//! per joule. The crate provides the efficiency model, SINR for three linear
//! receivers, the best-response game and its iterative algorithm, an
//! equilibrium oracle, and a deterministic Monte Carlo driver.
//!
//! ```
//! use mcpc::{Game, SystemConfig};
//!
//! let game = Game::new(SystemConfig::default()).unwrap();
//! assert!((game.gamma_star() - 6.4746).abs() < 1e-3);
//! ```

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equilibrium;
pub mod error;
pub mod game;
mod linalg;
pub mod model;
pub mod montecarlo;
pub mod receivers;

pub use equilibrium::{
    analytic_pmf_2x2, binomial_limit_pmf, check_equilibrium, classify_2x2, enumerate_equilibria,
    equilibrium_powers, theta, AnalyticPmf2x2, Region2x2, ThetaTable, Verdict,
};
pub use error::{Error, Result};
pub use game::{BmpOptions, BmpOutcome, BmpStatus, CarrierAssignment, Game};
pub use model::{
    efficiency, efficiency_derivative, sample_channel, solve_gamma_star, ChannelMode, ChannelRealization,
    EfficiencyModel, SystemConfig,
};
pub use receivers::{
    compute_sinr, effective_gain, required_power, PowerProfile, ReceiverKind, RequiredPower,
};

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/efficiency.md")]
    mod efficiency {}
    #[doc = include_str!("../../../book/src/receivers.md")]
    mod receivers {}
    #[doc = include_str!("../../../book/src/game.md")]
    mod game {}
    #[doc = include_str!("../../../book/src/equilibria.md")]
    mod equilibria {}
    #[doc = include_str!("../../../book/src/monte-carlo.md")]
    mod monte_carlo {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
