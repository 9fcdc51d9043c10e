//! Incentive mechanism for federated crowdsourcing.
//!
//! A task publisher (the leader) announces two reward rates: `r1` pays for
//! local accuracy per unit of completion time, `r2` pays for data freshness.
//! Each worker (a follower) answers with the accuracy, freshness and
//! completion time that maximize its own utility. The crate provides
//!
//! - [`game_core`]: reward, cost, utility and closed-form best responses,
//! - [`equilibrium`]: the leader's optimal rates and Nash-equilibrium checks,
//! - [`mechanisms`]: the equilibrium policy next to the Random and MAX baselines,
//! - [`fedsim`]: a round-based federated training simulation with
//!   age-of-information dynamics and reward settlement,
//! - [`harness`]: scenario configuration, population sampling and sweeps.

// Negated comparisons below deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equilibrium;
pub mod error;
pub mod fedsim;
pub mod game_core;
pub mod harness;
pub mod mechanisms;
pub(crate) mod seed;

pub use equilibrium::{compute_equilibrium, EquilibriumResult, ResponseModel};
pub use error::{Error, Result};
pub use game_core::{
    best_response, client_reward, client_utility, feasible_rate_box, server_utility, BestResponse,
    ClientProfile, CostBreakdown, RateBox, RewardRates, Strategy, SystemParams,
};
pub use harness::{ScenarioConfig, SweepAxis, SweepSpec};
pub use mechanisms::{select_rates, MechanismKind};
