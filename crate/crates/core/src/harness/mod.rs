//! Experiment plumbing: scenario files, seeded populations, sweeps,
//! verification runs and table output.

mod config;
mod emit;
mod sweep;

use rand::Rng;
use rand_distr::Open01;
use serde::{Deserialize, Serialize};

pub use config::{ScenarioConfig, UniformRange};
pub use emit::{
    emit, format_sig, read_csv, read_json, round_sig, write_csv, write_json, OutputFormat,
};
pub use sweep::{
    run_sweep, CellFailure, RunRecord, SweepAxis, SweepOutcome, SweepRow, SweepSpec, SweepTable,
};

use crate::equilibrium::{
    compute_equilibrium, verify_client_equilibrium, verify_server_equilibrium, ClientCheck,
    GridSpec, ServerCheck,
};
use crate::error::Result;
use crate::fedsim::Simulation;
use crate::game_core::{feasible_rate_box, ClientProfile, RewardRates};
use crate::mechanisms::select_rates;
use crate::seed;

/// Draws the population of run `run_index`.
///
/// Worker `k` gets its own stream keyed by `(seed, run_index, k)` and maps
/// three unit draws onto the configured ranges. Populations therefore share
/// their prefix across worker counts, and shifting a range moves every
/// worker by exactly the shift.
pub fn sample_population(config: &ScenarioConfig, run_index: usize) -> Result<Vec<ClientProfile>> {
    (0..config.n)
        .map(|k| {
            let mut rng =
                seed::stream(config.seed, &[seed::POPULATION, run_index as u64, k as u64]);
            let u: [f64; 3] = [rng.sample(Open01), rng.sample(Open01), rng.sample(Open01)];
            ClientProfile::new(
                k,
                config.gamma_dist.at(u[0]),
                config.delta_dist.at(u[1]),
                config.tmin_dist.at(u[2]),
            )
        })
        .collect()
}

/// Seed handed to the mechanism for run `run_index`.
pub fn mechanism_seed(config: &ScenarioConfig, run_index: usize) -> u64 {
    seed::derive(config.seed, &[seed::MECHANISM, run_index as u64])
}

/// Equilibrium checks for one sampled population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub run_index: usize,
    pub rates: RewardRates,
    pub clients: Vec<ClientCheck>,
    pub server: ServerCheck,
}

impl VerificationReport {
    pub fn violations(&self) -> usize {
        self.clients.iter().map(|c| c.violations).sum::<usize>() + self.server.violations()
    }
}

/// Computes the equilibrium of every run's population and checks both
/// sides for profitable deviations.
pub fn verify_scenario(
    config: &ScenarioConfig,
    grid: &GridSpec,
) -> Result<Vec<VerificationReport>> {
    config.validate()?;
    let params = config.params()?;
    (0..config.runs)
        .map(|run_index| {
            let profiles = sample_population(config, run_index)?;
            let rate_box = feasible_rate_box(&profiles, config.r2_cap)?;
            let eq = compute_equilibrium(&profiles, &params, &rate_box)?;
            let clients = profiles
                .iter()
                .map(|p| verify_client_equilibrium(p, &eq.rates, grid, params.comm_size))
                .collect::<Result<Vec<_>>>()?;
            let server = verify_server_equilibrium(&profiles, &params, &eq.rates, &rate_box, grid)?;
            Ok(VerificationReport {
                run_index,
                rates: eq.rates,
                clients,
                server,
            })
        })
        .collect()
}

/// Simulation of run `run_index`'s population under the configured mechanism.
pub fn build_simulation(config: &ScenarioConfig, run_index: usize) -> Result<Simulation> {
    config.validate()?;
    let profiles = sample_population(config, run_index)?;
    Simulation::new(
        profiles,
        config.params()?,
        config.mechanism,
        config.round_config(),
        mechanism_seed(config, run_index),
    )
}

/// Rates the configured mechanism announces for run `run_index`.
pub fn scenario_rates(config: &ScenarioConfig, run_index: usize) -> Result<RewardRates> {
    let profiles = sample_population(config, run_index)?;
    let rate_box = feasible_rate_box(&profiles, config.r2_cap)?;
    select_rates(
        config.mechanism,
        &profiles,
        &config.params()?,
        &rate_box,
        mechanism_seed(config, run_index),
    )
}
