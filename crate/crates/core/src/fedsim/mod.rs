//! Round-based simulation of federated crowdsourcing under announced
//! reward rates.
//!
//! Each round the server announces rates, every client picks its best
//! response, collects data so its freshness at upload matches the chosen
//! target, trains toward the chosen accuracy level from the current global
//! model, and uploads. The server aggregates the uploads and pays each
//! client on what it actually achieved.

mod data;
mod train;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use data::{
    collect_data, ClientDataset, Collection, CollectionPlan, CollectionState, Sample, SyntheticTask,
};
pub use train::{aggregate, local_train, ModelParams, TrainOptions, TrainOutcome};

use crate::error::{Error, Result};
use crate::game_core::{
    best_response, client_reward, client_utility, feasible_rate_box, server_utility, ClientProfile,
    RewardRates, Strategy, SystemParams,
};
use crate::mechanisms::{select_rates, MechanismKind};
use crate::seed;

/// Knobs of the simulated environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundConfig {
    /// Model dimension.
    pub dim: usize,
    pub samples_per_round: usize,
    pub collection_interval: f64,
    pub collection_latency: f64,
    /// Age of the initial local data at time zero.
    pub initial_data_age: f64,
    /// Label noise standard deviation of the regression task.
    pub label_noise: f64,
    /// Spread of client-specific true weights around the shared ones.
    pub heterogeneity: f64,
    /// Completion time is `t_min + jitter * U(0, 1)`.
    pub completion_jitter: f64,
    pub train: TrainOptions,
    pub r2_cap: f64,
}

impl Default for RoundConfig {
    fn default() -> Self {
        RoundConfig {
            dim: 10,
            samples_per_round: 100,
            collection_interval: 0.01,
            collection_latency: 0.0,
            initial_data_age: 100.0,
            label_noise: 0.1,
            heterogeneity: 0.5,
            completion_jitter: 0.0,
            train: TrainOptions::default(),
            r2_cap: crate::game_core::DEFAULT_R2_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientRecord {
    pub client_id: usize,
    pub target: Strategy,
    pub accuracy_clamped: bool,
    pub freshness_clamped: bool,
    /// `None` when the client failed this round.
    pub achieved: Option<Strategy>,
    pub payout: f64,
    pub utility: Option<f64>,
    pub iterations: usize,
    pub hit_target: bool,
    pub freshness_shortfall: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round_index: usize,
    pub start_time: f64,
    /// Slowest completion time among clients that finished.
    pub duration: f64,
    pub rates: RewardRates,
    pub clients: Vec<ClientRecord>,
    /// Leader utility on the achieved strategies of finishing clients.
    pub realized_server_utility: Option<f64>,
    /// Leader utility had every client played its target exactly.
    pub predicted_server_utility: f64,
    pub global_model: ModelParams,
}

impl RoundReport {
    /// Recomputes the leader utility from this report's own records.
    pub fn recompute_server_utility(&self, params: &SystemParams) -> Result<Option<f64>> {
        let achieved: Vec<Strategy> = self.clients.iter().filter_map(|c| c.achieved).collect();
        if achieved.is_empty() {
            return Ok(None);
        }
        server_utility(&params.with_n(achieved.len()), &self.rates, &achieved).map(Some)
    }
}

struct ClientState {
    task: SyntheticTask,
    dataset: ClientDataset,
    collection: CollectionState,
    rng: ChaCha8Rng,
}

struct Outcome {
    achieved: Strategy,
    model: ModelParams,
    iterations: usize,
    hit_target: bool,
    shortfall: bool,
}

/// A running simulation for one population.
pub struct Simulation {
    profiles: Vec<ClientProfile>,
    params: SystemParams,
    rates: RewardRates,
    config: RoundConfig,
    clients: Vec<ClientState>,
    global: ModelParams,
    clock: f64,
    round: usize,
}

impl Simulation {
    /// Fixes the reward rates with `mechanism` and prepares each client's
    /// task and initial data. All randomness derives from `seed`.
    pub fn new(
        profiles: Vec<ClientProfile>,
        params: SystemParams,
        mechanism: MechanismKind,
        config: RoundConfig,
        seed: u64,
    ) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::domain("simulation needs at least one client"));
        }
        if profiles.len() != params.n {
            return Err(Error::domain(format!(
                "{} clients but params.n is {}",
                profiles.len(),
                params.n
            )));
        }
        if config.dim == 0 || config.samples_per_round == 0 {
            return Err(Error::config("dim and samples_per_round must be positive"));
        }
        if !(config.collection_interval > 0.0)
            || !(config.collection_latency >= 0.0)
            || !(config.initial_data_age > 0.0)
        {
            return Err(Error::config(
                "collection interval and initial data age must be positive, latency non-negative",
            ));
        }
        let rate_box = feasible_rate_box(&profiles, config.r2_cap)?;
        let rates = select_rates(mechanism, &profiles, &params, &rate_box, seed)?;

        let mut task_rng = seed::stream(seed, &[seed::TASK]);
        let shared: Vec<f64> = (0..config.dim)
            .map(|_| task_rng.sample(StandardNormal))
            .collect();
        let clients = profiles
            .iter()
            .map(|p| {
                let mut rng = seed::stream(seed, &[seed::CLIENT, p.id() as u64]);
                let weights = shared
                    .iter()
                    .map(|w| w + config.heterogeneity * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let task = SyntheticTask {
                    weights,
                    noise: config.label_noise,
                };
                let end = -config.initial_data_age;
                let initial: Vec<Sample> = (0..config.samples_per_round)
                    .rev()
                    .map(|j| task.sample(&mut rng, end - j as f64 * config.collection_interval))
                    .collect();
                let mut dataset = ClientDataset::new();
                dataset.extend(initial)?;
                Ok(ClientState {
                    task,
                    dataset,
                    collection: CollectionState {
                        last_generation_time: end,
                        collection_interval: config.collection_interval,
                    },
                    rng,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Simulation {
            global: ModelParams::zeros(config.dim),
            profiles,
            params,
            rates,
            config,
            clients,
            clock: 0.0,
            round: 0,
        })
    }

    pub fn rates(&self) -> RewardRates {
        self.rates
    }

    pub fn global_model(&self) -> &ModelParams {
        &self.global
    }

    fn step_client(
        profile: &ClientProfile,
        state: &mut ClientState,
        target: &Strategy,
        global: &ModelParams,
        start: f64,
        config: &RoundConfig,
    ) -> Result<Outcome> {
        let jitter: f64 = state.rng.random();
        let completion = profile.t_min() + config.completion_jitter * jitter;
        let upload = start + completion;
        let plan = CollectionPlan {
            batch_size: config.samples_per_round,
            latency: config.collection_latency,
        };
        let collected = collect_data(
            &state.collection,
            target,
            upload,
            &state.task,
            &plan,
            &mut state.rng,
        )?;
        state.dataset.extend(collected.samples)?;
        state.collection = collected.state;
        let trained = local_train(
            profile.id(),
            global,
            &state.dataset,
            target.accuracy(),
            profile.gamma(),
            &config.train,
        )?;
        Ok(Outcome {
            achieved: Strategy::new(
                trained.achieved_accuracy,
                collected.achieved_freshness,
                completion,
            )?,
            model: trained.model,
            iterations: trained.iterations,
            hit_target: trained.hit_target,
            shortfall: collected.shortfall,
        })
    }

    /// Runs one round. Client failures are recorded in the report and the
    /// round completes with the remaining clients.
    pub fn run_round(&mut self) -> Result<RoundReport> {
        let start = self.clock;
        let rates = self.rates;
        let responses: Vec<_> = self
            .profiles
            .iter()
            .map(|p| best_response(p, &rates))
            .collect();
        let targets: Vec<Strategy> = responses.iter().map(|r| r.strategy).collect();

        let global = &self.global;
        let config = &self.config;
        let outcomes: Vec<Result<Outcome>> = self
            .profiles
            .par_iter()
            .zip(self.clients.par_iter_mut())
            .zip(targets.par_iter())
            .map(|((p, state), target)| Self::step_client(p, state, target, global, start, config))
            .collect();

        let mut records = Vec::with_capacity(outcomes.len());
        let mut models = Vec::new();
        let mut weights = Vec::new();
        let mut achieved_all = Vec::new();
        for (((p, state), br), outcome) in self
            .profiles
            .iter()
            .zip(&self.clients)
            .zip(&responses)
            .zip(outcomes)
        {
            let mut record = ClientRecord {
                client_id: p.id(),
                target: br.strategy,
                accuracy_clamped: br.accuracy_clamped,
                freshness_clamped: br.freshness_clamped,
                achieved: None,
                payout: 0.0,
                utility: None,
                iterations: 0,
                hit_target: false,
                freshness_shortfall: false,
                failure: None,
            };
            match outcome {
                Ok(o) => {
                    record.payout = client_reward(&rates, &o.achieved);
                    record.utility = Some(client_utility(
                        p,
                        &rates,
                        &o.achieved,
                        self.params.comm_size,
                    )?);
                    record.achieved = Some(o.achieved);
                    record.iterations = o.iterations;
                    record.hit_target = o.hit_target;
                    record.freshness_shortfall = o.shortfall;
                    achieved_all.push(o.achieved);
                    models.push(o.model);
                    weights.push(state.dataset.size() as f64);
                }
                Err(e) => record.failure = Some(e.to_string()),
            }
            records.push(record);
        }

        if !models.is_empty() {
            self.global = aggregate(&models, &weights)?;
        }
        let realized = if achieved_all.is_empty() {
            None
        } else {
            Some(server_utility(
                &self.params.with_n(achieved_all.len()),
                &rates,
                &achieved_all,
            )?)
        };
        let duration = achieved_all
            .iter()
            .map(Strategy::completion_time)
            .fold(0.0, f64::max);
        let report = RoundReport {
            round_index: self.round,
            start_time: start,
            duration,
            rates,
            clients: records,
            realized_server_utility: realized,
            predicted_server_utility: server_utility(&self.params, &rates, &targets)?,
            global_model: self.global.clone(),
        };
        self.clock = start + duration;
        self.round += 1;
        Ok(report)
    }

    pub fn run(&mut self, rounds: usize) -> Result<Vec<RoundReport>> {
        (0..rounds).map(|_| self.run_round()).collect()
    }
}
