//! Scenario configuration files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fedsim::{RoundConfig, TrainOptions};
use crate::game_core::{SystemParams, DEFAULT_R2_CAP};
use crate::mechanisms::MechanismKind;

/// Uniform distribution on `[lo, hi]`, written `[lo, hi]` in config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct UniformRange {
    lo: f64,
    hi: f64,
}

impl UniformRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::config(format!(
                "bounds must be finite with lo <= hi, got [{lo}, {hi}]"
            )));
        }
        Ok(UniformRange { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Maps a unit draw `u` onto the range.
    pub fn at(&self, u: f64) -> f64 {
        self.lo + u * (self.hi - self.lo)
    }
}

impl TryFrom<[f64; 2]> for UniformRange {
    type Error = Error;
    fn try_from([lo, hi]: [f64; 2]) -> Result<Self> {
        UniformRange::new(lo, hi)
    }
}

impl From<UniformRange> for [f64; 2] {
    fn from(r: UniformRange) -> Self {
        [r.lo, r.hi]
    }
}

/// One experimental scenario. Every key has a default; unknown keys are
/// rejected.
///
/// `tmin_dist = [1, 3]` and `comm_size = 0.1` are artifact defaults with no
/// published counterpart. The keys after `rounds` only affect `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub comm_size: f64,
    pub gamma_dist: UniformRange,
    pub delta_dist: UniformRange,
    pub tmin_dist: UniformRange,
    pub r2_cap: f64,
    pub mechanism: MechanismKind,
    pub runs: usize,
    pub seed: u64,
    pub rounds: usize,

    pub dim: usize,
    pub samples_per_round: usize,
    pub collection_interval: f64,
    pub collection_latency: f64,
    pub initial_data_age: f64,
    pub label_noise: f64,
    pub heterogeneity: f64,
    pub completion_jitter: f64,
    pub iteration_budget: f64,
    pub exact_stop: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let sim = RoundConfig::default();
        ScenarioConfig {
            n: 10,
            alpha: 80.0,
            beta: 50.0,
            comm_size: 0.1,
            gamma_dist: UniformRange { lo: 1.0, hi: 5.0 },
            delta_dist: UniformRange { lo: 1.0, hi: 2.0 },
            tmin_dist: UniformRange { lo: 1.0, hi: 3.0 },
            r2_cap: DEFAULT_R2_CAP,
            mechanism: MechanismKind::IFedCrowd,
            runs: 10,
            seed: 0,
            rounds: 1,
            dim: sim.dim,
            samples_per_round: sim.samples_per_round,
            collection_interval: sim.collection_interval,
            collection_latency: sim.collection_latency,
            initial_data_age: sim.initial_data_age,
            label_noise: sim.label_noise,
            heterogeneity: sim.heterogeneity,
            completion_jitter: sim.completion_jitter,
            iteration_budget: sim.train.iteration_budget,
            exact_stop: sim.train.exact_stop,
        }
    }
}

fn nonneg_dist(name: &str, d: &UniformRange) -> Result<()> {
    if d.lo < 0.0 || !(d.hi > 0.0) {
        return Err(Error::config(format!(
            "{name} must lie in [0, inf) with hi > 0, got [{}, {}]",
            d.lo, d.hi
        )));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        // Draws come from the open unit interval, so a zero lower bound
        // still yields positive parameters.
        nonneg_dist("gamma_dist", &self.gamma_dist)?;
        nonneg_dist("delta_dist", &self.delta_dist)?;
        nonneg_dist("tmin_dist", &self.tmin_dist)?;
        if !(self.r2_cap > self.delta_dist.hi) {
            return Err(Error::config(format!(
                "r2_cap {} must exceed the largest possible delta {}",
                self.r2_cap, self.delta_dist.hi
            )));
        }
        if self.runs == 0 {
            return Err(Error::config("runs must be at least 1"));
        }
        if self.dim == 0 || self.samples_per_round == 0 {
            return Err(Error::config("dim and samples_per_round must be positive"));
        }
        let positive = [
            ("collection_interval", self.collection_interval),
            ("initial_data_age", self.initial_data_age),
            ("iteration_budget", self.iteration_budget),
        ];
        let nonneg = [
            ("collection_latency", self.collection_latency),
            ("label_noise", self.label_noise),
            ("heterogeneity", self.heterogeneity),
            ("completion_jitter", self.completion_jitter),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Result<SystemParams> {
        SystemParams::new(self.alpha, self.beta, self.comm_size, self.n)
            .map_err(|e| Error::config(e.to_string()))
    }

    pub fn round_config(&self) -> RoundConfig {
        RoundConfig {
            dim: self.dim,
            samples_per_round: self.samples_per_round,
            collection_interval: self.collection_interval,
            collection_latency: self.collection_latency,
            initial_data_age: self.initial_data_age,
            label_noise: self.label_noise,
            heterogeneity: self.heterogeneity,
            completion_jitter: self.completion_jitter,
            train: TrainOptions {
                iteration_budget: self.iteration_budget,
                exact_stop: self.exact_stop,
            },
            r2_cap: self.r2_cap,
        }
    }
}
