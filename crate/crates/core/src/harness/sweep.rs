//! Parameter sweeps over the three experiment axes.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ScenarioConfig, UniformRange};
use super::{mechanism_seed, sample_population};
use crate::error::{Error, Result};
use crate::game_core::{
    feasible_rate_box, induced_server_utility, induced_worker_utility, RewardRates,
};
use crate::mechanisms::{select_rates, MechanismKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// `gamma ~ U[v, v + 4]`.
    Gamma,
    /// `delta ~ U[v, v + 1]`.
    Delta,
    /// `n = v` with `gamma ~ U[3, 5]` and `delta ~ U[2, 4]`.
    Workers,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::Gamma => "gamma",
            SweepAxis::Delta => "delta",
            SweepAxis::Workers => "workers",
        }
    }

    pub fn default_values(&self) -> Vec<f64> {
        match self {
            SweepAxis::Gamma => (1..=6).map(f64::from).collect(),
            SweepAxis::Delta => (0..=5).map(f64::from).collect(),
            SweepAxis::Workers => (1..=6).map(|k| f64::from(5 * k)).collect(),
        }
    }

    /// The scenario for one axis value.
    pub fn apply(&self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut cfg = base.clone();
        match self {
            SweepAxis::Gamma => cfg.gamma_dist = UniformRange::new(value, value + 4.0)?,
            SweepAxis::Delta => cfg.delta_dist = UniformRange::new(value, value + 1.0)?,
            SweepAxis::Workers => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::config(format!(
                        "worker count must be a positive integer, got {value}"
                    )));
                }
                cfg.n = value as usize;
                cfg.gamma_dist = UniformRange::new(3.0, 5.0)?;
                cfg.delta_dist = UniformRange::new(2.0, 4.0)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma" => Ok(SweepAxis::Gamma),
            "delta" => Ok(SweepAxis::Delta),
            "workers" => Ok(SweepAxis::Workers),
            other => Err(Error::Parse(format!(
                "unknown axis `{other}` (expected gamma|delta|workers)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub mechanisms: Vec<MechanismKind>,
    pub base: ScenarioConfig,
}

impl SweepSpec {
    /// Default axis values, evaluating only the base config's mechanism.
    pub fn new(axis: SweepAxis, base: ScenarioConfig) -> Self {
        SweepSpec {
            axis,
            values: axis.default_values(),
            mechanisms: vec![base.mechanism],
            base,
        }
    }

    pub fn with_mechanisms(mut self, mechanisms: Vec<MechanismKind>) -> Self {
        self.mechanisms = mechanisms;
        self
    }
}

/// Per-cell summary over runs; standard deviations use the `runs - 1`
/// denominator and are zero for a single run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub mechanism: MechanismKind,
    pub r1_mean: f64,
    pub r1_std: f64,
    pub r2_mean: f64,
    pub r2_std: f64,
    pub worker_utility_mean: f64,
    pub worker_utility_std: f64,
    pub server_utility_mean: f64,
    pub server_utility_std: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub axis_value: f64,
    pub mechanism: MechanismKind,
    pub run_index: usize,
    pub rates: RewardRates,
    pub worker_utility: f64,
    pub server_utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub axis_value: f64,
    pub mechanism: Option<MechanismKind>,
    pub run_index: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub table: SweepTable,
    pub records: Vec<RunRecord>,
    pub failures: Vec<CellFailure>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One job: a population shared by every mechanism.
fn run_job(
    spec: &SweepSpec,
    cfg: &ScenarioConfig,
    value: f64,
    run_index: usize,
) -> (Vec<RunRecord>, Vec<CellFailure>) {
    let fail = |mechanism, e: Error| CellFailure {
        axis_value: value,
        mechanism,
        run_index,
        error: e.to_string(),
    };
    let setup = (|| {
        let profiles = sample_population(cfg, run_index)?;
        let rate_box = feasible_rate_box(&profiles, cfg.r2_cap)?;
        Ok::<_, Error>((profiles, rate_box, cfg.params()?))
    })();
    let (profiles, rate_box, params) = match setup {
        Ok(s) => s,
        Err(e) => return (Vec::new(), vec![fail(None, e)]),
    };
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for &mechanism in &spec.mechanisms {
        let result = (|| {
            let rates = select_rates(
                mechanism,
                &profiles,
                &params,
                &rate_box,
                mechanism_seed(cfg, run_index),
            )?;
            Ok::<_, Error>(RunRecord {
                axis_value: value,
                mechanism,
                run_index,
                rates,
                worker_utility: induced_worker_utility(&profiles, &params, &rates)?,
                server_utility: induced_server_utility(&profiles, &params, &rates)?,
            })
        })();
        match result {
            Ok(r) => records.push(r),
            Err(e) => failures.push(fail(Some(mechanism), e)),
        }
    }
    (records, failures)
}

/// Runs every (axis value, run) job in parallel and summarizes each
/// (axis value, mechanism) cell in input order. All mechanisms of a run see
/// the same population. Failed jobs are recorded and skipped; a cell with
/// no successful run produces no row.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome> {
    if spec.mechanisms.is_empty() {
        return Err(Error::config("sweep needs at least one mechanism"));
    }
    let configs = spec
        .values
        .iter()
        .map(|&v| spec.axis.apply(&spec.base, v))
        .collect::<Result<Vec<_>>>()?;
    let runs = spec.base.runs;
    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..runs).map(move |r| (c, r)))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(c, r)| run_job(spec, &configs[c], spec.values[c], r))
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (rec, fail) in results {
        records.extend(rec);
        failures.extend(fail);
    }

    let mut rows = Vec::new();
    for &value in &spec.values {
        for &mechanism in &spec.mechanisms {
            let cell: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.axis_value == value && r.mechanism == mechanism)
                .collect();
            if cell.is_empty() {
                continue;
            }
            let column =
                |f: fn(&RunRecord) -> f64| mean_std(&cell.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (r1_mean, r1_std) = column(|r| r.rates.r1());
            let (r2_mean, r2_std) = column(|r| r.rates.r2());
            let (worker_utility_mean, worker_utility_std) = column(|r| r.worker_utility);
            let (server_utility_mean, server_utility_std) = column(|r| r.server_utility);
            rows.push(SweepRow {
                axis_value: value,
                mechanism,
                r1_mean,
                r1_std,
                r2_mean,
                r2_std,
                worker_utility_mean,
                worker_utility_std,
                server_utility_mean,
                server_utility_std,
                runs: cell.len(),
            });
        }
    }
    Ok(SweepOutcome {
        table: SweepTable { rows },
        records,
        failures,
    })
}
