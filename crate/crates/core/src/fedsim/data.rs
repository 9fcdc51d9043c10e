//! Synthetic client data and freshness-driven collection scheduling.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game_core::{freshness, Strategy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: f64,
    pub generated_at: f64,
}

/// A client's local samples, ordered by generation time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClientDataset {
    samples: Vec<Sample>,
}

impl ClientDataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn size(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last_generated(&self) -> Option<f64> {
        self.samples.last().map(|s| s.generated_at)
    }

    /// Appends samples; timestamps must not go backwards.
    pub fn extend(&mut self, batch: Vec<Sample>) -> Result<()> {
        let mut last = self.last_generated().unwrap_or(f64::NEG_INFINITY);
        for s in &batch {
            if s.generated_at < last {
                return Err(Error::domain(format!(
                    "sample generated at {} precedes existing sample at {last}",
                    s.generated_at
                )));
            }
            last = s.generated_at;
        }
        self.samples.extend(batch);
        Ok(())
    }
}

/// Linear regression task `y = w . x + noise` with standard normal features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub weights: Vec<f64>,
    pub noise: f64,
}

impl SyntheticTask {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, generated_at: f64) -> Sample {
        let features: Vec<f64> = (0..self.weights.len())
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let clean: f64 = features.iter().zip(&self.weights).map(|(x, w)| x * w).sum();
        let eps: f64 = rng.sample(StandardNormal);
        Sample {
            features,
            label: clean + self.noise * eps,
            generated_at,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectionState {
    /// Generation time of the most recent sample.
    pub last_generation_time: f64,
    /// Spacing between consecutive samples of one batch.
    pub collection_interval: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectionPlan {
    pub batch_size: usize,
    /// Minimum gap between the last sample and the upload.
    pub latency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Collection {
    pub samples: Vec<Sample>,
    pub state: CollectionState,
    /// Freshness at upload time.
    pub achieved_freshness: f64,
    /// The latency made the target freshness unreachable.
    pub shortfall: bool,
}

/// Schedules this round's data collection so the data is exactly as fresh
/// as `strategy` asks at `upload_time`.
///
/// The last sample is generated at `upload_time - 1 / F`; earlier samples
/// of the batch precede it at the collection interval. When `1 / F` is
/// shorter than the latency the last sample lands at `upload_time -
/// latency` and the round is flagged as a shortfall. A target of `F = 0`
/// collects nothing new. If the target generation time is not after the
/// newest existing sample, nothing new is collected either and freshness
/// comes from the existing data.
pub fn collect_data<R: Rng + ?Sized>(
    state: &CollectionState,
    strategy: &Strategy,
    upload_time: f64,
    task: &SyntheticTask,
    plan: &CollectionPlan,
    rng: &mut R,
) -> Result<Collection> {
    let prev = state.last_generation_time;
    if !(upload_time > prev) {
        return Err(Error::domain(format!(
            "upload at {upload_time} does not follow the last sample at {prev}"
        )));
    }
    let target = strategy.freshness();
    let (goal, shortfall) = if target > 0.0 {
        let age = 1.0 / target;
        if age < plan.latency {
            (Some(upload_time - plan.latency), true)
        } else {
            (Some(upload_time - age), false)
        }
    } else {
        (None, false)
    };

    let mut samples = Vec::new();
    let mut last = prev;
    if let Some(g) = goal.filter(|g| *g > prev) {
        let mut times: Vec<f64> = (0..plan.batch_size.max(1))
            .map(|j| g - j as f64 * state.collection_interval)
            .take_while(|t| *t > prev)
            .collect();
        times.reverse();
        samples = times.into_iter().map(|t| task.sample(rng, t)).collect();
        last = g;
    }
    Ok(Collection {
        samples,
        state: CollectionState {
            last_generation_time: last,
            ..*state
        },
        achieved_freshness: freshness(upload_time, last)?,
        shortfall,
    })
}
