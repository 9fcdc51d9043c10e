//! Local training on a client's regression task and FedAvg aggregation.

use serde::{Deserialize, Serialize};

use super::data::ClientDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub weights: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(dim: usize) -> Self {
        ModelParams {
            weights: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    /// Iterations allowed per unit of `(1 + A) ln(1 + A)` computation cost.
    pub iteration_budget: f64,
    /// Shorten the final step so the loss lands on the target instead of
    /// overshooting it.
    pub exact_stop: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            iteration_budget: 1000.0,
            exact_stop: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: ModelParams,
    /// Relative loss reduction `1 - loss / initial_loss`.
    pub achieved_accuracy: f64,
    pub iterations: usize,
    pub hit_target: bool,
}

const DIVERGENCE_STREAK: usize = 10;

struct Quadratic<'a> {
    data: &'a ClientDataset,
    inv_n: f64,
}

impl Quadratic<'_> {
    fn residuals(&self, theta: &[f64]) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        let theta = theta.to_vec();
        self.data.samples().iter().map(move |s| {
            let pred: f64 = s.features.iter().zip(&theta).map(|(x, w)| x * w).sum();
            (pred - s.label, s.features.as_slice())
        })
    }

    fn loss(&self, theta: &[f64]) -> f64 {
        0.5 * self.inv_n * self.residuals(theta).map(|(r, _)| r * r).sum::<f64>()
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; theta.len()];
        for (r, x) in self.residuals(theta) {
            for (gi, xi) in g.iter_mut().zip(x) {
                *gi += r * xi;
            }
        }
        g.iter_mut().for_each(|gi| *gi *= self.inv_n);
        g
    }

    /// `g' H g` for the constant Hessian `X'X / N`.
    fn curvature_along(&self, g: &[f64]) -> f64 {
        self.inv_n
            * self
                .data
                .samples()
                .iter()
                .map(|s| {
                    let xg: f64 = s.features.iter().zip(g).map(|(x, d)| x * d).sum();
                    xg * xg
                })
                .sum::<f64>()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gradient descent with exact line search on the mean squared error,
/// started from `model`, until the relative loss reduction reaches
/// `target_accuracy` or the iteration cap
/// `ceil(iteration_scale (1 + A) ln(1 + A) budget)` runs out.
pub fn local_train(
    client: usize,
    model: &ModelParams,
    dataset: &ClientDataset,
    target_accuracy: f64,
    iteration_scale: f64,
    opts: &TrainOptions,
) -> Result<TrainOutcome> {
    let fail = |detail: String| Error::Training { client, detail };
    if !(target_accuracy > 0.0 && target_accuracy < 1.0) {
        return Err(Error::domain(format!(
            "target accuracy must lie in (0, 1), got {target_accuracy}"
        )));
    }
    if dataset.is_empty() {
        return Err(fail("empty dataset".into()));
    }
    if let Some(bad) = dataset
        .samples()
        .iter()
        .find(|s| s.features.len() != model.dim())
    {
        return Err(fail(format!(
            "sample dimension {} != model dimension {}",
            bad.features.len(),
            model.dim()
        )));
    }

    let q = Quadratic {
        data: dataset,
        inv_n: 1.0 / dataset.size() as f64,
    };
    let mut theta = model.weights.clone();
    let initial = q.loss(&theta);
    if !(initial.is_finite() && initial > 0.0) {
        return Err(fail(format!(
            "initial loss {initial} leaves accuracy undefined"
        )));
    }
    let target_loss = (1.0 - target_accuracy) * initial;
    // Aim a hair below the target so rounding cannot leave us just short.
    let aim = target_loss * (1.0 - 1e-12);
    let cost = (1.0 + target_accuracy) * target_accuracy.ln_1p();
    let cap = (iteration_scale * cost * opts.iteration_budget)
        .ceil()
        .max(1.0) as usize;

    let mut current = initial;
    let mut iterations = 0;
    let mut rising = 0;
    while iterations < cap && current > target_loss {
        let g = q.gradient(&theta);
        let gg = dot(&g, &g);
        let ghg = q.curvature_along(&g);
        if !(gg > 0.0 && ghg > 0.0) {
            break;
        }
        let mut step = gg / ghg;
        if opts.exact_stop && current - 0.5 * gg * step < aim {
            // current - s gg + s^2 ghg / 2 = aim, smaller root.
            let disc = (gg * gg - 2.0 * ghg * (current - aim)).max(0.0);
            step = (gg - disc.sqrt()) / ghg;
        }
        theta.iter_mut().zip(&g).for_each(|(w, d)| *w -= step * d);
        iterations += 1;
        let next = q.loss(&theta);
        if !next.is_finite() {
            return Err(fail(format!(
                "loss became {next} at iteration {iterations}"
            )));
        }
        rising = if next > current { rising + 1 } else { 0 };
        if rising >= DIVERGENCE_STREAK {
            return Err(fail(format!(
                "loss rose for {DIVERGENCE_STREAK} consecutive steps (initial {initial}, now {next})"
            )));
        }
        current = next;
    }
    let achieved = (1.0 - current / initial).clamp(0.0, 1.0 - f64::EPSILON);
    Ok(TrainOutcome {
        model: ModelParams { weights: theta },
        achieved_accuracy: achieved,
        iterations,
        hit_target: current <= target_loss,
    })
}

/// Weighted mean of client models, weights normalized to sum to one.
pub fn aggregate(models: &[ModelParams], weights: &[f64]) -> Result<ModelParams> {
    let first = models
        .first()
        .ok_or_else(|| Error::domain("nothing to aggregate"))?;
    if models.len() != weights.len() {
        return Err(Error::domain(format!(
            "{} models but {} weights",
            models.len(),
            weights.len()
        )));
    }
    if let Some(m) = models.iter().find(|m| m.dim() != first.dim()) {
        return Err(Error::domain(format!(
            "dimension mismatch: {} vs {}",
            m.dim(),
            first.dim()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::domain(
            "aggregation weights must be finite and non-negative",
        ));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::domain("aggregation weights sum to zero"));
    }
    let mut out = vec![0.0; first.dim()];
    for (m, w) in models.iter().zip(weights) {
        let share = w / total;
        out.iter_mut()
            .zip(&m.weights)
            .for_each(|(o, x)| *o += share * x);
    }
    Ok(ModelParams { weights: out })
}
