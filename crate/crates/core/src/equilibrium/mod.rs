//! The leader's optimal reward rates and equilibrium certification.
//!
//! Accuracy responses depend only on `r1` and freshness responses only on
//! `r2`, so with every worker finishing at `t_min` the induced leader
//! utility splits into `U(r1, r2) = U_acc(r1) + U_fresh(r2) - max t_min`.
//! Each leg is maximized on its own interval of the rate box.

mod solver;
mod verify;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game_core::{
    best_response, clamp_accuracy, clamp_freshness, client_utility, interior_accuracy,
    interior_freshness, server_utility, ClientProfile, RateBox, RewardRates, Strategy,
    SystemParams, A_MAX, A_MIN, F_MAX,
};

pub use solver::{
    bisect, maximize, newton_bisect, RateObjective, RateSolution, SLOPE_TOL, WIDTH_TOL,
};
pub use verify::{
    verify_client_equilibrium, verify_client_strategy, verify_server_equilibrium, ClientCheck,
    GridSpec, RateCheck, ServerCheck, VIOLATION_TOL,
};

/// How workers' responses enter the leader objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ResponseModel {
    /// Closed-form stationary responses without clamping. Smooth in the
    /// rates, but accuracy can leave `(0, 1)` and freshness can go negative.
    Interior,
    /// The responses workers actually play: accuracy clamped to
    /// `[A_MIN, A_MAX]`, freshness to `[0, F_MAX]`.
    #[default]
    Clamped,
}

fn check_population(profiles: &[ClientProfile], params: &SystemParams) -> Result<()> {
    params.validate()?;
    if profiles.is_empty() {
        return Err(Error::domain("empty population"));
    }
    if profiles.len() != params.n {
        return Err(Error::domain(format!(
            "population has {} workers but params.n is {}",
            profiles.len(),
            params.n
        )));
    }
    Ok(())
}

fn slowest(profiles: &[ClientProfile]) -> f64 {
    profiles
        .iter()
        .map(ClientProfile::t_min)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// First derivative in `r1` of the leader utility under interior responses.
pub fn du_dr1(profiles: &[ClientProfile], params: &SystemParams, r1: f64) -> f64 {
    let value_weight = params.alpha / params.n as f64;
    profiles
        .iter()
        .map(|p| {
            let scale = p.cost_time_scale();
            let e = (r1 / scale - 1.0).exp();
            let a = e - 1.0;
            let da = e / scale;
            value_weight * da - (r1 * da + a) / p.t_min()
        })
        .sum()
}

/// First derivative in `r2` of the leader utility under interior responses.
pub fn du_dr2(profiles: &[ClientProfile], params: &SystemParams, r2: f64) -> f64 {
    let n = params.n as f64;
    profiles
        .iter()
        .map(|p| {
            let d = p.delta();
            params.beta / (n * d * r2) - 1.0 / d - (r2 / d).ln() / d
        })
        .sum()
}

/// Second derivative in `r1` of the leader utility under interior responses.
///
/// Per worker this is `e^(r1/c - 1) [ (alpha/n - r1/t) / c^2 - 2 / (c t) ]`
/// with `c = gamma t_min`. The valuation term enters with a positive sign,
/// so the expression is not negative everywhere: it turns positive when
/// `alpha t_min / n > r1 + 2 gamma t_min`.
pub fn d2u_dr1(profiles: &[ClientProfile], params: &SystemParams, r1: f64) -> f64 {
    let value_weight = params.alpha / params.n as f64;
    profiles
        .iter()
        .map(|p| {
            let scale = p.cost_time_scale();
            let t = p.t_min();
            let e = (r1 / scale - 1.0).exp();
            e * ((value_weight - r1 / t) / (scale * scale) - 2.0 / (scale * t))
        })
        .sum()
}

/// Second derivative in `r2` of the leader utility under interior
/// responses; negative for every positive `r2`.
pub fn d2u_dr2(profiles: &[ClientProfile], params: &SystemParams, r2: f64) -> f64 {
    let n = params.n as f64;
    profiles
        .iter()
        .map(|p| {
            let d = p.delta();
            -1.0 / (d * r2) - params.beta / (n * d * r2 * r2)
        })
        .sum()
}

/// Leader utility at `rates` when workers play `model` responses.
///
/// For [`ResponseModel::Clamped`] this equals [`server_utility`] evaluated
/// on the best responses.
pub fn leader_utility(
    profiles: &[ClientProfile],
    params: &SystemParams,
    rates: &RewardRates,
    model: ResponseModel,
) -> Result<f64> {
    check_population(profiles, params)?;
    match model {
        ResponseModel::Clamped => {
            let strategies: Vec<Strategy> = profiles
                .iter()
                .map(|p| best_response(p, rates).strategy)
                .collect();
            server_utility(params, rates, &strategies)
        }
        ResponseModel::Interior => {
            let n = params.n as f64;
            let mut benefit = 0.0;
            let mut payment = 0.0;
            for p in profiles {
                let a = interior_accuracy(p, rates.r1());
                let f = interior_freshness(p, rates.r2());
                benefit += params.alpha * a + params.beta * f;
                payment += rates.r1() * a / p.t_min() + rates.r2() * f;
            }
            Ok(benefit / n - slowest(profiles) - payment)
        }
    }
}

#[derive(Clone, Copy)]
enum Clamp {
    Low,
    Free,
    High,
}

fn classify(v: f64, lo: f64, hi: f64) -> Clamp {
    if v < lo {
        Clamp::Low
    } else if v > hi {
        Clamp::High
    } else {
        Clamp::Free
    }
}

/// The `r1` leg: `sum_k (alpha/n) A_k - r1 A_k / t_k`.
pub struct AccuracyLeg<'a> {
    pub profiles: &'a [ClientProfile],
    pub params: &'a SystemParams,
    pub model: ResponseModel,
}

impl AccuracyLeg<'_> {
    fn state(&self, p: &ClientProfile, probe: f64) -> Clamp {
        match self.model {
            ResponseModel::Interior => Clamp::Free,
            ResponseModel::Clamped => classify(interior_accuracy(p, probe), A_MIN, A_MAX),
        }
    }
}

impl RateObjective for AccuracyLeg<'_> {
    fn breakpoints(&self) -> Vec<f64> {
        match self.model {
            ResponseModel::Interior => Vec::new(),
            ResponseModel::Clamped => self
                .profiles
                .iter()
                .flat_map(|p| {
                    let c = p.cost_time_scale();
                    [c * (1.0 + A_MIN.ln_1p()), c * (1.0 + A_MAX.ln_1p())]
                })
                .collect(),
        }
    }

    fn value(&self, r1: f64) -> f64 {
        let w = self.params.alpha / self.params.n as f64;
        self.profiles
            .iter()
            .map(|p| {
                let raw = interior_accuracy(p, r1);
                let a = match self.model {
                    ResponseModel::Interior => raw,
                    ResponseModel::Clamped => clamp_accuracy(raw),
                };
                w * a - r1 * a / p.t_min()
            })
            .sum()
    }

    fn slope(&self, r1: f64, probe: f64) -> f64 {
        let w = self.params.alpha / self.params.n as f64;
        self.profiles
            .iter()
            .map(|p| match self.state(p, probe) {
                Clamp::Low => -A_MIN / p.t_min(),
                Clamp::High => -A_MAX / p.t_min(),
                Clamp::Free => {
                    let c = p.cost_time_scale();
                    let e = (r1 / c - 1.0).exp();
                    (w - r1 / p.t_min()) * e / c - (e - 1.0) / p.t_min()
                }
            })
            .sum()
    }

    fn curvature(&self, r1: f64, probe: f64) -> f64 {
        let w = self.params.alpha / self.params.n as f64;
        self.profiles
            .iter()
            .map(|p| match self.state(p, probe) {
                Clamp::Low | Clamp::High => 0.0,
                Clamp::Free => {
                    let c = p.cost_time_scale();
                    let e = (r1 / c - 1.0).exp();
                    (w - r1 / p.t_min()) * e / (c * c) - 2.0 * e / (c * p.t_min())
                }
            })
            .sum()
    }
}

/// The `r2` leg: `sum_k (beta/n) F_k - r2 F_k`.
pub struct FreshnessLeg<'a> {
    pub profiles: &'a [ClientProfile],
    pub params: &'a SystemParams,
    pub model: ResponseModel,
}

impl FreshnessLeg<'_> {
    fn state(&self, p: &ClientProfile, probe: f64) -> Clamp {
        match self.model {
            ResponseModel::Interior => Clamp::Free,
            ResponseModel::Clamped => classify(interior_freshness(p, probe), 0.0, F_MAX),
        }
    }
}

impl RateObjective for FreshnessLeg<'_> {
    fn breakpoints(&self) -> Vec<f64> {
        match self.model {
            ResponseModel::Interior => Vec::new(),
            ResponseModel::Clamped => self
                .profiles
                .iter()
                .flat_map(|p| [p.delta(), p.delta() * (p.delta() * F_MAX).exp()])
                .collect(),
        }
    }

    fn value(&self, r2: f64) -> f64 {
        let w = self.params.beta / self.params.n as f64;
        self.profiles
            .iter()
            .map(|p| {
                let raw = interior_freshness(p, r2);
                let f = match self.model {
                    ResponseModel::Interior => raw,
                    ResponseModel::Clamped => clamp_freshness(raw),
                };
                w * f - r2 * f
            })
            .sum()
    }

    fn slope(&self, r2: f64, probe: f64) -> f64 {
        let w = self.params.beta / self.params.n as f64;
        self.profiles
            .iter()
            .map(|p| match self.state(p, probe) {
                Clamp::Low => 0.0,
                Clamp::High => -F_MAX,
                Clamp::Free => {
                    let d = p.delta();
                    w / (d * r2) - 1.0 / d - (r2 / d).ln() / d
                }
            })
            .sum()
    }

    fn curvature(&self, r2: f64, probe: f64) -> f64 {
        let w = self.params.beta / self.params.n as f64;
        self.profiles
            .iter()
            .map(|p| match self.state(p, probe) {
                Clamp::Low | Clamp::High => 0.0,
                Clamp::Free => {
                    let d = p.delta();
                    -1.0 / (d * r2) - w / (d * r2 * r2)
                }
            })
            .sum()
    }
}

/// Optimal `r1` over `[box.r1_lo, box.r1_hi]`.
pub fn solve_r1(
    profiles: &[ClientProfile],
    params: &SystemParams,
    rate_box: &RateBox,
    model: ResponseModel,
) -> Result<RateSolution> {
    check_population(profiles, params)?;
    maximize(
        &AccuracyLeg {
            profiles,
            params,
            model,
        },
        rate_box.r1_lo,
        rate_box.r1_hi,
    )
}

/// Optimal `r2` over `[box.r2_lo, box.r2_hi]`.
pub fn solve_r2(
    profiles: &[ClientProfile],
    params: &SystemParams,
    rate_box: &RateBox,
    model: ResponseModel,
) -> Result<RateSolution> {
    check_population(profiles, params)?;
    maximize(
        &FreshnessLeg {
            profiles,
            params,
            model,
        },
        rate_box.r2_lo,
        rate_box.r2_hi,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub rates: RewardRates,
    pub strategies: Vec<Strategy>,
    pub server_utility: f64,
    pub client_utilities: Vec<f64>,
    pub r1_boundary: bool,
    pub r2_boundary: bool,
    pub foc_residuals: (f64, f64),
    pub accuracy_clamped: Vec<bool>,
    pub freshness_clamped: Vec<bool>,
    pub model: ResponseModel,
}

/// Stackelberg equilibrium with clamped worker responses.
pub fn compute_equilibrium(
    profiles: &[ClientProfile],
    params: &SystemParams,
    rate_box: &RateBox,
) -> Result<EquilibriumResult> {
    compute_equilibrium_with(profiles, params, rate_box, ResponseModel::Clamped)
}

/// Solves both rate legs under `model`, then lets workers play their
/// (clamped) best responses to the chosen rates.
pub fn compute_equilibrium_with(
    profiles: &[ClientProfile],
    params: &SystemParams,
    rate_box: &RateBox,
    model: ResponseModel,
) -> Result<EquilibriumResult> {
    let s1 = solve_r1(profiles, params, rate_box, model)?;
    let s2 = solve_r2(profiles, params, rate_box, model)?;
    let rates = RewardRates::new(s1.rate, s2.rate)?;
    let responses: Vec<_> = profiles.iter().map(|p| best_response(p, &rates)).collect();
    let strategies: Vec<Strategy> = responses.iter().map(|r| r.strategy).collect();
    let client_utilities = profiles
        .iter()
        .zip(&strategies)
        .map(|(p, s)| client_utility(p, &rates, s, params.comm_size))
        .collect::<Result<Vec<_>>>()?;
    Ok(EquilibriumResult {
        rates,
        server_utility: server_utility(params, &rates, &strategies)?,
        strategies,
        client_utilities,
        r1_boundary: s1.boundary,
        r2_boundary: s2.boundary,
        foc_residuals: (s1.residual, s2.residual),
        accuracy_clamped: responses.iter().map(|r| r.accuracy_clamped).collect(),
        freshness_clamped: responses.iter().map(|r| r.freshness_clamped).collect(),
        model,
    })
}

#[cfg(test)]
mod tests;
