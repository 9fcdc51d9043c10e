//! Reward, cost and utility models of the two-level game, plus the
//! closed-form follower best response.
//!
//! All logarithms are natural. Every function here is pure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower clamp applied to a best-response accuracy level.
pub const A_MIN: f64 = 0.001;
/// Upper clamp applied to a best-response accuracy level.
pub const A_MAX: f64 = 0.999;
/// Upper clamp applied to a best-response freshness.
pub const F_MAX: f64 = 10.0;
/// Default cap closing the `r2` side of the feasible rate box.
pub const DEFAULT_R2_CAP: f64 = 100.0;

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

/// A worker's private cost parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile")]
pub struct ClientProfile {
    id: usize,
    gamma: f64,
    delta: f64,
    t_min: f64,
}

#[derive(Deserialize)]
struct RawProfile {
    id: usize,
    gamma: f64,
    delta: f64,
    t_min: f64,
}

impl TryFrom<RawProfile> for ClientProfile {
    type Error = Error;
    fn try_from(r: RawProfile) -> Result<Self> {
        ClientProfile::new(r.id, r.gamma, r.delta, r.t_min)
    }
}

impl ClientProfile {
    /// `gamma` scales the computation cost, `delta` the data-collection cost,
    /// and `t_min` is the fastest the worker can complete a round.
    pub fn new(id: usize, gamma: f64, delta: f64, t_min: f64) -> Result<Self> {
        positive("gamma", gamma)?;
        positive("delta", delta)?;
        positive("t_min", t_min)?;
        Ok(ClientProfile {
            id,
            gamma,
            delta,
            t_min,
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    /// `gamma * t_min`, the scale on which `r1` acts for this worker.
    pub fn cost_time_scale(&self) -> f64 {
        self.gamma * self.t_min
    }
}

/// The leader's decision variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRates")]
pub struct RewardRates {
    r1: f64,
    r2: f64,
}

#[derive(Deserialize)]
struct RawRates {
    r1: f64,
    r2: f64,
}

impl TryFrom<RawRates> for RewardRates {
    type Error = Error;
    fn try_from(r: RawRates) -> Result<Self> {
        RewardRates::new(r.r1, r.r2)
    }
}

impl RewardRates {
    pub fn new(r1: f64, r2: f64) -> Result<Self> {
        positive("r1", r1)?;
        positive("r2", r2)?;
        Ok(RewardRates { r1, r2 })
    }

    pub fn r1(&self) -> f64 {
        self.r1
    }

    pub fn r2(&self) -> f64 {
        self.r2
    }
}

/// A follower's action: accuracy level, data freshness and completion time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStrategy")]
pub struct Strategy {
    accuracy: f64,
    freshness: f64,
    completion_time: f64,
}

#[derive(Deserialize)]
struct RawStrategy {
    accuracy: f64,
    freshness: f64,
    completion_time: f64,
}

impl TryFrom<RawStrategy> for Strategy {
    type Error = Error;
    fn try_from(r: RawStrategy) -> Result<Self> {
        Strategy::new(r.accuracy, r.freshness, r.completion_time)
    }
}

impl Strategy {
    pub fn new(accuracy: f64, freshness: f64, completion_time: f64) -> Result<Self> {
        check_accuracy(accuracy)?;
        if !(freshness.is_finite() && freshness >= 0.0) {
            return Err(Error::domain(format!(
                "freshness must be finite and non-negative, got {freshness}"
            )));
        }
        positive("completion_time", completion_time)?;
        Ok(Strategy {
            accuracy,
            freshness,
            completion_time,
        })
    }

    pub fn accuracy(&self) -> f64 {
        self.accuracy
    }

    pub fn freshness(&self) -> f64 {
        self.freshness
    }

    pub fn completion_time(&self) -> f64 {
        self.completion_time
    }
}

/// Server-side constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub alpha: f64,
    pub beta: f64,
    pub comm_size: f64,
    pub n: usize,
}

impl SystemParams {
    pub fn new(alpha: f64, beta: f64, comm_size: f64, n: usize) -> Result<Self> {
        let p = SystemParams {
            alpha,
            beta,
            comm_size,
            n,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        positive("alpha", self.alpha)?;
        positive("beta", self.beta)?;
        if !(self.comm_size.is_finite() && self.comm_size >= 0.0) {
            return Err(Error::domain(format!(
                "comm_size must be >= 0, got {}",
                self.comm_size
            )));
        }
        if self.n == 0 {
            return Err(Error::domain("n must be at least 1"));
        }
        Ok(())
    }

    /// Same constants with a different worker count.
    pub fn with_n(&self, n: usize) -> Self {
        SystemParams { n, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub calculation: f64,
    pub collection: f64,
    pub communication: f64,
    pub total: f64,
}

/// Reward-rate search region.
///
/// `per_client_r1[k]` is the open interval of `r1` in which worker `k`'s
/// unclamped accuracy response lies strictly inside `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBox {
    pub r1_lo: f64,
    pub r1_hi: f64,
    pub r2_lo: f64,
    pub r2_hi: f64,
    pub per_client_r1: Vec<(f64, f64)>,
}

impl RateBox {
    /// A box from explicit bounds, without per-client intervals.
    pub fn new(r1_lo: f64, r1_hi: f64, r2_lo: f64, r2_hi: f64) -> Result<Self> {
        for (name, v) in [
            ("r1_lo", r1_lo),
            ("r1_hi", r1_hi),
            ("r2_lo", r2_lo),
            ("r2_hi", r2_hi),
        ] {
            positive(name, v)?;
        }
        if r1_lo > r1_hi || r2_lo > r2_hi {
            return Err(Error::config(format!(
                "rate box bounds out of order: r1 [{r1_lo}, {r1_hi}], r2 [{r2_lo}, {r2_hi}]"
            )));
        }
        Ok(RateBox {
            r1_lo,
            r1_hi,
            r2_lo,
            r2_hi,
            per_client_r1: Vec::new(),
        })
    }

    /// A degenerate box holding a single rate pair.
    pub fn point(rates: RewardRates) -> Self {
        RateBox {
            r1_lo: rates.r1,
            r1_hi: rates.r1,
            r2_lo: rates.r2,
            r2_hi: rates.r2,
            per_client_r1: Vec::new(),
        }
    }

    /// Both intervals have positive width.
    pub fn is_feasible(&self) -> bool {
        self.r1_lo < self.r1_hi && self.r2_lo < self.r2_hi
    }

    pub fn contains(&self, rates: &RewardRates) -> bool {
        (self.r1_lo..=self.r1_hi).contains(&rates.r1)
            && (self.r2_lo..=self.r2_hi).contains(&rates.r2)
    }

    pub fn upper_corner(&self) -> Result<RewardRates> {
        RewardRates::new(self.r1_hi, self.r2_hi)
    }
}

fn check_accuracy(accuracy: f64) -> Result<()> {
    if (0.0..1.0).contains(&accuracy) {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "accuracy must lie in [0, 1), got {accuracy}"
        )))
    }
}

/// Age-of-information freshness `1 / (now - generated_at)`.
pub fn freshness(now: f64, generated_at: f64) -> Result<f64> {
    let age = now - generated_at;
    if !(age > 0.0) || !age.is_finite() {
        return Err(Error::domain(format!(
            "freshness undefined for age {age} (now {now}, generated at {generated_at})"
        )));
    }
    Ok(1.0 / age)
}

/// Computation cost `gamma (1 + A) ln(1 + A)`.
pub fn calculation_cost(gamma: f64, accuracy: f64) -> Result<f64> {
    positive("gamma", gamma)?;
    check_accuracy(accuracy)?;
    Ok(gamma * (1.0 + accuracy) * accuracy.ln_1p())
}

/// Data-collection cost `exp(delta F)`.
pub fn collection_cost(delta: f64, freshness: f64) -> Result<f64> {
    positive("delta", delta)?;
    if !(freshness >= 0.0) {
        return Err(Error::domain(format!(
            "freshness must be non-negative, got {freshness}"
        )));
    }
    Ok((delta * freshness).exp())
}

pub fn total_cost(
    profile: &ClientProfile,
    strategy: &Strategy,
    comm_size: f64,
) -> Result<CostBreakdown> {
    if !(comm_size >= 0.0) {
        return Err(Error::domain(format!(
            "comm_size must be >= 0, got {comm_size}"
        )));
    }
    let calculation = calculation_cost(profile.gamma, strategy.accuracy)?;
    let collection = collection_cost(profile.delta, strategy.freshness)?;
    Ok(CostBreakdown {
        calculation,
        collection,
        communication: comm_size,
        total: calculation + collection + comm_size,
    })
}

/// Payout `r1 A / T + r2 F`.
pub fn client_reward(rates: &RewardRates, strategy: &Strategy) -> f64 {
    rates.r1 * strategy.accuracy / strategy.completion_time + rates.r2 * strategy.freshness
}

/// Worker utility: payout minus total cost. May be negative.
pub fn client_utility(
    profile: &ClientProfile,
    rates: &RewardRates,
    strategy: &Strategy,
    comm_size: f64,
) -> Result<f64> {
    let cost = total_cost(profile, strategy, comm_size)?;
    Ok(client_reward(rates, strategy) - cost.total)
}

/// Leader utility: averaged valuation of accuracy and freshness, minus the
/// slowest completion time, minus the summed payouts.
///
/// The valuation is averaged over `n` while payouts are summed; both are
/// kept as in the original model.
pub fn server_utility(
    params: &SystemParams,
    rates: &RewardRates,
    strategies: &[Strategy],
) -> Result<f64> {
    if strategies.is_empty() {
        return Err(Error::domain("server utility needs at least one strategy"));
    }
    if strategies.len() != params.n {
        return Err(Error::domain(format!(
            "expected {} strategies, got {}",
            params.n,
            strategies.len()
        )));
    }
    let mut benefit = 0.0;
    let mut payment = 0.0;
    let mut slowest = f64::NEG_INFINITY;
    for s in strategies {
        benefit += params.alpha * s.accuracy + params.beta * s.freshness;
        payment += client_reward(rates, s);
        slowest = slowest.max(s.completion_time);
    }
    Ok(benefit / params.n as f64 - slowest - payment)
}

/// A follower's optimal action together with its clamping record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    pub strategy: Strategy,
    /// `exp(r1 / (gamma t_min) - 1) - 1` before clamping.
    pub unclamped_accuracy: f64,
    /// `ln(r2 / delta) / delta` before clamping.
    pub unclamped_freshness: f64,
    pub accuracy_clamped: bool,
    pub freshness_clamped: bool,
}

/// Unclamped stationary accuracy for a worker at rate `r1`.
pub fn interior_accuracy(profile: &ClientProfile, r1: f64) -> f64 {
    (r1 / profile.cost_time_scale() - 1.0).exp() - 1.0
}

/// Unclamped stationary freshness for a worker at rate `r2`.
pub fn interior_freshness(profile: &ClientProfile, r2: f64) -> f64 {
    (r2 / profile.delta).ln() / profile.delta
}

pub fn clamp_accuracy(a: f64) -> f64 {
    a.clamp(A_MIN, A_MAX)
}

pub fn clamp_freshness(f: f64) -> f64 {
    f.clamp(0.0, F_MAX)
}

/// The worker's utility-maximizing action at the announced rates.
///
/// Utility falls with completion time, so the worker finishes at `t_min`.
/// Accuracy and freshness solve the stationarity conditions and are then
/// clamped into `[A_MIN, A_MAX]` and `[0, F_MAX]`. Utility is concave in
/// each, so the clamped point is optimal over the clamped ranges.
pub fn best_response(profile: &ClientProfile, rates: &RewardRates) -> BestResponse {
    let unclamped_accuracy = interior_accuracy(profile, rates.r1);
    let unclamped_freshness = interior_freshness(profile, rates.r2);
    let accuracy = clamp_accuracy(unclamped_accuracy);
    let freshness = clamp_freshness(unclamped_freshness);
    BestResponse {
        strategy: Strategy {
            accuracy,
            freshness,
            completion_time: profile.t_min,
        },
        unclamped_accuracy,
        unclamped_freshness,
        accuracy_clamped: accuracy != unclamped_accuracy,
        freshness_clamped: freshness != unclamped_freshness,
    }
}

pub fn best_responses(profiles: &[ClientProfile], rates: &RewardRates) -> Vec<BestResponse> {
    profiles.iter().map(|p| best_response(p, rates)).collect()
}

/// Leader utility when every worker best-responds to `rates`.
pub fn induced_server_utility(
    profiles: &[ClientProfile],
    params: &SystemParams,
    rates: &RewardRates,
) -> Result<f64> {
    let strategies: Vec<Strategy> = profiles
        .iter()
        .map(|p| best_response(p, rates).strategy)
        .collect();
    server_utility(params, rates, &strategies)
}

/// Mean worker utility when every worker best-responds to `rates`.
pub fn induced_worker_utility(
    profiles: &[ClientProfile],
    params: &SystemParams,
    rates: &RewardRates,
) -> Result<f64> {
    if profiles.is_empty() {
        return Err(Error::domain("empty population"));
    }
    let mut total = 0.0;
    for p in profiles {
        let br = best_response(p, rates);
        total += client_utility(p, rates, &br.strategy, params.comm_size)?;
    }
    Ok(total / profiles.len() as f64)
}

/// Rate region implied by interior worker responses.
///
/// Worker `k` answers with `0 < A < 1` exactly when
/// `gamma_k t_min_k < r1 < (1 + ln 2) gamma_k t_min_k`, and with `F >= 0`
/// when `r2 >= delta_k`. A single uniform rate rarely satisfies every
/// worker, so the population box is the hull of the per-worker intervals:
/// `r1` spans from the smallest lower bound to the largest upper bound and
/// `r2` spans `[max delta_k, r2_cap]`.
pub fn feasible_rate_box(profiles: &[ClientProfile], r2_cap: f64) -> Result<RateBox> {
    if profiles.is_empty() {
        return Err(Error::config(
            "feasible rate box needs at least one profile",
        ));
    }
    let upper_factor = 1.0 + std::f64::consts::LN_2;
    let per_client_r1: Vec<(f64, f64)> = profiles
        .iter()
        .map(|p| {
            let scale = p.cost_time_scale();
            (scale, upper_factor * scale)
        })
        .collect();
    let r1_lo = per_client_r1
        .iter()
        .map(|iv| iv.0)
        .fold(f64::INFINITY, f64::min);
    let r1_hi = per_client_r1
        .iter()
        .map(|iv| iv.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let r2_lo = profiles
        .iter()
        .map(|p| p.delta)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(r2_cap > r2_lo) {
        return Err(Error::config(format!(
            "r2_cap {r2_cap} must exceed the largest delta {r2_lo}"
        )));
    }
    Ok(RateBox {
        r1_lo,
        r1_hi,
        r2_lo,
        r2_hi: r2_cap,
        per_client_r1,
    })
}
