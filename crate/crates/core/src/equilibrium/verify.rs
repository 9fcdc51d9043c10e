//! Grid certification of the two equilibrium conditions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::game_core::{
    best_response, client_utility, server_utility, ClientProfile, RateBox, RewardRates, Strategy,
    SystemParams, A_MAX, A_MIN, F_MAX,
};

/// Gains at or below this are not counted as violations.
pub const VIOLATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Points spanning `[A_MIN, A_MAX]`.
    pub accuracy_points: usize,
    /// Points spanning `[0, F_MAX]`.
    pub freshness_points: usize,
    /// Completion times tried, as multiples of `t_min`.
    pub time_multipliers: Vec<f64>,
    /// Points per rate axis spanning the rate box.
    pub rate_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            accuracy_points: 100,
            freshness_points: 101,
            time_multipliers: vec![1.0, 1.5, 2.0],
            rate_points: 50,
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Outcome of a worker-side deviation search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientCheck {
    pub client_id: usize,
    pub candidate: Strategy,
    /// Largest utility gain of any grid deviation over the candidate.
    pub worst_gain: f64,
    /// Grid point achieving `worst_gain`, as `(A, F, T)`.
    pub worst_at: (f64, f64, f64),
    /// Grid points whose gain exceeds [`VIOLATION_TOL`].
    pub violations: usize,
    pub points_checked: usize,
}

impl ClientCheck {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Searches the deviation grid for any action that beats `candidate`.
pub fn verify_client_strategy(
    profile: &ClientProfile,
    rates: &RewardRates,
    candidate: &Strategy,
    grid: &GridSpec,
    comm_size: f64,
) -> Result<ClientCheck> {
    let base = client_utility(profile, rates, candidate, comm_size)?;
    let accuracies = linspace(A_MIN, A_MAX, grid.accuracy_points);
    let freshnesses = linspace(0.0, F_MAX, grid.freshness_points);
    let mut check = ClientCheck {
        client_id: profile.id(),
        candidate: *candidate,
        worst_gain: f64::NEG_INFINITY,
        worst_at: (
            candidate.accuracy(),
            candidate.freshness(),
            candidate.completion_time(),
        ),
        violations: 0,
        points_checked: 0,
    };
    for &m in &grid.time_multipliers {
        let t = profile.t_min() * m;
        for &a in &accuracies {
            for &f in &freshnesses {
                let s = Strategy::new(a, f, t)?;
                let gain = client_utility(profile, rates, &s, comm_size)? - base;
                check.points_checked += 1;
                if gain > VIOLATION_TOL {
                    check.violations += 1;
                }
                if gain > check.worst_gain {
                    check.worst_gain = gain;
                    check.worst_at = (a, f, t);
                }
            }
        }
    }
    Ok(check)
}

/// Checks that the worker's best response admits no profitable deviation.
pub fn verify_client_equilibrium(
    profile: &ClientProfile,
    rates: &RewardRates,
    grid: &GridSpec,
    comm_size: f64,
) -> Result<ClientCheck> {
    let br = best_response(profile, rates);
    verify_client_strategy(profile, rates, &br.strategy, grid, comm_size)
}

/// Outcome of a leader-side deviation search over the rate grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCheck {
    pub worst_gain: f64,
    pub worst_at: (f64, f64),
    pub violations: usize,
    pub points_checked: usize,
}

impl RateCheck {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerCheck {
    pub rates: RewardRates,
    /// Workers' strategies held at their responses to `rates` while the
    /// leader deviates.
    pub frozen: RateCheck,
    /// Workers re-optimize against every deviating rate pair.
    pub stackelberg: RateCheck,
}

impl ServerCheck {
    pub fn violations(&self) -> usize {
        self.frozen.violations + self.stackelberg.violations
    }

    pub fn passed(&self) -> bool {
        self.violations() == 0
    }
}

/// Compares the leader's utility at `rates_star` against every point of a
/// uniform grid over `rate_box`, both with frozen worker strategies and
/// with workers best-responding at each grid point.
pub fn verify_server_equilibrium(
    profiles: &[ClientProfile],
    params: &SystemParams,
    rates_star: &RewardRates,
    rate_box: &RateBox,
    grid: &GridSpec,
) -> Result<ServerCheck> {
    let frozen: Vec<Strategy> = profiles
        .iter()
        .map(|p| best_response(p, rates_star).strategy)
        .collect();
    let base = server_utility(params, rates_star, &frozen)?;
    let r1s = linspace(rate_box.r1_lo, rate_box.r1_hi, grid.rate_points);
    let r2s = linspace(rate_box.r2_lo, rate_box.r2_hi, grid.rate_points);

    // Rows are evaluated in parallel and reduced in grid order.
    let rows: Vec<Vec<(f64, f64, f64, f64)>> = r1s
        .par_iter()
        .map(|&r1| {
            r2s.iter()
                .map(|&r2| {
                    let rates = RewardRates::new(r1, r2)?;
                    let held = server_utility(params, &rates, &frozen)? - base;
                    let induced: Vec<Strategy> = profiles
                        .iter()
                        .map(|p| best_response(p, &rates).strategy)
                        .collect();
                    let moved = server_utility(params, &rates, &induced)? - base;
                    Ok((r1, r2, held, moved))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let empty = || RateCheck {
        worst_gain: f64::NEG_INFINITY,
        worst_at: (rates_star.r1(), rates_star.r2()),
        violations: 0,
        points_checked: 0,
    };
    let mut held_check = empty();
    let mut moved_check = empty();
    for (r1, r2, held, moved) in rows.into_iter().flatten() {
        for (check, gain) in [(&mut held_check, held), (&mut moved_check, moved)] {
            check.points_checked += 1;
            if gain > VIOLATION_TOL {
                check.violations += 1;
            }
            if gain > check.worst_gain {
                check.worst_gain = gain;
                check.worst_at = (r1, r2);
            }
        }
    }
    Ok(ServerCheck {
        rates: *rates_star,
        frozen: held_check,
        stackelberg: moved_check,
    })
}
