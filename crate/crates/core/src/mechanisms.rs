//! Rate-selection policies: the equilibrium mechanism and two baselines.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::equilibrium::compute_equilibrium;
use crate::error::{Error, Result};
use crate::game_core::{ClientProfile, RateBox, RewardRates, SystemParams};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MechanismKind {
    /// Leader-optimal rates against best-responding workers.
    IFedCrowd,
    /// Each rate drawn uniformly from its box interval.
    Random,
    /// The upper corner of the rate box.
    Max,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 3] = [
        MechanismKind::IFedCrowd,
        MechanismKind::Random,
        MechanismKind::Max,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MechanismKind::IFedCrowd => "ifedcrowd",
            MechanismKind::Random => "random",
            MechanismKind::Max => "max",
        }
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MechanismKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ifedcrowd" => Ok(MechanismKind::IFedCrowd),
            "random" => Ok(MechanismKind::Random),
            "max" => Ok(MechanismKind::Max),
            other => Err(Error::Parse(format!(
                "unknown mechanism `{other}` (expected ifedcrowd|random|max)"
            ))),
        }
    }
}

/// Rates announced by `kind`. Deterministic in its arguments; `rng_seed`
/// only matters for [`MechanismKind::Random`].
pub fn select_rates(
    kind: MechanismKind,
    profiles: &[ClientProfile],
    params: &SystemParams,
    rate_box: &RateBox,
    rng_seed: u64,
) -> Result<RewardRates> {
    if !rate_box.is_feasible() {
        return Err(Error::config(format!(
            "rate box is empty: r1 [{}, {}], r2 [{}, {}]",
            rate_box.r1_lo, rate_box.r1_hi, rate_box.r2_lo, rate_box.r2_hi
        )));
    }
    match kind {
        MechanismKind::IFedCrowd => Ok(compute_equilibrium(profiles, params, rate_box)?.rates),
        MechanismKind::Max => rate_box.upper_corner(),
        MechanismKind::Random => {
            let mut rng = seed::stream(rng_seed, &[seed::MECHANISM]);
            let r1 = rng.random_range(rate_box.r1_lo..=rate_box.r1_hi);
            let r2 = rng.random_range(rate_box.r2_lo..=rate_box.r2_hi);
            RewardRates::new(r1, r2)
        }
    }
}
