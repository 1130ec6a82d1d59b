use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Serialize};

use super::ModelError;

/// Submitted/accepted counts for one track.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackStats {
    pub track: String,
    pub submitted: Option<u64>,
    pub accepted: Option<u64>,
}

impl TrackStats {
    pub fn new(track: impl Into<String>, submitted: Option<u64>, accepted: Option<u64>) -> Result<Self, ModelError> {
        if let (Some(s), Some(a)) = (submitted, accepted) {
            if a > s {
                return Err(ModelError::InvalidValue(format!("accepted {a} exceeds submitted {s}")));
            }
        }
        Ok(TrackStats { track: track.into(), submitted, accepted })
    }
}

/// Percent of accepted over submitted, one fractional digit, half away
/// from zero. Absent when either count is missing or nothing was submitted.
pub fn admission_rate(stats: &TrackStats) -> Option<Decimal> {
    percent(stats.accepted?, stats.submitted?)
}

pub(crate) fn percent(accepted: u64, submitted: u64) -> Option<Decimal> {
    if submitted == 0 {
        return None;
    }
    let mut rate = (Decimal::from(accepted) * Decimal::ONE_HUNDRED / Decimal::from(submitted))
        .round_dp_with_strategy(1, RoundingStrategy::MidpointAwayFromZero);
    rate.rescale(1);
    Some(rate)
}
