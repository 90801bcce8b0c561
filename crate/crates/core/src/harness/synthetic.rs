//! Seeded synthetic demand days, standing in for unpublished traces.

use chrono::{NaiveDate, NaiveTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::harness::{DayProfileSet, SlottingConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticModel {
    /// Independent uniform draws over the whole band.
    Uniform,
    /// A two-state Markov chain switching between a low band near `d_lb`
    /// and a high band near `d_ub`. The chain spends about 30% of slots in
    /// the high band, which puts the mean slot at roughly 37% of the way
    /// from `d_lb` to `d_ub`.
    Volatile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub days: usize,
    pub horizon: usize,
    pub demand_lb: f64,
    pub demand_ub: f64,
    pub model: SyntheticModel,
    pub seed: u64,
    #[serde(default = "default_start")]
    pub start_date: NaiveDate,
    #[serde(default = "default_slot")]
    pub slot_minutes: u32,
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 1, 1).unwrap()
}

fn default_slot() -> u32 {
    15
}

/// Per-slot probabilities of entering and leaving the high band.
const ENTER_HIGH: f64 = 0.2;
const LEAVE_HIGH: f64 = 0.45;

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        if self.days == 0 || self.horizon == 0 {
            return Err(Error::InvalidParameter("need at least one day and one slot".into()));
        }
        if !(self.demand_lb > 0.0 && self.demand_lb <= self.demand_ub && self.demand_ub.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bounds [{}, {}] must satisfy 0 < d_lb <= d_ub",
                self.demand_lb, self.demand_ub
            )));
        }
        if self.slot_minutes == 0 || self.horizon as u64 * u64::from(self.slot_minutes) > 12 * 60 {
            return Err(Error::InvalidParameter("the on-peak window must fit between noon and midnight".into()));
        }
        Ok(())
    }
}

/// Generates `days` consecutive days starting at `start_date`. The bounds
/// of the returned set are the configured ones, not the sample extremes.
pub fn synthetic_days(config: &SyntheticConfig) -> Result<DayProfileSet> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (lb, ub) = (config.demand_lb, config.demand_ub);
    let width = ub - lb;
    let low = (lb, lb + 0.35 * width);
    let high = (lb + 0.55 * width, ub);
    let draw = |rng: &mut ChaCha8Rng, (a, b): (f64, f64)| if b > a { rng.random_range(a..=b) } else { a };

    let mut days = Vec::with_capacity(config.days);
    let mut date = config.start_date;
    for _ in 0..config.days {
        let demand = match config.model {
            SyntheticModel::Uniform => (0..config.horizon).map(|_| draw(&mut rng, (lb, ub))).collect(),
            SyntheticModel::Volatile => {
                let mut in_high = rng.random_bool(ENTER_HIGH / (ENTER_HIGH + LEAVE_HIGH));
                (0..config.horizon)
                    .map(|_| {
                        let flip = if in_high { LEAVE_HIGH } else { ENTER_HIGH };
                        if rng.random_bool(flip) {
                            in_high = !in_high;
                        }
                        draw(&mut rng, if in_high { high } else { low })
                    })
                    .collect()
            }
        };
        days.push((date, demand));
        date = date.succ_opt().ok_or_else(|| Error::InvalidParameter("date overflow".into()))?;
    }

    let start = NaiveTime::from_hms_opt(12, 0, 0).unwrap();
    let slotting = SlottingConfig {
        slot_minutes: config.slot_minutes,
        on_peak_start: start,
        on_peak_end: start + chrono::Duration::minutes(config.horizon as i64 * i64::from(config.slot_minutes)),
        scale_factor: 1.0,
        bounds: Some((lb, ub)),
    };
    DayProfileSet::from_days(days, &slotting)
}
