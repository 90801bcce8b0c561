//! Everything needed to run the policies on data: trace ingestion, a seeded
//! synthetic generator, metrics and the sweep runner.

mod experiment;
mod metrics;
mod synthetic;
mod trace;

use std::path::Path;

use chrono::{NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};

use crate::instance::ENERGY_TOL;
use crate::{DemandProfile, Error, Instance, RateLimit, Result};

pub use experiment::{
    run_algorithm, run_experiment, run_experiment_on, Algorithm, AlgorithmContext, ExperimentConfig,
    ExperimentReport, MonthlyRow, ProfileSource, RunRow, SummaryRow,
};
pub use metrics::{compute_metrics, summarize, DayMetrics, Metrics, PeakRecord};
pub use synthetic::{synthetic_days, SyntheticConfig, SyntheticModel};
pub use trace::{
    ingest_trace, parse_timestamp, parse_transactions, read_transactions, slot_energy, SlottingConfig,
    TraceTransaction,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayProfile {
    pub date: NaiveDate,
    pub demand: Vec<f64>,
}

/// Equal-length daily on-peak profiles plus the bounds and average daily
/// energy derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayProfileSet {
    pub slot_minutes: u32,
    pub on_peak_start: NaiveTime,
    pub on_peak_end: NaiveTime,
    pub scale_factor: f64,
    pub demand_lb: f64,
    pub demand_ub: f64,
    /// Mean over days of the total on-peak energy.
    pub average_daily_energy: f64,
    pub days: Vec<DayProfile>,
}

impl DayProfileSet {
    pub(crate) fn from_days(days: Vec<(NaiveDate, Vec<f64>)>, config: &SlottingConfig) -> Result<Self> {
        let (lo, hi) = days
            .iter()
            .flat_map(|(_, v)| v.iter().copied())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        let (demand_lb, demand_ub) = config.bounds.unwrap_or((lo, hi));
        let average_daily_energy = days.iter().map(|(_, v)| v.iter().sum::<f64>()).sum::<f64>() / days.len() as f64;
        let set = DayProfileSet {
            slot_minutes: config.slot_minutes,
            on_peak_start: config.on_peak_start,
            on_peak_end: config.on_peak_end,
            scale_factor: config.scale_factor,
            demand_lb,
            demand_ub,
            average_daily_energy,
            days: days.into_iter().map(|(date, demand)| DayProfile { date, demand }).collect(),
        };
        set.validate()?;
        Ok(set)
    }

    pub fn horizon(&self) -> usize {
        self.days.first().map_or(0, |d| d.demand.len())
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.days.is_empty() {
            return Err(Error::EmptyTrace);
        }
        let horizon = self.horizon();
        let tol = ENERGY_TOL * (1.0 + self.demand_ub.abs());
        for day in &self.days {
            if day.demand.len() != horizon {
                return Err(Error::MismatchedLengths(format!(
                    "{} has {} slots, expected {}",
                    day.date,
                    day.demand.len(),
                    horizon
                )));
            }
            if let Some(&x) = day
                .demand
                .iter()
                .find(|&&x| !(x >= self.demand_lb - tol && x <= self.demand_ub + tol))
            {
                return Err(Error::InvalidParameter(format!(
                    "{}: demand {} outside bounds [{}, {}]",
                    day.date, x, self.demand_lb, self.demand_ub
                )));
            }
        }
        if !(self.average_daily_energy > 0.0) {
            return Err(Error::InvalidParameter("average daily energy must be positive".into()));
        }
        Ok(())
    }

    /// The instance shared by every day, for the given capacity and limit.
    pub fn instance(&self, capacity: f64, rate_limit: RateLimit) -> Result<Instance> {
        Instance::new(capacity, rate_limit, self.horizon(), self.demand_lb, self.demand_ub)
    }

    pub fn profiles(&self, instance: &Instance) -> Result<Vec<DemandProfile>> {
        self.days
            .iter()
            .map(|d| DemandProfile::new(instance, clamp_to_bounds(&d.demand, instance)))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: DayProfileSet = serde_json::from_str(text).map_err(|e| Error::MalformedRecord {
            line: e.line(),
            reason: e.to_string(),
        })?;
        set.validate()?;
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

/// Removes sub-tolerance excursions so validated profiles pass the strict
/// instance check.
fn clamp_to_bounds(values: &[f64], instance: &Instance) -> Vec<f64> {
    values
        .iter()
        .map(|x| x.clamp(instance.demand_lb(), instance.demand_ub()))
        .collect()
}

/// Parses a demand profile: one kWh value per line. Blank lines and text
/// after `#` are ignored.
pub fn parse_profile_text(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let x: f64 = body.parse().map_err(|_| Error::MalformedRecord {
            line: k + 1,
            reason: format!("expected a number, got `{body}`"),
        })?;
        if !x.is_finite() {
            return Err(Error::MalformedRecord {
                line: k + 1,
                reason: "value is not finite".into(),
            });
        }
        out.push(x);
    }
    if out.is_empty() {
        return Err(Error::EmptyTrace);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_text_with_comments() {
        let v = parse_profile_text("# header\n1.5\n\n2 # trailing\n").unwrap();
        assert_eq!(v, vec![1.5, 2.0]);
        match parse_profile_text("1\nabc\n") {
            Err(Error::MalformedRecord { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(parse_profile_text("# nothing\n"), Err(Error::EmptyTrace));
    }

    #[test]
    fn json_round_trip() {
        let config = SlottingConfig::default();
        let date = NaiveDate::from_ymd_opt(2024, 3, 1).unwrap();
        let set = DayProfileSet::from_days(vec![(date, vec![1.0, 2.0]), (date.succ_opt().unwrap(), vec![3.0, 2.0])], &config)
            .unwrap();
        assert_eq!((set.demand_lb, set.demand_ub), (1.0, 3.0));
        assert_eq!(set.average_daily_energy, 4.0);
        let back = DayProfileSet::from_json(&set.to_json().unwrap()).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn rejects_bounds_that_do_not_envelop() {
        let config = SlottingConfig {
            bounds: Some((1.5, 3.0)),
            ..Default::default()
        };
        let date = NaiveDate::from_ymd_opt(2024, 3, 1).unwrap();
        assert!(DayProfileSet::from_days(vec![(date, vec![1.0, 2.0])], &config).is_err());
    }
}
