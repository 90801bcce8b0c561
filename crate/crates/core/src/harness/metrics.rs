//! Per-day and aggregate performance metrics.
//!
//! Standard deviations are population deviations (divide by `n`), so a single
//! day reports 0 rather than an undefined value.

use serde::{Deserialize, Serialize};

use crate::offline::OfflineSolution;
use crate::online::PolicyRun;
use crate::{DemandProfile, Error, Result};

/// The three peaks a day's metrics are computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakRecord {
    pub online_peak: f64,
    pub offline_peak: f64,
    pub original_peak: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayMetrics {
    pub online_peak: f64,
    pub offline_peak: f64,
    pub original_peak: f64,
    /// Peak after discharging over the original peak.
    pub peak_usage_rate: f64,
    /// Online over offline peak for this day alone.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub days: Vec<DayMetrics>,
    pub mean_online_peak: f64,
    pub std_online_peak: f64,
    pub mean_offline_peak: f64,
    pub mean_usage_rate: f64,
    pub std_usage_rate: f64,
    /// Mean online peak over mean offline peak.
    pub empirical_ratio: f64,
    /// Capacity over average daily energy.
    pub capacity_rate: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num <= 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

pub(crate) fn mean_std(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Metrics from already extracted peaks.
pub fn summarize(records: &[PeakRecord], capacity_rate: f64) -> Metrics {
    let days: Vec<DayMetrics> = records
        .iter()
        .map(|r| DayMetrics {
            online_peak: r.online_peak,
            offline_peak: r.offline_peak,
            original_peak: r.original_peak,
            peak_usage_rate: ratio(r.online_peak, r.original_peak),
            ratio: ratio(r.online_peak, r.offline_peak),
        })
        .collect();
    let (mean_online_peak, std_online_peak) = mean_std(days.iter().map(|d| d.online_peak));
    let (mean_offline_peak, _) = mean_std(days.iter().map(|d| d.offline_peak));
    let (mean_usage_rate, std_usage_rate) = mean_std(days.iter().map(|d| d.peak_usage_rate));
    Metrics {
        empirical_ratio: ratio(mean_online_peak, mean_offline_peak),
        days,
        mean_online_peak,
        std_online_peak,
        mean_offline_peak,
        mean_usage_rate,
        std_usage_rate,
        capacity_rate,
    }
}

/// Pairs each run with its offline solution and original demand.
pub fn compute_metrics(
    demands: &[DemandProfile],
    runs: &[PolicyRun],
    offline: &[OfflineSolution],
    capacity_rate: f64,
) -> Result<Metrics> {
    if runs.len() != offline.len() || runs.len() != demands.len() {
        return Err(Error::MismatchedLengths(format!(
            "{} demands, {} runs, {} offline solutions",
            demands.len(),
            runs.len(),
            offline.len()
        )));
    }
    let records: Vec<PeakRecord> = demands
        .iter()
        .zip(runs)
        .zip(offline)
        .map(|((d, run), off)| PeakRecord {
            online_peak: run.final_peak,
            offline_peak: off.peak,
            original_peak: d.peak(),
        })
        .collect();
    Ok(summarize(&records, capacity_rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offline::solve_offline_pmd;
    use crate::{Instance, RateLimit};
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_day_fixture() {
        let records = [
            PeakRecord {
                online_peak: 6.0,
                offline_peak: 5.0,
                original_peak: 8.0,
            },
            PeakRecord {
                online_peak: 4.0,
                offline_peak: 3.0,
                original_peak: 5.0,
            },
        ];
        let m = summarize(&records, 0.2);
        assert_abs_diff_eq!(m.empirical_ratio, 1.25, epsilon = 1e-12);
        assert_abs_diff_eq!(m.days[0].peak_usage_rate, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(m.days[1].peak_usage_rate, 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(m.mean_online_peak, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.std_online_peak, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn offline_runs_have_unit_ratio_and_idle_runs_unit_usage() {
        let inst = Instance::new(1.0, RateLimit::Unbounded, 2, 1.0, 3.0).unwrap();
        let demands = vec![
            DemandProfile::new(&inst, vec![3.0, 1.0]).unwrap(),
            DemandProfile::new(&inst, vec![2.0, 2.5]).unwrap(),
        ];
        let offline: Vec<_> = demands.iter().map(|d| solve_offline_pmd(&inst, d).unwrap()).collect();
        let as_runs: Vec<_> = demands
            .iter()
            .zip(&offline)
            .map(|(d, o)| PolicyRun::from_schedule(d.values(), o.schedule.values().to_vec(), Vec::new()))
            .collect();
        let m = compute_metrics(&demands, &as_runs, &offline, 0.5).unwrap();
        assert_abs_diff_eq!(m.empirical_ratio, 1.0, epsilon = 1e-12);

        let idle: Vec<_> = demands
            .iter()
            .map(|d| PolicyRun::from_schedule(d.values(), vec![0.0; 2], Vec::new()))
            .collect();
        let m = compute_metrics(&demands, &idle, &offline, 0.5).unwrap();
        assert!(m.days.iter().all(|d| d.peak_usage_rate == 1.0));

        assert!(matches!(
            compute_metrics(&demands[..1], &idle, &offline, 0.5),
            Err(Error::MismatchedLengths(_))
        ));
    }
}
