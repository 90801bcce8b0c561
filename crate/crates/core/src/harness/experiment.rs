//! Sweeps every selected algorithm over a day set and a grid of capacities
//! and rate limits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_equal_discharge, run_equal_ratio, run_rhc, run_threshold, FutureView, RhcConfig};
use crate::cr::optimal_cr;
use crate::harness::metrics::{compute_metrics, mean_std};
use crate::harness::{synthetic_days, DayProfileSet, SyntheticConfig};
use crate::instance::ENERGY_TOL;
use crate::offline::{solve_offline_pmd, OfflineSolution};
use crate::online::{run_policy, PolicyMode, PolicyOptions, PolicyRun, DEFAULT_BISECTION_EPSILON};
use crate::{DemandProfile, Error, Instance, RateLimit, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Offline,
    Fixed,
    Anytime,
    AnytimeDeplete,
    ThrAvg,
    ThrHalf,
    EqlDis,
    EqlPer,
    RhcUb,
    RhcLb,
    RhcHalf,
}

impl Algorithm {
    pub const ALL: [Algorithm; 11] = [
        Algorithm::Offline,
        Algorithm::Fixed,
        Algorithm::Anytime,
        Algorithm::AnytimeDeplete,
        Algorithm::ThrAvg,
        Algorithm::ThrHalf,
        Algorithm::EqlDis,
        Algorithm::EqlPer,
        Algorithm::RhcUb,
        Algorithm::RhcLb,
        Algorithm::RhcHalf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Offline => "offline",
            Algorithm::Fixed => "fixed",
            Algorithm::Anytime => "anytime",
            Algorithm::AnytimeDeplete => "anytime-deplete",
            Algorithm::ThrAvg => "thr-avg",
            Algorithm::ThrHalf => "thr-half",
            Algorithm::EqlDis => "eql-dis",
            Algorithm::EqlPer => "eql-per",
            Algorithm::RhcUb => "rhc-ub",
            Algorithm::RhcLb => "rhc-lb",
            Algorithm::RhcHalf => "rhc-half",
        }
    }

    /// Whether the policy can take the month's billed peak into account.
    pub fn uses_monthly_peak(self) -> bool {
        matches!(self, Algorithm::Fixed | Algorithm::Anytime | Algorithm::AnytimeDeplete)
    }

    fn needs_ratio(self) -> bool {
        self.uses_monthly_peak()
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown algorithm `{s}`")))
    }
}

/// Per-instance inputs shared by every day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgorithmContext {
    pub instance: Instance,
    /// Optimal competitive ratio; only read by the ratio-pursuing policies.
    pub pi_star: f64,
    /// Threshold of `thr-avg`: mean offline peak over the calibration days.
    pub thr_avg: f64,
    /// Capacity over average daily energy; the ratio used by `eql-per`.
    pub capacity_rate: f64,
    pub epsilon: f64,
    pub monthly_peak: f64,
    pub rhc_window: usize,
}

pub fn run_algorithm(algorithm: Algorithm, ctx: &AlgorithmContext, demand: &DemandProfile) -> Result<PolicyRun> {
    let inst = &ctx.instance;
    let ratio_policy = |mode| {
        let options = PolicyOptions {
            mode,
            monthly_peak: ctx.monthly_peak,
            bisection_epsilon: ctx.epsilon,
            initial_ratio: Some(ctx.pi_star),
        };
        run_policy(inst, demand, options)
    };
    let rhc = |future_view| {
        run_rhc(
            inst,
            demand,
            RhcConfig {
                window: ctx.rhc_window,
                future_view,
            },
        )
    };
    match algorithm {
        Algorithm::Offline => {
            let sol = solve_offline_pmd(inst, demand)?;
            Ok(PolicyRun::from_schedule(demand.values(), sol.schedule.values().to_vec(), Vec::new()))
        }
        Algorithm::Fixed => ratio_policy(PolicyMode::FixedRatio(ctx.pi_star)),
        Algorithm::Anytime => ratio_policy(PolicyMode::Anytime),
        Algorithm::AnytimeDeplete => ratio_policy(PolicyMode::AnytimeDepleting),
        Algorithm::ThrAvg => run_threshold(inst, demand, ctx.thr_avg),
        Algorithm::ThrHalf => run_threshold(inst, demand, 0.5 * (inst.demand_lb() + inst.demand_ub())),
        Algorithm::EqlDis => run_equal_discharge(inst, demand),
        Algorithm::EqlPer => run_equal_ratio(inst, demand, ctx.capacity_rate.min(1.0)),
        Algorithm::RhcUb => rhc(FutureView::UpperBound),
        Algorithm::RhcLb => rhc(FutureView::LowerBound),
        Algorithm::RhcHalf => rhc(FutureView::Midpoint),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSource {
    Synthetic(SyntheticConfig),
    /// A day-profile set written by `ingest`.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: ProfileSource,
    /// Capacities as fractions of the average daily energy.
    pub capacity_rates: Vec<f64>,
    /// Rate limits as fractions of `d_ub`; `null` is unbounded.
    #[serde(default = "unbounded_only")]
    pub rate_limits: Vec<Option<f64>>,
    pub algorithms: Vec<Algorithm>,
    /// Thread each month's billed peak through its days.
    #[serde(default)]
    pub monthly: bool,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Leading days used to calibrate `thr-avg`; all days when absent.
    #[serde(default)]
    pub calibration_days: Option<usize>,
    /// RHC look-ahead; a quarter of the horizon when absent.
    #[serde(default)]
    pub rhc_window: Option<usize>,
}

fn unbounded_only() -> Vec<Option<f64>> {
    vec![None]
}

fn default_epsilon() -> f64 {
    DEFAULT_BISECTION_EPSILON
}

impl ExperimentConfig {
    /// Reads a JSON config. A relative profile path is resolved against the
    /// directory holding the config.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut config: ExperimentConfig = serde_json::from_str(&text).map_err(|e| Error::MalformedRecord {
            line: e.line(),
            reason: e.to_string(),
        })?;
        if let ProfileSource::File(p) = &mut config.source {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() || self.capacity_rates.is_empty() || self.rate_limits.is_empty() {
            return Err(Error::InvalidParameter(
                "algorithms, capacity_rates and rate_limits must be nonempty".into(),
            ));
        }
        if let Some(r) = self.capacity_rates.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
            return Err(Error::InvalidParameter(format!("capacity rate {r} must be >= 0")));
        }
        if let Some(r) = self.rate_limits.iter().flatten().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidParameter(format!("rate limit fraction {r} must be > 0")));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("epsilon must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub day: usize,
    pub date: NaiveDate,
    pub capacity_rate: f64,
    pub rate_limit: Option<f64>,
    pub algorithm: Algorithm,
    pub final_peak: f64,
    pub offline_peak: f64,
    pub original_peak: f64,
    pub peak_usage_rate: f64,
    pub ratio: f64,
    pub inventory_spent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub capacity_rate: f64,
    pub rate_limit: Option<f64>,
    pub algorithm: Algorithm,
    pub pi_star: Option<f64>,
    pub mean_final_peak: f64,
    pub std_final_peak: f64,
    pub mean_usage_rate: f64,
    pub std_usage_rate: f64,
    pub empirical_ratio: f64,
}

/// Month peak with and without the billed peak threaded through its days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyRow {
    pub month: String,
    pub capacity_rate: f64,
    pub rate_limit: Option<f64>,
    pub algorithm: Algorithm,
    pub independent_peak: f64,
    pub threaded_peak: f64,
    /// `(independent - threaded) / independent`, in percent.
    pub extra_reduction_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub horizon: usize,
    pub days: usize,
    pub demand_lb: f64,
    pub demand_ub: f64,
    pub average_daily_energy: f64,
    pub runs: Vec<RunRow>,
    pub summaries: Vec<SummaryRow>,
    pub monthly: Vec<MonthlyRow>,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let set = match &config.source {
        ProfileSource::Synthetic(s) => synthetic_days(s)?,
        ProfileSource::File(path) => DayProfileSet::load(path)?,
    };
    run_experiment_on(&set, config)
}

pub fn run_experiment_on(set: &DayProfileSet, config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    set.validate()?;
    let mut report = ExperimentReport {
        horizon: set.horizon(),
        days: set.len(),
        demand_lb: set.demand_lb,
        demand_ub: set.demand_ub,
        average_daily_energy: set.average_daily_energy,
        runs: Vec::new(),
        summaries: Vec::new(),
        monthly: Vec::new(),
    };
    let months = group_by_month(set);
    for &rate_limit in &config.rate_limits {
        for &capacity_rate in &config.capacity_rates {
            let limit = RateLimit::from_option(rate_limit.map(|f| f * set.demand_ub));
            let instance = set.instance(capacity_rate * set.average_daily_energy, limit)?;
            let profiles = set.profiles(&instance)?;
            let offline: Vec<OfflineSolution> = profiles
                .par_iter()
                .map(|d| solve_offline_pmd(&instance, d))
                .collect::<Result<_>>()?;
            let pi_star = if config.algorithms.iter().any(|a| a.needs_ratio()) {
                Some(optimal_cr(&instance)?.pi_star)
            } else {
                None
            };
            let calibration = config.calibration_days.unwrap_or(offline.len()).clamp(1, offline.len());
            let (thr_avg, _) = mean_std(offline[..calibration].iter().map(|o| o.peak));
            let ctx = AlgorithmContext {
                instance,
                pi_star: pi_star.unwrap_or(1.0),
                thr_avg,
                capacity_rate,
                epsilon: config.epsilon,
                monthly_peak: 0.0,
                rhc_window: config
                    .rhc_window
                    .unwrap_or_else(|| RhcConfig::quarter(&instance, FutureView::Midpoint).window),
            };

            for &algorithm in &config.algorithms {
                let runs: Vec<PolicyRun> = profiles
                    .par_iter()
                    .map(|d| run_algorithm(algorithm, &ctx, d))
                    .collect::<Result<_>>()?;
                let metrics = compute_metrics(&profiles, &runs, &offline, capacity_rate)?;
                for (k, (day, run)) in metrics.days.iter().zip(&runs).enumerate() {
                    report.runs.push(RunRow {
                        day: k + 1,
                        date: set.days[k].date,
                        capacity_rate,
                        rate_limit,
                        algorithm,
                        final_peak: day.online_peak,
                        offline_peak: day.offline_peak,
                        original_peak: day.original_peak,
                        peak_usage_rate: day.peak_usage_rate,
                        ratio: day.ratio,
                        inventory_spent: run.inventory_spent,
                    });
                }
                report.summaries.push(SummaryRow {
                    capacity_rate,
                    rate_limit,
                    algorithm,
                    pi_star: pi_star.filter(|_| algorithm.needs_ratio()),
                    mean_final_peak: metrics.mean_online_peak,
                    std_final_peak: metrics.std_online_peak,
                    mean_usage_rate: metrics.mean_usage_rate,
                    std_usage_rate: metrics.std_usage_rate,
                    empirical_ratio: metrics.empirical_ratio,
                });

                if config.monthly && algorithm.uses_monthly_peak() {
                    for (month, days) in &months {
                        let independent = days.iter().map(|&k| runs[k].final_peak).fold(0.0, f64::max);
                        let threaded = threaded_month_peak(algorithm, &ctx, days.iter().map(|&k| &profiles[k]))?;
                        report.monthly.push(MonthlyRow {
                            month: month.clone(),
                            capacity_rate,
                            rate_limit,
                            algorithm,
                            independent_peak: independent,
                            threaded_peak: threaded,
                            extra_reduction_pct: 100.0 * (independent - threaded) / independent,
                        });
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Day indices grouped by calendar month, in date order.
fn group_by_month(set: &DayProfileSet) -> BTreeMap<String, Vec<usize>> {
    let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (k, day) in set.days.iter().enumerate() {
        out.entry(format!("{:04}-{:02}", day.date.year(), day.date.month()))
            .or_default()
            .push(k);
    }
    out
}

/// Runs a month's days in order, telling each day the peak billed so far.
fn threaded_month_peak<'a>(
    algorithm: Algorithm,
    ctx: &AlgorithmContext,
    days: impl Iterator<Item = &'a DemandProfile>,
) -> Result<f64> {
    let mut billed = 0.0f64;
    for demand in days {
        let day_ctx = AlgorithmContext {
            monthly_peak: billed,
            ..*ctx
        };
        let run = run_algorithm(algorithm, &day_ctx, demand)?;
        for (t, (&d, &x)) in demand.values().iter().zip(run.schedule.values()).enumerate() {
            if x > ENERGY_TOL && d - x < billed - 1e-6 * (1.0 + billed) {
                return Err(Error::NumericalFailure(format!(
                    "slot {} discharged to {} below the billed peak {}",
                    t + 1,
                    d - x,
                    billed
                )));
            }
        }
        billed = billed.max(run.final_peak);
    }
    Ok(billed)
}

fn fmt_limit(limit: Option<f64>) -> String {
    limit.map_or_else(|| "unbounded".to_string(), |r| format!("{r}"))
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    /// One comma-separated table per rate limit, plus the monthly table.
    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        let mut limits: Vec<Option<f64>> = Vec::new();
        for s in &self.summaries {
            if !limits.contains(&s.rate_limit) {
                limits.push(s.rate_limit);
            }
        }
        for limit in limits {
            let _ = writeln!(out, "# sweep rate_limit={}", fmt_limit(limit));
            out.push_str(
                "capacity_rate,algorithm,pi_star,mean_final_peak,std_final_peak,mean_usage_rate,std_usage_rate,empirical_ratio\n",
            );
            for s in self.summaries.iter().filter(|s| s.rate_limit == limit) {
                let _ = writeln!(
                    out,
                    "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
                    s.capacity_rate,
                    s.algorithm,
                    s.pi_star.map_or_else(String::new, |p| format!("{p:.6}")),
                    s.mean_final_peak,
                    s.std_final_peak,
                    s.mean_usage_rate,
                    s.std_usage_rate,
                    s.empirical_ratio
                );
            }
            out.push('\n');
        }
        if !self.monthly.is_empty() {
            out.push_str("# monthly\nmonth,capacity_rate,rate_limit,algorithm,independent_peak,threaded_peak,extra_reduction_pct\n");
            for m in &self.monthly {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{:.6},{:.6},{:.4}",
                    m.month,
                    m.capacity_rate,
                    fmt_limit(m.rate_limit),
                    m.algorithm,
                    m.independent_peak,
                    m.threaded_peak,
                    m.extra_reduction_pct
                );
            }
        }
        out
    }

    pub fn runs_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.runs {
            w.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    /// Plot-ready series: `sweep,x,series,metric,mean,stddev`. Capacity
    /// sweeps are emitted per rate limit; rate-limit sweeps per capacity
    /// when more than one finite limit was run.
    pub fn series_csv(&self) -> String {
        let mut out = String::from("sweep,x,series,metric,mean,stddev\n");
        let mut push = |sweep: &str, x: &str, s: &SummaryRow| {
            let _ = writeln!(
                out,
                "{sweep},{x},{},peak_usage_rate,{:.6},{:.6}",
                s.algorithm, s.mean_usage_rate, s.std_usage_rate
            );
            let _ = writeln!(
                out,
                "{sweep},{x},{},final_peak,{:.6},{:.6}",
                s.algorithm, s.mean_final_peak, s.std_final_peak
            );
        };
        for s in &self.summaries {
            let sweep = format!("capacity_rate@rate_limit={}", fmt_limit(s.rate_limit));
            push(&sweep, &format!("{}", s.capacity_rate), s);
        }
        let finite = self
            .summaries
            .iter()
            .filter_map(|s| s.rate_limit)
            .fold(Vec::new(), |mut v: Vec<f64>, r| {
                if !v.contains(&r) {
                    v.push(r);
                }
                v
            });
        if finite.len() > 1 {
            for s in self.summaries.iter().filter(|s| s.rate_limit.is_some()) {
                let sweep = format!("rate_limit@capacity_rate={}", s.capacity_rate);
                push(&sweep, &fmt_limit(s.rate_limit), s);
            }
        }
        out
    }

    /// Writes `report.json`, `summary.txt`, `runs.csv` and `series.csv`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        let write = |name: &str, body: String| {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
        };
        write("report.json", self.to_json()? + "\n")?;
        write("summary.txt", self.summary_text())?;
        write("runs.csv", self.runs_csv()?)?;
        write("series.csv", self.series_csv())?;
        Ok(())
    }

    /// Mean final peak of one algorithm at one sweep point.
    pub fn mean_peak(&self, algorithm: Algorithm, capacity_rate: f64, rate_limit: Option<f64>) -> Option<f64> {
        self.summaries
            .iter()
            .find(|s| s.algorithm == algorithm && s.capacity_rate == capacity_rate && s.rate_limit == rate_limit)
            .map(|s| s.mean_final_peak)
    }
}
