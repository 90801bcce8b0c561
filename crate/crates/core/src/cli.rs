//! Command-line front end. `peakmin <subcommand> --help` lists the flags.
//!
//! Exit status is 0 on success, 1 for domain errors (printed as
//! `error: <Variant>: <message>`) and 2 for usage errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::LevelFilter;

use crate::baselines::run_threshold;
use crate::cr::optimal_cr;
use crate::harness::{
    ingest_trace, parse_profile_text, read_transactions, run_algorithm, run_experiment, Algorithm, AlgorithmContext,
    DayProfileSet, ExperimentConfig, ProfileSource, SlottingConfig,
};
use crate::offline::solve_offline_pmd;
use crate::online::{PolicyController, PolicyMode, PolicyOptions, PolicyRun, DEFAULT_BISECTION_EPSILON};
use crate::{DemandProfile, Error, Instance, RateLimit, Result};

#[derive(Debug, Parser)]
#[command(name = "peakmin", version, about = "Online peak-demand minimization with limited storage")]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct InstanceArgs {
    /// Storage capacity c in kWh.
    #[arg(short = 'c', long = "capacity", allow_negative_numbers = true)]
    pub capacity: Option<f64>,
    /// Capacity as a fraction of the average daily energy (day-set inputs).
    #[arg(long)]
    pub capacity_rate: Option<f64>,
    /// Horizon T; checked against the input length when both are given.
    #[arg(short = 'T', long = "horizon")]
    pub horizon: Option<usize>,
    /// Per-slot discharge limit in kWh; unbounded when omitted.
    #[arg(long)]
    pub rate_limit: Option<f64>,
    #[arg(long = "d-lb", allow_negative_numbers = true)]
    pub d_lb: Option<f64>,
    #[arg(long = "d-ub")]
    pub d_ub: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Offline optimum of a demand profile.
    Solve {
        /// Profile file (one kWh value per line) or a day-profile set.
        input: PathBuf,
        #[command(flatten)]
        instance: InstanceArgs,
    },
    /// Optimal competitive ratio of an instance.
    Cr {
        #[command(flatten)]
        instance: InstanceArgs,
    },
    /// Run one policy slot by slot.
    Simulate {
        input: PathBuf,
        /// fixed, anytime, anytime-deplete, thr, thr-avg, thr-half, eql-dis,
        /// eql-per, rhc-ub, rhc-lb, rhc-half or offline.
        #[arg(long)]
        algo: String,
        #[command(flatten)]
        instance: InstanceArgs,
        /// Ratio for `fixed` (and the starting ratio of the anytime
        /// policies); `auto` computes the optimal competitive ratio.
        #[arg(long, default_value = "auto")]
        pi: String,
        #[arg(long, default_value_t = DEFAULT_BISECTION_EPSILON)]
        epsilon: f64,
        /// Threshold in kWh for `thr`.
        #[arg(long)]
        threshold: Option<f64>,
        /// RHC look-ahead in slots; a quarter of T by default.
        #[arg(long)]
        window: Option<usize>,
        /// Peak already billed this month.
        #[arg(long, default_value_t = 0.0)]
        monthly_peak: f64,
        /// Only this day (1-based) of a day-profile set.
        #[arg(long)]
        day: Option<usize>,
    },
    /// Convert a transaction trace into a day-profile set.
    Ingest {
        input: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 15)]
        slot_minutes: u32,
        #[arg(long, default_value = "12:00")]
        on_peak_start: String,
        #[arg(long, default_value = "17:00")]
        on_peak_end: String,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long = "d-lb")]
        d_lb: Option<f64>,
        #[arg(long = "d-ub")]
        d_ub: Option<f64>,
    },
    /// Run an experiment config and write its reports.
    Experiment {
        config: PathBuf,
        /// Directory for report.json, summary.txt, runs.csv and series.csv.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Overrides the seed of a synthetic source.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    init_logging(cli.verbose);
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Solve { input, instance } => solve(&input, &instance, out),
        Command::Cr { instance } => cr(&instance, out),
        Command::Simulate {
            input,
            algo,
            instance,
            pi,
            epsilon,
            threshold,
            window,
            monthly_peak,
            day,
        } => {
            let sim = Simulation {
                algo,
                pi,
                epsilon,
                threshold,
                window,
                monthly_peak,
            };
            simulate(&input, &instance, &sim, day, out)
        }
        Command::Ingest {
            input,
            output,
            slot_minutes,
            on_peak_start,
            on_peak_end,
            scale,
            d_lb,
            d_ub,
        } => {
            let bounds = match (d_lb, d_ub) {
                (Some(lo), Some(hi)) => Some((lo, hi)),
                (None, None) => None,
                _ => return Err(Error::InvalidParameter("--d-lb and --d-ub go together".into())),
            };
            let config = SlottingConfig {
                slot_minutes,
                on_peak_start: parse_clock(&on_peak_start)?,
                on_peak_end: parse_clock(&on_peak_end)?,
                scale_factor: scale,
                bounds,
            };
            let set = ingest_trace(&read_transactions(&input)?, &config)?;
            match output {
                Some(path) => {
                    set.save(&path)?;
                    writeln!(
                        out,
                        "days {} horizon {} d_lb {:.6} d_ub {:.6} average_daily_energy {:.6}",
                        set.len(),
                        set.horizon(),
                        set.demand_lb,
                        set.demand_ub,
                        set.average_daily_energy
                    )?;
                }
                None => writeln!(out, "{}", set.to_json()?)?,
            }
            Ok(())
        }
        Command::Experiment {
            config,
            output,
            seed,
            epsilon,
        } => {
            let mut config = ExperimentConfig::load(&config)?;
            if let (Some(seed), ProfileSource::Synthetic(s)) = (seed, &mut config.source) {
                s.seed = seed;
            }
            if let Some(eps) = epsilon {
                config.epsilon = eps;
            }
            let report = run_experiment(&config)?;
            if let Some(dir) = output {
                report.write_to_dir(&dir)?;
            }
            write!(out, "{}", report.summary_text())?;
            Ok(())
        }
    }
}

fn parse_clock(s: &str) -> Result<chrono::NaiveTime> {
    chrono::NaiveTime::parse_from_str(s, "%H:%M")
        .or_else(|_| chrono::NaiveTime::parse_from_str(s, "%H:%M:%S"))
        .map_err(|_| Error::InvalidParameter(format!("bad clock time `{s}`, expected HH:MM")))
}

/// A demand input: a bare profile or a set of days.
enum Input {
    Profile(Vec<f64>),
    Days(DayProfileSet),
}

fn read_input(path: &Path) -> Result<Input> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        DayProfileSet::from_json(&text).map(Input::Days)
    } else {
        parse_profile_text(&text).map(Input::Profile)
    }
}

impl InstanceArgs {
    fn rate_limit(&self) -> RateLimit {
        RateLimit::from_option(self.rate_limit)
    }

    fn check_horizon(&self, actual: usize) -> Result<()> {
        match self.horizon {
            Some(t) if t != actual => Err(Error::LengthMismatch { expected: t, actual }),
            _ => Ok(()),
        }
    }

    /// Instance for a bare profile. Bounds default to the profile's extremes.
    fn for_profile(&self, values: &[f64]) -> Result<Instance> {
        self.check_horizon(values.len())?;
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let capacity = match (self.capacity, self.capacity_rate) {
            (Some(c), _) => c,
            (None, Some(r)) => r * values.iter().sum::<f64>(),
            (None, None) => return Err(Error::InvalidParameter("missing -c/--capacity".into())),
        };
        Instance::new(
            capacity,
            self.rate_limit(),
            values.len(),
            self.d_lb.unwrap_or(lo),
            self.d_ub.unwrap_or(hi),
        )
    }

    /// Instance for a day set. Bounds default to the set's.
    fn for_days(&self, set: &DayProfileSet) -> Result<Instance> {
        self.check_horizon(set.horizon())?;
        let capacity = match (self.capacity, self.capacity_rate) {
            (Some(c), _) => c,
            (None, Some(r)) => r * set.average_daily_energy,
            (None, None) => return Err(Error::InvalidParameter("missing -c or --capacity-rate".into())),
        };
        Instance::new(
            capacity,
            self.rate_limit(),
            set.horizon(),
            self.d_lb.unwrap_or(set.demand_lb),
            self.d_ub.unwrap_or(set.demand_ub),
        )
    }

    fn standalone(&self) -> Result<Instance> {
        let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| Error::InvalidParameter(format!("missing {flag}")));
        let horizon = self
            .horizon
            .ok_or_else(|| Error::InvalidParameter("missing -T/--horizon".into()))?;
        Instance::new(
            need(self.capacity, "-c/--capacity")?,
            self.rate_limit(),
            horizon,
            need(self.d_lb, "--d-lb")?,
            need(self.d_ub, "--d-ub")?,
        )
    }
}

/// Both input kinds as `(label, instance, profiles)`.
fn resolve(input: &Input, args: &InstanceArgs, day: Option<usize>) -> Result<(Instance, Vec<(String, DemandProfile)>)> {
    match input {
        Input::Profile(values) => {
            let inst = args.for_profile(values)?;
            Ok((inst, vec![(String::new(), DemandProfile::new(&inst, values.clone())?)]))
        }
        Input::Days(set) => {
            let inst = args.for_days(set)?;
            let profiles = set.profiles(&inst)?;
            let labelled: Vec<_> = set
                .days
                .iter()
                .zip(profiles)
                .enumerate()
                .map(|(k, (d, p))| (format!("# day {} {}", k + 1, d.date), p))
                .collect();
            match day {
                None => Ok((inst, labelled)),
                Some(k) if (1..=labelled.len()).contains(&k) => Ok((inst, vec![labelled[k - 1].clone()])),
                Some(k) => Err(Error::InvalidParameter(format!(
                    "day {k} outside 1..={}",
                    labelled.len()
                ))),
            }
        }
    }
}

fn solve(input: &Path, args: &InstanceArgs, out: &mut dyn Write) -> Result<()> {
    let (inst, profiles) = resolve(&read_input(input)?, args, None)?;
    for (label, demand) in &profiles {
        if !label.is_empty() {
            writeln!(out, "{label}")?;
        }
        let sol = solve_offline_pmd(&inst, demand)?;
        writeln!(out, "threshold_v {:.6}", sol.threshold_v)?;
        writeln!(out, "peak {:.6}", sol.peak)?;
        writeln!(out, "total_discharge {:.6}", sol.schedule.total())?;
        writeln!(out, "slot demand discharge grid")?;
        for (t, (&d, &x)) in demand.values().iter().zip(sol.schedule.values()).enumerate() {
            writeln!(out, "{} {:.6} {:.6} {:.6}", t + 1, d, x, d - x)?;
        }
    }
    Ok(())
}

fn cr(args: &InstanceArgs, out: &mut dyn Write) -> Result<()> {
    let inst = args.standalone()?;
    let res = optimal_cr(&inst)?;
    writeln!(out, "pi_star {:.6}", res.pi_star)?;
    writeln!(out, "tau {}", res.tau)?;
    let set: Vec<String> = res.argmax_set.iter().map(usize::to_string).collect();
    writeln!(out, "index_set {}", set.join(","))?;
    let witness: Vec<String> = res.witness_profile.iter().map(|x| format!("{x:.6}")).collect();
    writeln!(out, "witness {}", witness.join(" "))?;
    Ok(())
}

struct Simulation {
    algo: String,
    pi: String,
    epsilon: f64,
    threshold: Option<f64>,
    window: Option<usize>,
    monthly_peak: f64,
}

fn simulate(input: &Path, args: &InstanceArgs, sim: &Simulation, day: Option<usize>, out: &mut dyn Write) -> Result<()> {
    let data = read_input(input)?;
    let (inst, profiles) = resolve(&data, args, day)?;
    let algorithm = match sim.algo.as_str() {
        "thr" => None,
        name => Some(name.parse::<Algorithm>()?),
    };
    let threshold = match (algorithm, sim.threshold) {
        (None, None) => return Err(Error::InvalidParameter("`thr` needs --threshold".into())),
        (_, t) => t.unwrap_or(0.0),
    };
    let pi = match sim.pi.as_str() {
        "auto" => None,
        s => Some(
            s.parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("--pi expects `auto` or a number, got `{s}`")))?,
        ),
    };
    let pi_star = match (pi, algorithm) {
        (Some(p), _) => p,
        (None, Some(a)) if a.uses_monthly_peak() => optimal_cr(&inst)?.pi_star,
        _ => 1.0,
    };
    let capacity_rate = match &data {
        Input::Days(set) => inst.capacity() / set.average_daily_energy,
        Input::Profile(values) => inst.capacity() / values.iter().sum::<f64>(),
    };
    // With a single profile the calibration set is that profile.
    let offline_peaks: Vec<f64> = profiles
        .iter()
        .map(|(_, d)| solve_offline_pmd(&inst, d).map(|s| s.peak))
        .collect::<Result<_>>()?;
    let ctx = AlgorithmContext {
        instance: inst,
        pi_star,
        thr_avg: offline_peaks.iter().sum::<f64>() / offline_peaks.len() as f64,
        capacity_rate,
        epsilon: sim.epsilon,
        monthly_peak: sim.monthly_peak,
        rhc_window: sim.window.unwrap_or_else(|| inst.horizon().div_ceil(4)),
    };

    for ((label, demand), offline) in profiles.iter().zip(offline_peaks) {
        if !label.is_empty() {
            writeln!(out, "{label}")?;
        }
        writeln!(out, "slot demand discharge grid ratio remaining")?;
        let run = match algorithm {
            Some(a) if a.uses_monthly_peak() => stream_policy(a, &ctx, demand, out)?,
            Some(a) => print_run(&inst, demand, &run_algorithm(a, &ctx, demand)?, out)?,
            None => print_run(&inst, demand, &run_threshold(&inst, demand, threshold)?, out)?,
        };
        writeln!(out, "final_peak {:.6}", run.final_peak)?;
        writeln!(out, "offline_peak {:.6}", offline)?;
        writeln!(out, "ratio {:.6}", run.final_peak / offline)?;
        writeln!(out, "inventory_spent {:.6}", run.inventory_spent)?;
        for diag in &run.diagnostics {
            writeln!(out, "diagnostic {}", serde_json::to_string(diag).unwrap_or_default())?;
        }
    }
    Ok(())
}

/// Steps a ratio-pursuing policy and prints each decision as it is made.
fn stream_policy(algorithm: Algorithm, ctx: &AlgorithmContext, demand: &DemandProfile, out: &mut dyn Write) -> Result<PolicyRun> {
    let mode = match algorithm {
        Algorithm::Fixed => PolicyMode::FixedRatio(ctx.pi_star),
        Algorithm::AnytimeDeplete => PolicyMode::AnytimeDepleting,
        _ => PolicyMode::Anytime,
    };
    let options = PolicyOptions {
        mode,
        monthly_peak: ctx.monthly_peak,
        bisection_epsilon: ctx.epsilon,
        initial_ratio: Some(ctx.pi_star),
    };
    let mut ctl = PolicyController::new(ctx.instance, options)?;
    for &d in demand.values() {
        let r = ctl.step(d)?;
        writeln!(
            out,
            "{} {:.6} {:.6} {:.6} {:.6} {:.6}",
            r.slot,
            r.demand,
            r.discharge,
            r.demand - r.discharge,
            r.ratio,
            r.remaining
        )?;
        out.flush()?;
    }
    Ok(ctl.finish())
}

fn print_run(inst: &Instance, demand: &DemandProfile, run: &PolicyRun, out: &mut dyn Write) -> Result<PolicyRun> {
    let mut remaining = inst.capacity();
    for (t, (&d, &x)) in demand.values().iter().zip(run.schedule.values()).enumerate() {
        remaining -= x;
        writeln!(out, "{} {:.6} {:.6} {:.6} - {:.6}", t + 1, d, x, d - x, remaining.max(0.0))?;
    }
    Ok(run.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("peakmin").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn cr_on_small_instance() {
        let (code, out, _) = run_args(&["cr", "-c", "1", "-T", "2", "--d-lb", "1", "--d-ub", "2"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("pi_star 1.333333\n"), "{out}");
    }

    #[test]
    fn domain_errors_use_variant_names() {
        let (code, _, err) = run_args(&["cr", "-c", "5", "-T", "2", "--d-lb", "1", "--d-ub", "2"]);
        assert_eq!(code, 1);
        assert!(err.starts_with("error: CapacityExceedsMinDemand:"), "{err}");
        let (code, _, err) = run_args(&["cr", "-T", "2", "--d-lb", "1", "--d-ub", "2"]);
        assert_eq!(code, 1);
        assert!(err.starts_with("error: InvalidParameter:"), "{err}");
    }

    #[test]
    fn usage_errors_exit_2() {
        let (code, _, err) = run_args(&["frobnicate"]);
        assert_eq!(code, 2);
        assert!(err.contains("Usage"), "{err}");
        let (code, out, _) = run_args(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("simulate"));
    }

    #[test]
    fn clock_parsing() {
        assert_eq!(parse_clock("12:30").unwrap(), chrono::NaiveTime::from_hms_opt(12, 30, 0).unwrap());
        assert!(parse_clock("noon").is_err());
    }
}
