//! Comparison policies: fixed thresholds, equal splits and receding-horizon
//! control. None of them carries a competitive guarantee; they exist to put
//! the ratio-pursuing policies in context.

use serde::{Deserialize, Serialize};

use crate::instance::check_schedule;
use crate::offline::solve_pmd;
use crate::online::PolicyRun;
use crate::{DemandProfile, Error, Instance, Result};

/// What a receding-horizon controller assumes about the slots it cannot see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FutureView {
    UpperBound,
    LowerBound,
    Midpoint,
}

impl FutureView {
    fn forecast(self, instance: &Instance) -> f64 {
        match self {
            FutureView::UpperBound => instance.demand_ub(),
            FutureView::LowerBound => instance.demand_lb(),
            FutureView::Midpoint => 0.5 * (instance.demand_lb() + instance.demand_ub()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RhcConfig {
    pub window: usize,
    pub future_view: FutureView,
}

impl RhcConfig {
    /// A quarter of the horizon, rounded up.
    pub fn quarter(instance: &Instance, future_view: FutureView) -> Self {
        RhcConfig {
            window: instance.horizon().div_ceil(4),
            future_view,
        }
    }

    pub fn validate(&self, instance: &Instance) -> Result<()> {
        if self.window == 0 || self.window > instance.horizon() {
            return Err(Error::InvalidParameter(format!(
                "RHC window {} must lie in 1..={}",
                self.window,
                instance.horizon()
            )));
        }
        Ok(())
    }
}

/// Runs a causal rule `target(t, d_t)` and clamps each request to the rate
/// limit and the inventory left.
fn run_causal<F>(instance: &Instance, demand: &DemandProfile, mut target: F) -> Result<PolicyRun>
where
    F: FnMut(usize, f64, f64) -> f64,
{
    check_length(instance, demand)?;
    let mut remaining = instance.capacity();
    let mut schedule = Vec::with_capacity(demand.len());
    for (t, &d) in demand.values().iter().enumerate() {
        let x = target(t, d, remaining)
            .min(instance.rate_limit().cap(d))
            .min(remaining)
            .max(0.0);
        remaining = (remaining - x).max(0.0);
        schedule.push(x);
    }
    debug_assert!(check_schedule(instance, demand.values(), &schedule).is_ok());
    Ok(PolicyRun::from_schedule(demand.values(), schedule, Vec::new()))
}

fn check_length(instance: &Instance, demand: &DemandProfile) -> Result<()> {
    if demand.len() != instance.horizon() {
        return Err(Error::LengthMismatch {
            expected: instance.horizon(),
            actual: demand.len(),
        });
    }
    Ok(())
}

/// Shaves every slot down to `threshold` while inventory lasts.
pub fn run_threshold(instance: &Instance, demand: &DemandProfile, threshold: f64) -> Result<PolicyRun> {
    if !(threshold >= 0.0 && threshold.is_finite()) {
        return Err(Error::InvalidParameter(format!("threshold {threshold} must be >= 0")));
    }
    run_causal(instance, demand, |_, d, _| (d - threshold).max(0.0))
}

/// Discharges `c / T` per slot. Quota a slot cannot use is forfeited.
pub fn run_equal_discharge(instance: &Instance, demand: &DemandProfile) -> Result<PolicyRun> {
    let quota = instance.capacity() / instance.horizon() as f64;
    run_causal(instance, demand, |_, d, _| quota.min(d))
}

/// Discharges the fraction `rate` of every slot's demand.
pub fn run_equal_ratio(instance: &Instance, demand: &DemandProfile, rate: f64) -> Result<PolicyRun> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidParameter(format!("capacity rate {rate} must lie in [0, 1]")));
    }
    run_causal(instance, demand, |_, d, _| rate * d)
}

/// Receding-horizon control. Each slot solves the offline problem on
/// `[d_t, f, ..., f]` with all remaining inventory and commits the first
/// action. Slots beyond the window are ignored.
pub fn run_rhc(instance: &Instance, demand: &DemandProfile, config: RhcConfig) -> Result<PolicyRun> {
    config.validate(instance)?;
    let forecast = config.future_view.forecast(instance);
    run_rhc_with(instance, demand, config.window, |_, len, window| {
        window.resize(len, forecast);
    })
}

/// Receding-horizon control that sees the true future demand inside its
/// window. With `window = T` it reproduces the offline optimum.
pub fn run_rhc_clairvoyant(instance: &Instance, demand: &DemandProfile, window: usize) -> Result<PolicyRun> {
    RhcConfig {
        window,
        future_view: FutureView::UpperBound,
    }
    .validate(instance)?;
    let values = demand.values();
    run_rhc_with(instance, demand, window, |t, len, w| {
        w.extend_from_slice(&values[t + 1..t + len]);
    })
}

fn run_rhc_with<F>(instance: &Instance, demand: &DemandProfile, window: usize, mut fill: F) -> Result<PolicyRun>
where
    F: FnMut(usize, usize, &mut Vec<f64>),
{
    check_length(instance, demand)?;
    let horizon = instance.horizon();
    let mut remaining = instance.capacity();
    let mut schedule = Vec::with_capacity(horizon);
    let mut profile = Vec::with_capacity(window);
    for (t, &d) in demand.values().iter().enumerate() {
        let len = window.min(horizon - t);
        profile.clear();
        profile.push(d);
        fill(t, len, &mut profile);
        let plan = solve_pmd(&profile, remaining, instance.rate_limit())?;
        let x = plan.schedule.values()[0]
            .min(instance.rate_limit().cap(d))
            .min(remaining)
            .max(0.0);
        log::debug!(
            "rhc slot {}: window {} allotted {:.6} kWh, committed {:.6}",
            t + 1,
            len,
            remaining,
            x
        );
        remaining = (remaining - x).max(0.0);
        schedule.push(x);
    }
    Ok(PolicyRun::from_schedule(demand.values(), schedule, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offline::solve_offline_pmd;
    use crate::RateLimit;
    use approx::assert_abs_diff_eq;

    fn small() -> Instance {
        Instance::new(1.0, RateLimit::Unbounded, 2, 1.0, 2.0).unwrap()
    }

    fn profile(inst: &Instance, v: &[f64]) -> DemandProfile {
        DemandProfile::new(inst, v.to_vec()).unwrap()
    }

    fn assert_schedule(run: &PolicyRun, expected: &[f64]) {
        assert_eq!(run.schedule.values().len(), expected.len());
        for (a, b) in run.schedule.values().iter().zip(expected) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn threshold_shaves_to_level() {
        let inst = small();
        let run = run_threshold(&inst, &profile(&inst, &[2.0, 1.0]), 1.5).unwrap();
        assert_schedule(&run, &[0.5, 0.0]);
        assert_abs_diff_eq!(run.final_peak, 1.5, epsilon = 1e-12);

        let run = run_threshold(&inst, &profile(&inst, &[2.0, 1.0]), 2.0).unwrap();
        assert_schedule(&run, &[0.0, 0.0]);
        assert!(run_threshold(&inst, &profile(&inst, &[2.0, 1.0]), -1.0).is_err());
    }

    #[test]
    fn zero_threshold_on_boundary_instance_spends_everything() {
        let inst = Instance::new(3.0, RateLimit::Unbounded, 3, 1.0, 2.0).unwrap();
        let run = run_threshold(&inst, &profile(&inst, &[1.0, 1.0, 1.0]), 0.0).unwrap();
        assert_schedule(&run, &[1.0, 1.0, 1.0]);
        assert_abs_diff_eq!(run.final_peak, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn equal_discharge_forfeits_unused_quota() {
        let inst = Instance::new(8.0, RateLimit::Unbounded, 4, 2.0, 5.0).unwrap();
        let run = run_equal_discharge(&inst, &DemandProfile::constant(&inst, 3.0).unwrap()).unwrap();
        assert_schedule(&run, &[2.0; 4]);

        let inst = Instance::new(4.0, RateLimit::Unbounded, 2, 2.0, 5.0).unwrap();
        let run = run_equal_discharge(&inst, &profile(&inst, &[2.0, 2.0])).unwrap();
        assert_schedule(&run, &[2.0, 2.0]);
        let inst = Instance::new(3.0, RateLimit::Unbounded, 1, 3.0, 5.0).unwrap();
        assert_schedule(&run_equal_discharge(&inst, &profile(&inst, &[3.0])).unwrap(), &[3.0]);

        let inst = small();
        let run = run_equal_discharge(&inst, &profile(&inst, &[2.0, 1.0])).unwrap();
        assert_schedule(&run, &[0.5, 0.5]);
    }

    #[test]
    fn equal_discharge_caps_at_demand() {
        let inst = Instance::new(2.0, RateLimit::Unbounded, 2, 1.0, 4.0).unwrap();
        let run = run_equal_discharge(&inst, &profile(&inst, &[1.0, 4.0])).unwrap();
        // Quota is 1.0 per slot; nothing is carried into slot 2.
        assert_schedule(&run, &[1.0, 1.0]);
        let inst = Instance::new(3.0, RateLimit::Unbounded, 2, 1.5, 4.0).unwrap();
        let run = run_equal_discharge(&inst, &profile(&inst, &[1.5, 4.0])).unwrap();
        assert_schedule(&run, &[1.5, 1.5]);
    }

    #[test]
    fn equal_ratio() {
        let inst = small();
        let run = run_equal_ratio(&inst, &profile(&inst, &[2.0, 1.0]), 0.25).unwrap();
        assert_schedule(&run, &[0.5, 0.25]);
        let run = run_equal_ratio(&inst, &profile(&inst, &[2.0, 1.0]), 0.0).unwrap();
        assert_schedule(&run, &[0.0, 0.0]);
        // Full ratio runs until inventory binds.
        let run = run_equal_ratio(&inst, &profile(&inst, &[1.5, 2.0]), 1.0).unwrap();
        assert_schedule(&run, &[1.0, 0.0]);
        assert!(run_equal_ratio(&inst, &profile(&inst, &[2.0, 1.0]), 1.5).is_err());
    }

    #[test]
    fn rate_limit_clamps_baselines() {
        let inst = Instance::new(2.0, RateLimit::Bounded(0.3), 2, 1.0, 2.0).unwrap();
        let run = run_threshold(&inst, &profile(&inst, &[2.0, 2.0]), 1.0).unwrap();
        assert_schedule(&run, &[0.3, 0.3]);
    }

    #[test]
    fn myopic_rhc_discharges_maximally() {
        let inst = small();
        let cfg = RhcConfig {
            window: 1,
            future_view: FutureView::UpperBound,
        };
        let run = run_rhc(&inst, &profile(&inst, &[1.0, 2.0]), cfg).unwrap();
        assert_schedule(&run, &[1.0, 0.0]);
        assert_abs_diff_eq!(run.final_peak, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn rhc_views_differ() {
        let inst = Instance::new(1.0, RateLimit::Unbounded, 3, 1.0, 3.0).unwrap();
        let d = profile(&inst, &[2.0, 1.0, 1.0]);
        let lb = run_rhc(&inst, &d, RhcConfig { window: 2, future_view: FutureView::LowerBound }).unwrap();
        let ub = run_rhc(&inst, &d, RhcConfig { window: 2, future_view: FutureView::UpperBound }).unwrap();
        // Assuming a low future spends the whole budget on slot 1.
        assert_abs_diff_eq!(lb.schedule.values()[0], 1.0, epsilon = 1e-12);
        // Assuming a high future keeps it for slot 2: level v solves
        // [2 - v] + [3 - v] = 1, so v = 2 and slot 1 gets nothing.
        assert_abs_diff_eq!(ub.schedule.values()[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn full_window_clairvoyant_rhc_is_offline() {
        let inst = Instance::new(630.0, RateLimit::Unbounded, 10, 300.0, 600.0).unwrap();
        let d = profile(&inst, &[379.5, 411.0, 411.0, 442.5, 442.5, 600.0, 600.0, 600.0, 600.0, 600.0]);
        let rhc = run_rhc_clairvoyant(&inst, &d, 10).unwrap();
        let off = solve_offline_pmd(&inst, &d).unwrap();
        assert_schedule(&rhc, off.schedule.values());
        assert_abs_diff_eq!(rhc.final_peak, off.peak, epsilon = 1e-9);
    }

    #[test]
    fn quarter_window() {
        let inst = Instance::new(1.0, RateLimit::Unbounded, 10, 1.0, 2.0).unwrap();
        assert_eq!(RhcConfig::quarter(&inst, FutureView::Midpoint).window, 3);
        assert!(RhcConfig { window: 11, future_view: FutureView::Midpoint }.validate(&inst).is_err());
    }
}
