//! Online discharge policies that pursue a competitive ratio.
//!
//! The fixed-ratio policy discharges `[d_t - pi v(d^t)]^+` in every slot. The
//! anytime policy re-derives the smallest ratio it can still guarantee after
//! each observation. It bisects on the worst-case future discharge
//! requirement, which is a family of small LPs (`AOCR-THR`).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cr::optimal_cr;
use crate::instance::ENERGY_TOL;
use crate::lp::{solve_lp, LinearProgram, LpStatus, Relation, Sense};
use crate::offline::offline_peak;
use crate::{DemandProfile, DischargeSchedule, Error, Instance, OnlineState, Result};

pub const DEFAULT_BISECTION_EPSILON: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    FixedRatio(f64),
    Anytime,
    /// Anytime ratios, plus any inventory the worst case no longer needs.
    AnytimeDepleting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyOptions {
    pub mode: PolicyMode,
    /// Peak already billed this month; 0 disables the monthly floor.
    pub monthly_peak: f64,
    pub bisection_epsilon: f64,
    /// Starting ratio for the anytime modes; `None` computes `pi*`.
    pub initial_ratio: Option<f64>,
}

impl Default for PolicyOptions {
    fn default() -> Self {
        PolicyOptions {
            mode: PolicyMode::Anytime,
            monthly_peak: 0.0,
            bisection_epsilon: DEFAULT_BISECTION_EPSILON,
            initial_ratio: None,
        }
    }
}

impl PolicyOptions {
    pub fn fixed(pi: f64) -> Self {
        PolicyOptions {
            mode: PolicyMode::FixedRatio(pi),
            ..Default::default()
        }
    }

    pub fn anytime() -> Self {
        Self::default()
    }

    pub fn depleting() -> Self {
        PolicyOptions {
            mode: PolicyMode::AnytimeDepleting,
            ..Default::default()
        }
    }

    pub fn with_monthly_peak(mut self, peak: f64) -> Self {
        self.monthly_peak = peak;
        self
    }

    pub fn with_initial_ratio(mut self, ratio: f64) -> Self {
        self.initial_ratio = Some(ratio);
        self
    }

    fn validate(&self) -> Result<()> {
        if let PolicyMode::FixedRatio(pi) = self.mode {
            if !(pi >= 1.0 && pi.is_finite()) {
                return Err(Error::InvalidParameter(format!("fixed ratio {pi} must be >= 1")));
            }
        }
        if !(self.bisection_epsilon > 0.0 && self.bisection_epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bisection epsilon {} must be > 0",
                self.bisection_epsilon
            )));
        }
        if !self.monthly_peak.is_finite() || self.monthly_peak < 0.0 {
            return Err(Error::InvalidParameter("monthly peak must be >= 0".into()));
        }
        Ok(())
    }
}

/// Events worth surfacing from a run; none occur on a well-posed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    /// The requested discharge exceeded inventory or the rate limit.
    ClampEngaged { slot: usize, requested: f64, granted: f64 },
    /// The bisection interval was empty and its lower end was infeasible.
    RatioInfeasible { slot: usize, ratio: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRun {
    pub schedule: DischargeSchedule,
    pub ratio_trajectory: Vec<f64>,
    pub final_peak: f64,
    pub inventory_spent: f64,
    pub diagnostics: Vec<Diagnostic>,
}

impl PolicyRun {
    pub(crate) fn from_schedule(demand: &[f64], schedule: Vec<f64>, ratios: Vec<f64>) -> Self {
        let schedule = DischargeSchedule::from_values(schedule);
        PolicyRun {
            final_peak: schedule.peak_against(demand),
            inventory_spent: schedule.total(),
            schedule,
            ratio_trajectory: ratios,
            diagnostics: Vec::new(),
        }
    }

    pub fn clamped(&self) -> bool {
        self.diagnostics
            .iter()
            .any(|d| matches!(d, Diagnostic::ClampEngaged { .. }))
    }
}

/// Caps a requested discharge at the rate limit and the remaining inventory.
fn clamp_discharge(instance: &Instance, state: &OnlineState, demand: f64, requested: f64) -> f64 {
    instance
        .rate_limit()
        .cap(demand)
        .min(state.remaining(instance))
        .min(requested)
        .max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub discharge: f64,
    /// `[d_t - pi v(d^t)]^+` before clamping.
    pub requested: f64,
    pub reference_peak: f64,
}

impl StepOutcome {
    pub fn clamped(&self) -> bool {
        self.discharge < self.requested - ENERGY_TOL * (1.0 + self.requested)
    }
}

/// One slot of the fixed-ratio policy.
pub fn pcr_step(instance: &Instance, state: &OnlineState, pi: f64, demand: f64) -> Result<StepOutcome> {
    instance.check_demand(state.slot_index(), demand)?;
    let v = offline_peak(instance, &instance.reference_profile(&state.prefix_with(demand))?)?;
    let requested = (demand - pi * v).max(0.0);
    Ok(StepOutcome {
        discharge: clamp_discharge(instance, state, demand, requested),
        requested,
        reference_peak: v,
    })
}

pub fn run_pcr_pmd(instance: &Instance, pi: f64, demand: &DemandProfile) -> Result<PolicyRun> {
    run_policy(instance, demand, PolicyOptions::fixed(pi))
}

pub fn run_anytime(instance: &Instance, demand: &DemandProfile, options: PolicyOptions) -> Result<PolicyRun> {
    run_policy(instance, demand, options)
}

pub fn run_policy(instance: &Instance, demand: &DemandProfile, options: PolicyOptions) -> Result<PolicyRun> {
    if demand.len() != instance.horizon() {
        return Err(Error::LengthMismatch {
            expected: instance.horizon(),
            actual: demand.len(),
        });
    }
    let mut ctl = PolicyController::new(*instance, options)?;
    for &d in demand.values() {
        ctl.step(d)?;
    }
    Ok(ctl.finish())
}

/// Data shared by every `AOCR-THR` program of one slot.
struct SlotContext<'a> {
    instance: &'a Instance,
    /// Observed demands including the current slot.
    prefix: Vec<f64>,
    reference_peak: f64,
    running_peak: f64,
    floor: f64,
}

impl<'a> SlotContext<'a> {
    fn new(instance: &'a Instance, state: &OnlineState, demand: f64) -> Result<Self> {
        instance.check_demand(state.slot_index(), demand)?;
        let prefix = state.prefix_with(demand);
        let reference_peak = offline_peak(instance, &instance.reference_profile(&prefix)?)?;
        Ok(SlotContext {
            instance,
            prefix,
            reference_peak,
            running_peak: state.running_peak(),
            floor: state.peak_floor(),
        })
    }

    fn slot(&self) -> usize {
        self.prefix.len()
    }

    fn current_term(&self, pi: f64) -> f64 {
        let d = self.prefix[self.slot() - 1];
        (d - (pi * self.reference_peak).max(self.floor)).max(0.0)
    }

    /// `AOCR-THR(pi, {t+1, ..., last})` with 1-based `last`.
    ///
    /// With `compact`, each block's discharges on the padded slots after
    /// its own slot share one column. Those slots have identical rows, so
    /// averaging any feasible choice keeps it feasible and the optimum is
    /// unchanged, while the program shrinks by about half.
    fn program(&self, pi: f64, last: usize, compact: bool) -> Result<LinearProgram> {
        let inst = self.instance;
        let horizon = inst.horizon();
        let t = self.slot();
        if last < t || last > horizon {
            return Err(Error::InvalidIndexSet(format!(
                "future window must end in {t}..={horizon}, got {last}"
            )));
        }
        // Column layout: x for slots t+1..=last, then per block u followed
        // by its discharge columns.
        let m = last - t;
        let x = |slot0: usize| slot0 - t;
        let width = |b: usize| {
            let i0 = t + b;
            if compact {
                1 + (i0 + 1) + usize::from(i0 + 1 < horizon)
            } else {
                1 + horizon
            }
        };
        let mut starts = Vec::with_capacity(m);
        let mut n = m;
        for b in 0..m {
            starts.push(n);
            n += width(b);
        }
        let u = |b: usize| starts[b];
        let delta = |b: usize, j: usize| starts[b] + 1 + j;

        let mut objective = vec![0.0; n];
        for b in 0..m {
            objective[x(t + b)] = 1.0;
            objective[u(b)] = -pi;
        }
        let mut lp = LinearProgram::new(Sense::Maximize, objective);
        lp.objective_constant = self.current_term(pi);

        let (lb, ub) = (inst.demand_lb(), inst.demand_ub());
        let u_floor = if pi > 0.0 { self.floor / pi } else { 0.0 };
        let rate = inst.rate_limit().value();
        for b in 0..m {
            let i0 = t + b;
            lp.set_bounds(x(i0), lb.max(self.running_peak), Some(ub))?;
            lp.set_bounds(u(b), u_floor, None)?;
            let explicit = if compact { i0 + 1 } else { horizon };
            let mut energy: Vec<(usize, f64)> = (0..explicit).map(|j| (delta(b, j), 1.0)).collect();
            if compact && i0 + 1 < horizon {
                energy.push((delta(b, i0 + 1), (horizon - i0 - 1) as f64));
            }
            lp.add_sparse(&energy, Relation::Le, inst.capacity())?;
            let columns = if compact { explicit + usize::from(i0 + 1 < horizon) } else { horizon };
            for j in 0..columns {
                lp.set_bounds(delta(b, j), 0.0, rate)?;
                if j < t {
                    lp.add_sparse(&[(delta(b, j), -1.0), (u(b), -1.0)], Relation::Le, -self.prefix[j])?;
                } else if j <= i0 {
                    lp.add_sparse(&[(x(j), 1.0), (delta(b, j), -1.0), (u(b), -1.0)], Relation::Le, 0.0)?;
                } else {
                    lp.add_sparse(&[(delta(b, j), -1.0), (u(b), -1.0)], Relation::Le, -lb)?;
                }
            }
        }
        Ok(lp)
    }

    fn program_value(&self, pi: f64, last: usize) -> Result<f64> {
        if last == self.slot() {
            return Ok(self.current_term(pi));
        }
        let sol = solve_lp(&self.program(pi, last, true)?)?;
        match sol.status {
            LpStatus::Optimal => Ok(sol.value),
            status => Err(Error::NumericalFailure(format!(
                "AOCR-THR at slot {} up to {last} returned {status:?}",
                self.slot()
            ))),
        }
    }

    /// `max_k AOCR-THR(pi, {t+1..k})`.
    fn requirement(&self, pi: f64) -> Result<f64> {
        let values: Vec<f64> = (self.slot()..=self.instance.horizon())
            .into_par_iter()
            .map(|k| self.program_value(pi, k))
            .collect::<Result<_>>()?;
        Ok(values.into_iter().fold(f64::NEG_INFINITY, f64::max))
    }

    /// `Some(q)` when `max_k AOCR-THR(pi, {t+1..k}) <= budget`, `None` when
    /// some program exceeds it. The program that last exceeded is tried
    /// first and the scan stops at the first violation, so infeasible
    /// probes usually cost a single solve.
    fn fits(&self, pi: f64, budget: f64, hint: &mut Option<usize>) -> Result<Option<f64>> {
        let mut q = f64::NEG_INFINITY;
        if let Some(k) = *hint {
            let v = self.program_value(pi, k)?;
            if v > budget {
                return Ok(None);
            }
            q = v;
        }
        for k in (self.slot()..=self.instance.horizon()).rev() {
            if Some(k) == *hint {
                continue;
            }
            let v = self.program_value(pi, k)?;
            if v > budget {
                *hint = Some(k);
                return Ok(None);
            }
            q = q.max(v);
        }
        Ok(Some(q))
    }
}

/// Builds `AOCR-THR(pi, {t+1, ..., last})` for the slot after `state`, where
/// `demand` is that slot's observation and `last` is 1-based.
pub fn build_aocr_thr(
    instance: &Instance,
    state: &OnlineState,
    demand: f64,
    pi: f64,
    last: usize,
) -> Result<LinearProgram> {
    SlotContext::new(instance, state, demand)?.program(pi, last, false)
}

/// Worst-case energy still needed when pursuing `pi` from the current slot.
pub fn worst_case_requirement(instance: &Instance, state: &OnlineState, demand: f64, pi: f64) -> Result<f64> {
    SlotContext::new(instance, state, demand)?.requirement(pi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnytimeRatio {
    pub ratio: f64,
    /// The lower end of the search interval was already feasible.
    pub early_exit: bool,
    /// `max_I AOCR-THR` at the lower end when `early_exit`, else at `ratio`
    /// if it was evaluated.
    pub requirement: Option<f64>,
    pub reference_peak: f64,
    pub lower: f64,
    /// The interval was empty and its lower end infeasible.
    pub infeasible: bool,
}

fn energy_tol(instance: &Instance) -> f64 {
    1e-7 * (1.0 + instance.capacity())
}

/// Smallest ratio whose worst-case future requirement fits the remaining
/// inventory, by bisection down to `epsilon`.
pub fn anytime_ratio(instance: &Instance, state: &OnlineState, demand: f64, epsilon: f64) -> Result<AnytimeRatio> {
    let ctx = SlotContext::new(instance, state, demand)?;
    search_ratio(&ctx, state.remaining(instance), state.prev_ratio(), epsilon)
}

fn search_ratio(ctx: &SlotContext<'_>, remaining: f64, prev_ratio: f64, epsilon: f64) -> Result<AnytimeRatio> {
    let v = ctx.reference_peak;
    if v <= 0.0 {
        return Err(Error::DegenerateOfflinePeak);
    }
    let tol = energy_tol(ctx.instance);
    // A ratio whose current discharge exceeds the rate limit is not
    // achievable, so the search starts where the current slot fits.
    let demand = ctx.prefix[ctx.slot() - 1];
    let rate_floor = ctx.instance.rate_limit().value().map_or(0.0, |r| demand - r);
    let mut lower = ctx.floor.max(rate_floor) / v;
    // The floor is usually the previous ratio times an earlier reference
    // peak, so dividing it back out can land an ulp above that ratio.
    if lower > prev_ratio && lower <= prev_ratio * (1.0 + 1e-12) {
        lower = prev_ratio;
    }
    let q_lb = ctx.requirement(lower)?;
    let mut out = AnytimeRatio {
        ratio: lower,
        early_exit: true,
        requirement: Some(q_lb),
        reference_peak: v,
        lower,
        infeasible: false,
    };
    if q_lb <= remaining + tol {
        return Ok(out);
    }
    out.early_exit = false;
    out.requirement = None;
    let mut lo = lower;
    let mut hi = prev_ratio.max(lower);
    if hi <= lo {
        out.ratio = hi;
        out.infeasible = true;
        return Ok(out);
    }
    let mut hint = None;
    while hi - lo >= epsilon {
        let mid = 0.5 * (lo + hi);
        match ctx.fits(mid, remaining + tol, &mut hint)? {
            None => lo = mid,
            Some(q) => {
                hi = mid;
                out.requirement = Some(q);
            }
        }
    }
    out.ratio = hi;
    Ok(out)
}

/// Depleting discharge: the base amount plus the inventory that the worst
/// case no longer needs.
///
/// Before the final slot the result never pushes grid usage below the peak
/// floor, since usage under the floor lowers no bill while the energy could
/// still hold a later ratio down. In the final slot no later ratio exists and
/// only the physical limits apply: rate, demand and remaining inventory.
pub fn depleting_amount(
    instance: &Instance,
    state: &OnlineState,
    demand: f64,
    base: f64,
    requirement: f64,
) -> Result<f64> {
    let remaining = state.remaining(instance);
    let slack = remaining - requirement;
    if slack < -energy_tol(instance) {
        return Err(Error::NegativeSlack {
            remaining,
            required: requirement,
        });
    }
    let mut amount = clamp_discharge(instance, state, demand, base + slack.max(0.0));
    if state.slot_index() < instance.horizon() {
        amount = amount.min((demand - state.peak_floor()).max(0.0));
    }
    // Rounding in `d_t - floor` versus `d_t - pi v` must not perturb the
    // inventory when there is nothing to deplete.
    if amount <= base + 1e-12 * (1.0 + instance.capacity()) {
        return Ok(base);
    }
    Ok(amount)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    /// 1-based slot just decided.
    pub slot: usize,
    pub demand: f64,
    pub discharge: f64,
    pub ratio: f64,
    pub reference_peak: f64,
    pub early_exit: bool,
    pub remaining: f64,
}

/// Streaming driver: feed one demand per slot, get the discharge back.
#[derive(Debug, Clone)]
pub struct PolicyController {
    instance: Instance,
    options: PolicyOptions,
    state: OnlineState,
    trajectory: Vec<f64>,
    diagnostics: Vec<Diagnostic>,
}

impl PolicyController {
    pub fn new(instance: Instance, options: PolicyOptions) -> Result<Self> {
        options.validate()?;
        let initial = match (options.mode, options.initial_ratio) {
            (PolicyMode::FixedRatio(pi), _) => pi,
            (_, Some(r)) => {
                if !(r > 0.0 && r.is_finite()) {
                    return Err(Error::InvalidParameter(format!("initial ratio {r} must be > 0")));
                }
                r
            }
            (_, None) => optimal_cr(&instance)?.pi_star,
        };
        Ok(PolicyController {
            instance,
            options,
            state: OnlineState::new(initial, options.monthly_peak),
            trajectory: Vec::with_capacity(instance.horizon()),
            diagnostics: Vec::new(),
        })
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn state(&self) -> &OnlineState {
        &self.state
    }

    pub fn is_finished(&self) -> bool {
        self.state.completed() >= self.instance.horizon()
    }

    pub fn step(&mut self, demand: f64) -> Result<StepReport> {
        if self.is_finished() {
            return Err(Error::InvalidParameter(format!(
                "all {} slots already decided",
                self.instance.horizon()
            )));
        }
        let inst = &self.instance;
        let slot = self.state.slot_index();
        let (requested, discharge, ratio, v, early_exit) = match self.options.mode {
            PolicyMode::FixedRatio(pi) => {
                let out = pcr_step(inst, &self.state, pi, demand)?;
                // With a monthly floor, never discharge below the billed peak.
                let floor = self.state.monthly_peak();
                let requested = if floor > 0.0 {
                    (demand - (pi * out.reference_peak).max(floor)).max(0.0)
                } else {
                    out.requested
                };
                let granted = clamp_discharge(inst, &self.state, demand, requested);
                (requested, granted, pi, out.reference_peak, false)
            }
            PolicyMode::Anytime | PolicyMode::AnytimeDepleting => {
                let ctx = SlotContext::new(inst, &self.state, demand)?;
                let res = search_ratio(
                    &ctx,
                    self.state.remaining(inst),
                    self.state.prev_ratio(),
                    self.options.bisection_epsilon,
                )?;
                if res.infeasible {
                    self.diagnostics.push(Diagnostic::RatioInfeasible { slot, ratio: res.ratio });
                }
                let base = (demand - res.ratio * res.reference_peak).max(0.0);
                let granted = clamp_discharge(inst, &self.state, demand, base);
                // Before the final slot only the early-exit branch carries redundant
                // inventory; in the final slot the bisection remainder is
                // redundant too.
                let last = slot == inst.horizon();
                let discharge = if self.options.mode == PolicyMode::AnytimeDepleting && (res.early_exit || last) {
                    // The bisection may end without probing its final ratio.
                    let q = match res.requirement {
                        Some(q) => q,
                        None => ctx.requirement(res.ratio)?.min(self.state.remaining(inst)),
                    };
                    depleting_amount(inst, &self.state, demand, granted, q)?
                } else {
                    granted
                };
                let requested = base.max(discharge);
                (requested, discharge, res.ratio, res.reference_peak, res.early_exit)
            }
        };
        if discharge < requested - ENERGY_TOL * (1.0 + requested) {
            self.diagnostics.push(Diagnostic::ClampEngaged {
                slot,
                requested,
                granted: discharge,
            });
        }
        self.state.commit(demand, discharge, ratio);
        self.trajectory.push(ratio);
        Ok(StepReport {
            slot,
            demand,
            discharge,
            ratio,
            reference_peak: v,
            early_exit,
            remaining: self.state.remaining(&self.instance),
        })
    }

    pub fn finish(self) -> PolicyRun {
        let mut run = PolicyRun::from_schedule(
            self.state.observed(),
            self.state.actions().to_vec(),
            self.trajectory,
        );
        run.diagnostics = self.diagnostics;
        run
    }
}
