//! Static problem data, demand and discharge vectors, and the causal state
//! threaded through an online run.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Absolute tolerance for comparing energies (kWh).
pub const ENERGY_TOL: f64 = 1e-9;

/// Per-slot discharge limit.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateLimit {
    #[default]
    Unbounded,
    Bounded(f64),
}

impl RateLimit {
    pub fn from_option(limit: Option<f64>) -> Self {
        match limit {
            Some(v) => RateLimit::Bounded(v),
            None => RateLimit::Unbounded,
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            RateLimit::Unbounded => None,
            RateLimit::Bounded(v) => Some(v),
        }
    }

    /// `min(limit, x)`; the identity when unbounded.
    pub fn cap(self, x: f64) -> f64 {
        match self {
            RateLimit::Unbounded => x,
            RateLimit::Bounded(v) => v.min(x),
        }
    }

    pub fn is_bounded(self) -> bool {
        matches!(self, RateLimit::Bounded(_))
    }
}

/// Validated problem data: capacity `c`, rate limit, horizon `T` and the
/// uniform per-slot demand bounds `[d_lb, d_ub]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance", into = "RawInstance")]
pub struct Instance {
    capacity: f64,
    rate_limit: RateLimit,
    horizon: usize,
    demand_lb: f64,
    demand_ub: f64,
}

#[derive(Serialize, Deserialize)]
struct RawInstance {
    capacity: f64,
    #[serde(default)]
    rate_limit: Option<f64>,
    horizon: usize,
    demand_lb: f64,
    demand_ub: f64,
}

impl TryFrom<RawInstance> for Instance {
    type Error = Error;

    fn try_from(raw: RawInstance) -> Result<Self> {
        Instance::new(
            raw.capacity,
            RateLimit::from_option(raw.rate_limit),
            raw.horizon,
            raw.demand_lb,
            raw.demand_ub,
        )
    }
}

impl From<Instance> for RawInstance {
    fn from(inst: Instance) -> Self {
        RawInstance {
            capacity: inst.capacity,
            rate_limit: inst.rate_limit.value(),
            horizon: inst.horizon,
            demand_lb: inst.demand_lb,
            demand_ub: inst.demand_ub,
        }
    }
}

impl Instance {
    /// Validates the raw fields. The capacity may not exceed `T * d_lb`.
    pub fn new(
        capacity: f64,
        rate_limit: RateLimit,
        horizon: usize,
        demand_lb: f64,
        demand_ub: f64,
    ) -> Result<Self> {
        for (what, v) in [
            ("capacity", capacity),
            ("d_lb", demand_lb),
            ("d_ub", demand_ub),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite(what));
            }
        }
        if horizon == 0 {
            return Err(Error::ZeroHorizon);
        }
        if demand_lb <= 0.0 {
            return Err(Error::NonPositiveBound {
                what: "d_lb",
                value: demand_lb,
            });
        }
        if demand_lb > demand_ub {
            return Err(Error::InvertedBounds {
                lower: demand_lb,
                upper: demand_ub,
            });
        }
        if let RateLimit::Bounded(r) = rate_limit {
            if !r.is_finite() {
                return Err(Error::NonFinite("rate_limit"));
            }
            if r <= 0.0 {
                return Err(Error::NonPositiveBound {
                    what: "rate_limit",
                    value: r,
                });
            }
        }
        if capacity < 0.0 {
            return Err(Error::NegativeCapacity(capacity));
        }
        let limit = horizon as f64 * demand_lb;
        if capacity > limit + ENERGY_TOL {
            return Err(Error::CapacityExceedsMinDemand { capacity, limit });
        }
        Ok(Instance {
            capacity,
            rate_limit,
            horizon,
            demand_lb,
            demand_ub,
        })
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn rate_limit(&self) -> RateLimit {
        self.rate_limit
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn demand_lb(&self) -> f64 {
        self.demand_lb
    }

    pub fn demand_ub(&self) -> f64 {
        self.demand_ub
    }

    /// Same instance with a different capacity.
    pub fn with_capacity(&self, capacity: f64) -> Result<Self> {
        Instance::new(
            capacity,
            self.rate_limit,
            self.horizon,
            self.demand_lb,
            self.demand_ub,
        )
    }

    /// Same instance with a different rate limit.
    pub fn with_rate_limit(&self, rate_limit: RateLimit) -> Result<Self> {
        Instance::new(
            self.capacity,
            rate_limit,
            self.horizon,
            self.demand_lb,
            self.demand_ub,
        )
    }

    /// True when `c = T * d_lb`, where the all-`d_lb` profile has offline peak 0.
    pub fn at_capacity_boundary(&self) -> bool {
        (self.horizon as f64 * self.demand_lb - self.capacity).abs() <= ENERGY_TOL
    }

    pub(crate) fn check_demand(&self, slot: usize, value: f64) -> Result<()> {
        if !value.is_finite()
            || value < self.demand_lb - ENERGY_TOL
            || value > self.demand_ub + ENERGY_TOL
        {
            return Err(Error::DemandOutOfBounds {
                slot,
                value,
                lower: self.demand_lb,
                upper: self.demand_ub,
            });
        }
        Ok(())
    }

    /// `[d_1 .. d_t, d_lb, .., d_lb]`: the observed prefix padded with the
    /// most optimistic future.
    pub fn reference_profile(&self, prefix: &[f64]) -> Result<DemandProfile> {
        if prefix.is_empty() || prefix.len() > self.horizon {
            return Err(Error::PrefixOutOfBounds(format!(
                "prefix length {} not in 1..={}",
                prefix.len(),
                self.horizon
            )));
        }
        for (k, &d) in prefix.iter().enumerate() {
            if self.check_demand(k + 1, d).is_err() {
                return Err(Error::PrefixOutOfBounds(format!(
                    "slot {} demand {} outside [{}, {}]",
                    k + 1,
                    d,
                    self.demand_lb,
                    self.demand_ub
                )));
            }
        }
        let mut values = Vec::with_capacity(self.horizon);
        values.extend_from_slice(prefix);
        values.resize(self.horizon, self.demand_lb);
        Ok(DemandProfile { values })
    }
}

/// Length-`T` net demand vector with every entry inside the instance bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DemandProfile {
    values: Vec<f64>,
}

impl DemandProfile {
    pub fn new(instance: &Instance, values: Vec<f64>) -> Result<Self> {
        if values.len() != instance.horizon() {
            return Err(Error::LengthMismatch {
                expected: instance.horizon(),
                actual: values.len(),
            });
        }
        for (k, &d) in values.iter().enumerate() {
            instance.check_demand(k + 1, d)?;
        }
        Ok(DemandProfile { values })
    }

    /// Profile filled with a constant demand.
    pub fn constant(instance: &Instance, value: f64) -> Result<Self> {
        DemandProfile::new(instance, vec![value; instance.horizon()])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl AsRef<[f64]> for DemandProfile {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Per-slot discharge decisions.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DischargeSchedule {
    values: Vec<f64>,
}

impl DischargeSchedule {
    pub fn from_values(values: Vec<f64>) -> Self {
        DischargeSchedule { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `max_t (d_t - delta_t)`.
    pub fn peak_against(&self, demand: &[f64]) -> f64 {
        demand
            .iter()
            .zip(&self.values)
            .map(|(d, x)| d - x)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Checks nonnegativity, the per-slot cap `min(rate, d_t)` and the
    /// capacity constraint, each within [`ENERGY_TOL`] (scaled by magnitude
    /// for the capacity sum).
    pub fn validate(&self, instance: &Instance, demand: &[f64]) -> Result<()> {
        check_schedule(instance, demand, &self.values)
    }
}

pub(crate) fn check_schedule(instance: &Instance, demand: &[f64], schedule: &[f64]) -> Result<()> {
    if demand.len() != schedule.len() {
        return Err(Error::InfeasibleSchedule(format!(
            "schedule has {} slots, demand has {}",
            schedule.len(),
            demand.len()
        )));
    }
    let tol = ENERGY_TOL * (1.0 + instance.capacity());
    for (k, (&d, &x)) in demand.iter().zip(schedule).enumerate() {
        if !x.is_finite() || x < -tol {
            return Err(Error::InfeasibleSchedule(format!(
                "slot {} discharge {} is negative",
                k + 1,
                x
            )));
        }
        let cap = instance.rate_limit().cap(d);
        if x > cap + tol {
            return Err(Error::InfeasibleSchedule(format!(
                "slot {} discharge {} exceeds min(rate, demand) = {}",
                k + 1,
                x,
                cap
            )));
        }
    }
    let total: f64 = schedule.iter().sum();
    if total > instance.capacity() + tol {
        return Err(Error::InfeasibleSchedule(format!(
            "total discharge {} exceeds capacity {}",
            total,
            instance.capacity()
        )));
    }
    Ok(())
}

/// Causal state of an online run after `t - 1` completed slots.
///
/// `observed` and `actions` always have the same length; the demand of the
/// slot being decided is passed alongside the state, never stored in it
/// until the decision is committed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineState {
    observed: Vec<f64>,
    actions: Vec<f64>,
    inventory_used: f64,
    running_peak: f64,
    monthly_peak: f64,
    prev_ratio: f64,
}

impl OnlineState {
    /// Fresh state. `initial_ratio` is the ratio the run starts from
    /// (the optimal competitive ratio for the anytime policy).
    pub fn new(initial_ratio: f64, monthly_peak: f64) -> Self {
        OnlineState {
            observed: Vec::new(),
            actions: Vec::new(),
            inventory_used: 0.0,
            running_peak: 0.0,
            monthly_peak: monthly_peak.max(0.0),
            prev_ratio: initial_ratio,
        }
    }

    /// 1-based index of the slot about to be decided.
    pub fn slot_index(&self) -> usize {
        self.observed.len() + 1
    }

    pub fn completed(&self) -> usize {
        self.observed.len()
    }

    pub fn observed(&self) -> &[f64] {
        &self.observed
    }

    pub fn actions(&self) -> &[f64] {
        &self.actions
    }

    pub fn inventory_used(&self) -> f64 {
        self.inventory_used
    }

    pub fn remaining(&self, instance: &Instance) -> f64 {
        (instance.capacity() - self.inventory_used).max(0.0)
    }

    /// `max_{k<t} (d_k - delta_k)`, or 0 before the first slot.
    pub fn running_peak(&self) -> f64 {
        self.running_peak
    }

    pub fn monthly_peak(&self) -> f64 {
        self.monthly_peak
    }

    /// `max(running peak, monthly peak)`: grid usage below this level never
    /// lowers the bill.
    pub fn peak_floor(&self) -> f64 {
        self.running_peak.max(self.monthly_peak)
    }

    pub fn prev_ratio(&self) -> f64 {
        self.prev_ratio
    }

    /// Observed prefix extended by the current demand.
    pub fn prefix_with(&self, demand: f64) -> Vec<f64> {
        let mut prefix = Vec::with_capacity(self.observed.len() + 1);
        prefix.extend_from_slice(&self.observed);
        prefix.push(demand);
        prefix
    }

    /// Records the decision for the current slot.
    pub fn commit(&mut self, demand: f64, discharge: f64, ratio: f64) {
        self.observed.push(demand);
        self.actions.push(discharge);
        self.inventory_used += discharge;
        self.running_peak = self.running_peak.max(demand - discharge);
        self.prev_ratio = ratio;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn validates_reference_instance() {
        let inst = Instance::new(630.0, RateLimit::Unbounded, 10, 300.0, 600.0).unwrap();
        assert_eq!(inst.horizon(), 10);
        assert!(!inst.at_capacity_boundary());
    }

    #[test]
    fn zero_capacity_single_slot_is_legal() {
        assert!(Instance::new(0.0, RateLimit::Unbounded, 1, 1.0, 1.0).is_ok());
    }

    #[test]
    fn rejects_bad_instances() {
        let err = Instance::new(11.0, RateLimit::Unbounded, 10, 1.0, 2.0).unwrap_err();
        assert_eq!(err.name(), "CapacityExceedsMinDemand");
        let err = Instance::new(1.0, RateLimit::Unbounded, 10, 0.0, 2.0).unwrap_err();
        assert_eq!(err.name(), "NonPositiveBound");
        let err = Instance::new(1.0, RateLimit::Unbounded, 10, 3.0, 2.0).unwrap_err();
        assert_eq!(err.name(), "InvertedBounds");
        let err = Instance::new(1.0, RateLimit::Unbounded, 0, 1.0, 2.0).unwrap_err();
        assert_eq!(err.name(), "ZeroHorizon");
        let err = Instance::new(1.0, RateLimit::Bounded(0.0), 2, 1.0, 2.0).unwrap_err();
        assert_eq!(err.name(), "NonPositiveBound");
        let err = Instance::new(-1.0, RateLimit::Unbounded, 2, 1.0, 2.0).unwrap_err();
        assert_eq!(err.name(), "NegativeCapacity");
    }

    #[test]
    fn reference_profile_pads_with_lower_bound() {
        let inst = Instance::new(1.0, RateLimit::Unbounded, 3, 1.0, 2.0).unwrap();
        assert_eq!(inst.reference_profile(&[2.0]).unwrap().values(), &[2.0, 1.0, 1.0]);

        let inst = Instance::new(630.0, RateLimit::Unbounded, 10, 300.0, 600.0).unwrap();
        let r = inst.reference_profile(&[379.5]).unwrap();
        assert_eq!(r.values()[0], 379.5);
        assert!(r.values()[1..].iter().all(|&v| v == 300.0));

        let inst = Instance::new(1.0, RateLimit::Unbounded, 2, 1.0, 2.0).unwrap();
        assert_eq!(inst.reference_profile(&[2.0, 2.0]).unwrap().values(), &[2.0, 2.0]);
    }

    #[test]
    fn reference_profile_rejects_bad_prefix() {
        let inst = Instance::new(1.0, RateLimit::Unbounded, 2, 1.0, 2.0).unwrap();
        for prefix in [&[][..], &[3.0], &[1.0, 1.0, 1.0], &[0.5]] {
            let err = inst.reference_profile(prefix).unwrap_err();
            assert_eq!(err.name(), "PrefixOutOfBounds");
        }
    }

    #[test]
    fn state_tracks_running_peak_and_inventory() {
        let inst = Instance::new(1.0, RateLimit::Unbounded, 3, 1.0, 2.0).unwrap();
        let mut s = OnlineState::new(1.5, 0.0);
        assert_eq!(s.slot_index(), 1);
        assert_eq!(s.running_peak(), 0.0);
        s.commit(2.0, 0.5, 1.2);
        s.commit(1.0, 0.0, 1.2);
        assert_eq!(s.slot_index(), 3);
        assert_eq!(s.running_peak(), 1.5);
        assert!((s.remaining(&inst) - 0.5).abs() < 1e-12);
        assert_eq!(s.prefix_with(1.7), vec![2.0, 1.0, 1.7]);
    }

    proptest! {
        #[test]
        fn reference_extension_changes_one_entry(
            prefix in prop::collection::vec(1.0f64..=2.0, 1..5),
            next in 1.0f64..=2.0,
        ) {
            let inst = Instance::new(1.0, RateLimit::Unbounded, 6, 1.0, 2.0).unwrap();
            let a = inst.reference_profile(&prefix).unwrap();
            let mut longer = prefix.clone();
            longer.push(next);
            let b = inst.reference_profile(&longer).unwrap();
            let changed = a.values().iter().zip(b.values()).filter(|(x, y)| x != y).count();
            prop_assert!(changed <= 1);
            prop_assert_eq!(a.values()[..prefix.len()].to_vec(), prefix);
        }

        #[test]
        fn profile_constructor_enforces_bounds(values in prop::collection::vec(0.0f64..3.0, 4)) {
            let inst = Instance::new(1.0, RateLimit::Unbounded, 4, 1.0, 2.0).unwrap();
            let inside = values.iter().all(|v| (1.0..=2.0).contains(v));
            prop_assert_eq!(DemandProfile::new(&inst, values).is_ok(), inside);
        }
    }
}
