//! Clairvoyant optimum of the peak-minimizing discharge problem, and the
//! weighted energy-plus-peak cost used to evaluate schedules.

use serde::{Deserialize, Serialize};

use crate::instance::{check_schedule, ENERGY_TOL};
use crate::{DemandProfile, DischargeSchedule, Error, Instance, RateLimit, Result};

/// Optimal offline schedule together with its water level and peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineSolution {
    pub schedule: DischargeSchedule,
    /// Water level `v` with `sum_t [d_t - v]^+ = budget`.
    pub threshold_v: f64,
    /// `max_t (d_t - delta_t)` of the schedule.
    pub peak: f64,
}

/// Level `v` with `sum_t [d_t - v]^+ = budget`, solved exactly on the sorted
/// breakpoints. A zero budget returns `max_t d_t`.
pub fn water_fill_threshold(demands: &[f64], budget: f64) -> Result<f64> {
    if demands.is_empty() {
        return Err(Error::InvalidParameter("empty demand vector".into()));
    }
    if !budget.is_finite() || budget < -ENERGY_TOL {
        return Err(Error::InvalidParameter(format!("budget {budget} must be >= 0")));
    }
    let mut sorted = demands.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    if budget <= 0.0 {
        return Ok(sorted[0]);
    }
    let total: f64 = sorted.iter().sum();
    if budget > total + ENERGY_TOL * (1.0 + total) {
        return Err(Error::BudgetExceedsTotalDemand { budget, total });
    }
    let budget = budget.min(total);
    let mut head = 0.0;
    for k in 1..=sorted.len() {
        head += sorted[k - 1];
        let v = (head - budget) / k as f64;
        let next = sorted.get(k).copied().unwrap_or(f64::NEG_INFINITY);
        if v >= next {
            return Ok(v.max(0.0));
        }
    }
    unreachable!("the last segment always contains the level")
}

/// Offline optimum for an arbitrary demand slice. The budget is capped at the
/// total demand so windows shorter than the full horizon are accepted.
pub fn solve_pmd(demands: &[f64], capacity: f64, rate_limit: RateLimit) -> Result<OfflineSolution> {
    let total: f64 = demands.iter().sum();
    let budget = capacity.min(total).max(0.0);
    let v = water_fill_threshold(demands, budget)?;
    let schedule: Vec<f64> = match rate_limit {
        RateLimit::Unbounded => demands.iter().map(|&d| (d - v).max(0.0)).collect(),
        RateLimit::Bounded(r) => {
            let lift = demands
                .iter()
                .map(|&d| (d - r - v).max(0.0))
                .fold(0.0, f64::max);
            demands.iter().map(|&d| (d - lift - v).max(0.0)).collect()
        }
    };
    let schedule = DischargeSchedule::from_values(schedule);
    let peak = schedule.peak_against(demands);
    Ok(OfflineSolution {
        schedule,
        threshold_v: v,
        peak,
    })
}

pub fn solve_offline_pmd(instance: &Instance, demand: &DemandProfile) -> Result<OfflineSolution> {
    if demand.len() != instance.horizon() {
        return Err(Error::LengthMismatch {
            expected: instance.horizon(),
            actual: demand.len(),
        });
    }
    solve_pmd(demand.values(), instance.capacity(), instance.rate_limit())
}

/// `v(d)`: the optimal offline peak.
pub fn offline_peak(instance: &Instance, demand: &DemandProfile) -> Result<f64> {
    solve_offline_pmd(instance, demand).map(|s| s.peak)
}

/// Per-slot energy prices and the peak price of the cost-minimizing variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmdWeights {
    energy_weights: Vec<f64>,
    peak_weight: f64,
}

impl CmdWeights {
    /// Requires `w_p >= T * max_{i,j} (w_e[i] - w_e[j])`, under which the
    /// weighted problem shares the peak problem's offline optimum.
    pub fn new(energy_weights: Vec<f64>, peak_weight: f64) -> Result<Self> {
        if energy_weights.is_empty() {
            return Err(Error::InvalidParameter("no energy weights".into()));
        }
        if energy_weights.iter().any(|w| !w.is_finite()) || !peak_weight.is_finite() {
            return Err(Error::NonFinite("weights"));
        }
        let hi = energy_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = energy_weights.iter().copied().fold(f64::INFINITY, f64::min);
        let required = energy_weights.len() as f64 * (hi - lo);
        if peak_weight < required - ENERGY_TOL {
            return Err(Error::WeightsViolateAssumption {
                peak_weight,
                required,
            });
        }
        Ok(CmdWeights {
            energy_weights,
            peak_weight,
        })
    }

    pub fn energy_weights(&self) -> &[f64] {
        &self.energy_weights
    }

    pub fn peak_weight(&self) -> f64 {
        self.peak_weight
    }
}

/// `sum_t w_e[t] (d_t - delta_t) + w_p max_t (d_t - delta_t)`.
pub fn evaluate_cmd_cost(
    instance: &Instance,
    weights: &CmdWeights,
    demand: &[f64],
    schedule: &[f64],
) -> Result<f64> {
    if weights.energy_weights.len() != demand.len() {
        return Err(Error::LengthMismatch {
            expected: demand.len(),
            actual: weights.energy_weights.len(),
        });
    }
    check_schedule(instance, demand, schedule)?;
    let energy: f64 = weights
        .energy_weights
        .iter()
        .zip(demand.iter().zip(schedule))
        .map(|(w, (d, x))| w * (d - x))
        .sum();
    let peak = demand
        .iter()
        .zip(schedule)
        .map(|(d, x)| d - x)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(energy + weights.peak_weight * peak)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{solve_lp, LinearProgram, LpStatus, Relation, Sense};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn dhat() -> Vec<f64> {
        vec![379.5, 411.0, 411.0, 442.5, 442.5, 600.0, 600.0, 600.0, 600.0, 600.0]
    }

    fn appendix_instance() -> Instance {
        Instance::new(630.0, RateLimit::Unbounded, 10, 300.0, 600.0).unwrap()
    }

    #[test]
    fn water_fill_examples() {
        assert_eq!(water_fill_threshold(&[5.0, 3.0, 4.0], 0.0).unwrap(), 5.0);
        assert_eq!(water_fill_threshold(&dhat(), 630.0).unwrap(), 474.0);
        assert_eq!(water_fill_threshold(&[10.0; 4], 8.0).unwrap(), 8.0);
        assert_eq!(water_fill_threshold(&[2.0, 1.0], 3.0).unwrap(), 0.0);
        let err = water_fill_threshold(&[2.0, 1.0], 3.5).unwrap_err();
        assert_eq!(err.name(), "BudgetExceedsTotalDemand");
    }

    #[test]
    fn appendix_offline_solution() {
        let inst = appendix_instance();
        let d = DemandProfile::new(&inst, dhat()).unwrap();
        let sol = solve_offline_pmd(&inst, &d).unwrap();
        assert_eq!(sol.peak, 474.0);
        assert_eq!(sol.threshold_v, 474.0);
        for (t, &x) in sol.schedule.values().iter().enumerate() {
            let expected = if t >= 5 { 126.0 } else { 0.0 };
            assert_abs_diff_eq!(x, expected, epsilon = 1e-9);
        }
        sol.schedule.validate(&inst, d.values()).unwrap();
    }

    #[test]
    fn rate_limit_lifts_the_level() {
        let inst = Instance::new(6.0, RateLimit::Bounded(3.0), 3, 2.0, 10.0).unwrap();
        let d = DemandProfile::new(&inst, vec![10.0, 2.0, 2.0]).unwrap();
        let sol = solve_offline_pmd(&inst, &d).unwrap();
        assert_eq!(sol.threshold_v, 4.0);
        assert_eq!(sol.schedule.values(), &[3.0, 0.0, 0.0]);
        assert_eq!(sol.peak, 7.0);
        assert!((grid_min_peak(d.values(), 6.0, RateLimit::Bounded(3.0), 0.01) - 7.0).abs() < 1e-9);
    }

    #[test]
    fn symmetric_split() {
        let inst = Instance::new(8.0, RateLimit::Unbounded, 4, 10.0, 10.0).unwrap();
        let d = DemandProfile::constant(&inst, 10.0).unwrap();
        let sol = solve_offline_pmd(&inst, &d).unwrap();
        assert_eq!(sol.schedule.values(), &[2.0; 4]);
        assert_eq!(sol.peak, 8.0);
    }

    #[test]
    fn boundary_and_reference_peaks() {
        let inst = Instance::new(10.0, RateLimit::Unbounded, 5, 2.0, 3.0).unwrap();
        assert_eq!(offline_peak(&inst, &DemandProfile::constant(&inst, 2.0).unwrap()).unwrap(), 0.0);

        let inst = Instance::new(1.0, RateLimit::Unbounded, 2, 1.0, 2.0).unwrap();
        let reference = inst.reference_profile(&[2.0]).unwrap();
        assert_eq!(offline_peak(&inst, &reference).unwrap(), 1.0);
    }

    #[test]
    fn zero_capacity_reports_max_as_threshold() {
        let sol = solve_pmd(&[3.0, 5.0], 0.0, RateLimit::Unbounded).unwrap();
        assert_eq!(sol.threshold_v, 5.0);
        assert_eq!(sol.schedule.values(), &[0.0, 0.0]);
        assert_eq!(sol.peak, 5.0);
    }

    #[test]
    fn cmd_cost_examples() {
        let inst = Instance::new(1.0, RateLimit::Unbounded, 2, 1.0, 3.0).unwrap();
        let w = CmdWeights::new(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(evaluate_cmd_cost(&inst, &w, &[3.0, 1.0], &[1.0, 0.0]).unwrap(), 2.0);
        let w = CmdWeights::new(vec![1.0, 1.0], 2.0).unwrap();
        assert_eq!(evaluate_cmd_cost(&inst, &w, &[3.0, 1.0], &[1.0, 0.0]).unwrap(), 7.0);

        let err = evaluate_cmd_cost(&inst, &w, &[3.0, 1.0], &[1.5, 0.0]).unwrap_err();
        assert_eq!(err.name(), "InfeasibleSchedule");
        let err = CmdWeights::new(vec![1.0, 2.0], 1.0).unwrap_err();
        assert_eq!(err.name(), "WeightsViolateAssumption");

        let inst = appendix_instance();
        let d = dhat();
        let total: f64 = d.iter().sum();
        assert_abs_diff_eq!(total, 5086.5, epsilon = 1e-9);
        let sol = solve_pmd(&d, 630.0, RateLimit::Unbounded).unwrap();
        let w = CmdWeights::new(vec![0.1; 10], 10.0).unwrap();
        let cost = evaluate_cmd_cost(&inst, &w, &d, sol.schedule.values()).unwrap();
        assert_abs_diff_eq!(cost, 0.1 * (5086.5 - 630.0) + 10.0 * 474.0, epsilon = 1e-9);
    }

    /// Minimum peak over every schedule on a `step` grid.
    fn grid_min_peak(demands: &[f64], capacity: f64, rate: RateLimit, step: f64) -> f64 {
        fn rec(d: &[f64], left: f64, rate: RateLimit, step: f64, peak: f64, best: &mut f64) {
            let Some((&first, rest)) = d.split_first() else {
                *best = best.min(peak);
                return;
            };
            let cap = rate.cap(first).min(left + 1e-12);
            let n = (cap / step + 1e-9).floor() as usize;
            for k in 0..=n {
                let x = k as f64 * step;
                rec(rest, left - x, rate, step, peak.max(first - x), best);
            }
        }
        let mut best = f64::INFINITY;
        rec(demands, capacity, rate, step, f64::NEG_INFINITY, &mut best);
        best
    }

    /// Offline peak as an explicit LP: minimize z with z >= d_t - x_t.
    fn lp_min_peak(demands: &[f64], capacity: f64, rate: RateLimit) -> f64 {
        let n = demands.len();
        let mut obj = vec![0.0; n + 1];
        obj[n] = 1.0;
        let mut lp = LinearProgram::new(Sense::Minimize, obj);
        let mut cap_row = vec![1.0; n + 1];
        cap_row[n] = 0.0;
        lp.add_constraint(cap_row, Relation::Le, capacity).unwrap();
        for (t, &d) in demands.iter().enumerate() {
            let mut row = vec![0.0; n + 1];
            row[t] = 1.0;
            row[n] = 1.0;
            lp.add_constraint(row, Relation::Ge, d).unwrap();
            lp.set_bounds(t, 0.0, Some(rate.cap(d))).unwrap();
        }
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        sol.value
    }

    #[test]
    fn matches_lp_formulation_on_examples() {
        for (d, c, r) in [
            (dhat(), 630.0, RateLimit::Unbounded),
            (vec![10.0, 2.0, 2.0], 6.0, RateLimit::Bounded(3.0)),
            (vec![5.0, 9.0, 7.0, 9.0], 4.0, RateLimit::Bounded(1.5)),
        ] {
            let exact = solve_pmd(&d, c, r).unwrap().peak;
            assert_abs_diff_eq!(exact, lp_min_peak(&d, c, r), epsilon = 1e-7);
        }
    }

    fn quarter_grid(lo: u32, hi: u32) -> impl Strategy<Value = f64> {
        (lo..=hi).prop_map(|k| k as f64 * 0.25)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn optimal_against_grid_search(
            d in prop::collection::vec(quarter_grid(4, 12), 1..4),
            c_steps in 0u32..8,
            rate in prop::option::of(quarter_grid(1, 8)),
        ) {
            let c = (c_steps as f64 * 0.25).min(d.iter().sum::<f64>());
            let rate = RateLimit::from_option(rate);
            let sol = solve_pmd(&d, c, rate).unwrap();
            let grid = grid_min_peak(&d, c, rate, 0.25);
            // Grid search can only be worse, and by less than one grid step.
            prop_assert!(sol.peak <= grid + 1e-9);
            prop_assert!(grid - sol.peak <= 0.25 + 1e-9);
            prop_assert!((sol.peak - lp_min_peak(&d, c, rate)).abs() < 1e-7);
            prop_assert!(sol.schedule.total() <= c + 1e-9);
        }

        #[test]
        fn threshold_balances_budget(
            d in prop::collection::vec(1.0f64..10.0, 1..8),
            frac in 0.0f64..1.0,
        ) {
            let total: f64 = d.iter().sum();
            let budget = frac * total;
            let v = water_fill_threshold(&d, budget).unwrap();
            if budget > 0.0 {
                let spent: f64 = d.iter().map(|x| (x - v).max(0.0)).sum();
                prop_assert!((spent - budget).abs() < 1e-9 * (1.0 + total));
            }
        }

        #[test]
        fn peak_monotone_in_capacity_and_rate(
            d in prop::collection::vec(1.0f64..10.0, 1..6),
            c1 in 0.0f64..1.0, c2 in 0.0f64..1.0,
            r1 in 0.1f64..5.0, r2 in 0.1f64..5.0,
        ) {
            let (clo, chi) = if c1 < c2 { (c1, c2) } else { (c2, c1) };
            let (rlo, rhi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
            let lo = d.iter().copied().fold(f64::INFINITY, f64::min) * d.len() as f64;
            let p_small = solve_pmd(&d, clo * lo, RateLimit::Bounded(rlo)).unwrap().peak;
            let p_more_c = solve_pmd(&d, chi * lo, RateLimit::Bounded(rlo)).unwrap().peak;
            let p_more_r = solve_pmd(&d, clo * lo, RateLimit::Bounded(rhi)).unwrap().peak;
            prop_assert!(p_more_c <= p_small + 1e-9);
            prop_assert!(p_more_r <= p_small + 1e-9);
        }

        #[test]
        fn scale_equivariance(
            d in prop::collection::vec(1.0f64..10.0, 1..6),
            frac in 0.0f64..1.0,
            r in 0.1f64..5.0,
            lambda in 0.1f64..10.0,
        ) {
            let c = frac * d.iter().sum::<f64>();
            let base = solve_pmd(&d, c, RateLimit::Bounded(r)).unwrap().peak;
            let scaled: Vec<f64> = d.iter().map(|x| x * lambda).collect();
            let p = solve_pmd(&scaled, c * lambda, RateLimit::Bounded(r * lambda)).unwrap().peak;
            prop_assert!((p - lambda * base).abs() < 1e-9 * (1.0 + p.abs()));
        }

        #[test]
        fn cmd_shares_offline_optimum(
            d in prop::collection::vec(quarter_grid(4, 12), 1..4),
            c_steps in 0u32..8,
            we in prop::collection::vec(0.0f64..0.5, 3),
        ) {
            let t = d.len();
            let lb = d.iter().copied().fold(f64::INFINITY, f64::min);
            let ub = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let c = (c_steps as f64 * 0.25).min(t as f64 * lb);
            let inst = Instance::new(c, RateLimit::Unbounded, t, lb, ub).unwrap();
            let we = we[..t].to_vec();
            let spread = we.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                - we.iter().copied().fold(f64::INFINITY, f64::min);
            let weights = CmdWeights::new(we.clone(), t as f64 * spread + 1.0).unwrap();
            let sol = solve_pmd(&d, c, RateLimit::Unbounded).unwrap();
            let cost = evaluate_cmd_cost(&inst, &weights, &d, sol.schedule.values()).unwrap();
            // Exhaustive search over the 0.25 grid, which contains the
            // offline schedule whenever the level lands on the grid.
            let mut best = f64::INFINITY;
            let steps: Vec<usize> = d.iter().map(|x| (x / 0.25).round() as usize).collect();
            let mut idx = vec![0usize; t];
            loop {
                let x: Vec<f64> = idx.iter().map(|&k| k as f64 * 0.25).collect();
                if x.iter().sum::<f64>() <= c + 1e-9 {
                    best = best.min(evaluate_cmd_cost(&inst, &weights, &d, &x).unwrap());
                }
                let mut k = 0;
                while k < t {
                    idx[k] += 1;
                    if idx[k] <= steps[k] { break; }
                    idx[k] = 0;
                    k += 1;
                }
                if k == t { break; }
            }
            prop_assert!(cost <= best + 1e-9);
        }
    }
}
