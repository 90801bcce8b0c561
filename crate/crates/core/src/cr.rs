//! The optimal competitive ratio `pi*` and the oracles used to check it.
//!
//! `pi*` is the largest value of the linear-fractional program
//! `CR-Compute(I)` over the prefix sets `I = [t]`, `t > floor(c / d_ub)`.
//! Each program asks how large `(sum_{i in I} x_i - c) / sum_{i in I} v(x^i)`
//! can get, where `x^i` is the profile `x` observed up to slot `i` and padded
//! with `d_lb`, and `v` is the offline optimal peak.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::instance::ENERGY_TOL;
use crate::lp::{solve_lfp, AffineForm, LfpProblem, LpStatus, Relation};
use crate::offline::{offline_peak, solve_pmd};
use crate::{DemandProfile, Error, Instance, Result};

/// Largest horizon accepted by the exhaustive oracles.
pub const BRUTE_FORCE_MAX_HORIZON: usize = 6;

/// Column positions of a `CR-Compute` program. Slots and blocks are 0-based.
///
/// Blocks for slots outside the index set only constrain their own `u_i`,
/// which is unbounded above and absent from the objective, so they are
/// dropped. Slots after the last index never enter any row and are dropped
/// too; the witness pads them with `d_lb`.
#[derive(Debug, Clone)]
pub struct CrLayout {
    horizon: usize,
    /// 0-based slots of the index set, increasing.
    blocks: Vec<usize>,
    /// Number of `x` columns (`last index + 1`).
    xs: usize,
}

impl CrLayout {
    pub fn x(&self, j: usize) -> usize {
        j
    }

    pub fn u(&self, block: usize) -> usize {
        self.xs + block * (self.horizon + 1)
    }

    pub fn delta(&self, block: usize, j: usize) -> usize {
        self.u(block) + 1 + j
    }

    pub fn num_vars(&self) -> usize {
        self.xs + self.blocks.len() * (self.horizon + 1)
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }
}

/// Validates a 1-based index set and returns its 0-based slots.
fn normalize_index_set(instance: &Instance, index_set: &[usize]) -> Result<Vec<usize>> {
    if index_set.is_empty() {
        return Err(Error::EmptyIndexSet);
    }
    let t = instance.horizon();
    let mut prev = 0;
    for &i in index_set {
        if i == 0 || i > t {
            return Err(Error::InvalidIndexSet(format!("slot {i} outside 1..={t}")));
        }
        if i <= prev {
            return Err(Error::InvalidIndexSet("slots must be strictly increasing".into()));
        }
        prev = i;
    }
    Ok(index_set.iter().map(|i| i - 1).collect())
}

/// Builds `CR-Compute(I)` for a 1-based index set.
///
/// The per-block energy rows use `sum_j delta_ij <= c`. Spending more never
/// raises a peak bound, so this matches the equality form whenever that form
/// is feasible, and it stays feasible when `T * rate < c`.
pub fn build_cr_compute(instance: &Instance, index_set: &[usize]) -> Result<(LfpProblem, CrLayout)> {
    let blocks = normalize_index_set(instance, index_set)?;
    let horizon = instance.horizon();
    let layout = CrLayout {
        horizon,
        xs: blocks[blocks.len() - 1] + 1,
        blocks,
    };
    let n = layout.num_vars();
    let c = instance.capacity();
    let lb = instance.demand_lb();

    let mut numerator = vec![0.0; n];
    let mut denominator = vec![0.0; n];
    for (k, &i) in layout.blocks.iter().enumerate() {
        numerator[layout.x(i)] = 1.0;
        denominator[layout.u(k)] = 1.0;
    }
    let mut p = LfpProblem::new(AffineForm::new(numerator, -c), AffineForm::new(denominator, 0.0));

    for j in 0..layout.xs {
        p.set_bounds(layout.x(j), lb, Some(instance.demand_ub()))?;
    }
    let rate = instance.rate_limit().value();
    for (k, &i) in layout.blocks.iter().enumerate() {
        let energy: Vec<(usize, f64)> = (0..horizon).map(|j| (layout.delta(k, j), 1.0)).collect();
        p.add_sparse(&energy, Relation::Le, c)?;
        for j in 0..horizon {
            p.set_bounds(layout.delta(k, j), 0.0, rate)?;
            if j <= i {
                p.add_sparse(
                    &[(layout.x(j), 1.0), (layout.delta(k, j), -1.0), (layout.u(k), -1.0)],
                    Relation::Le,
                    0.0,
                )?;
            } else {
                p.add_sparse(&[(layout.delta(k, j), -1.0), (layout.u(k), -1.0)], Relation::Le, -lb)?;
            }
        }
    }
    Ok((p, layout))
}

/// Value of one `CR-Compute` program and the profile attaining it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrCandidate {
    /// 1-based index set.
    pub index_set: Vec<usize>,
    pub value: f64,
    /// Full-length worst-case profile; slots after the last index are `d_lb`.
    pub witness: Vec<f64>,
    /// False when the supremum is only approached with `u_i` unbounded; this
    /// happens when every profile has a negative numerator, and the witness
    /// is then the all-`d_lb` profile.
    pub attained: bool,
}

pub fn cr_compute(instance: &Instance, index_set: &[usize]) -> Result<CrCandidate> {
    let (p, layout) = build_cr_compute(instance, index_set)?;
    let sol = solve_lfp(&p)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::NumericalFailure(format!(
            "CR-Compute{index_set:?} returned {:?}",
            sol.status
        )));
    }
    let lb = instance.demand_lb();
    let ub = instance.demand_ub();
    let witness = match &sol.x {
        Some(x) => (0..instance.horizon())
            .map(|j| if j < layout.xs { x[layout.x(j)].clamp(lb, ub) } else { lb })
            .collect(),
        None => vec![lb; instance.horizon()],
    };
    Ok(CrCandidate {
        index_set: index_set.to_vec(),
        value: sol.value,
        witness,
        attained: sol.x.is_some(),
    })
}

/// `floor(c / d_ub)`, exact when both inputs are short decimals.
pub fn tau(instance: &Instance) -> usize {
    let c = instance.capacity();
    let ub = instance.demand_ub();
    for digits in 0..=9 {
        let scale = 10f64.powi(digits);
        let (cs, us) = (c * scale, ub * scale);
        if cs < 9e15
            && (cs - cs.round()).abs() <= 1e-9 * scale.max(1.0)
            && (us - us.round()).abs() <= 1e-9 * scale.max(1.0)
        {
            return (cs.round() as u64 / us.round() as u64) as usize;
        }
    }
    ((c / ub) - 1e-12).floor().max(0.0) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrResult {
    pub pi_star: f64,
    pub tau: usize,
    /// 1-based prefix set attaining the maximum (empty when `c = 0`).
    pub argmax_set: Vec<usize>,
    pub witness_profile: Vec<f64>,
    /// Every program evaluated, prefix sets first, extra candidate last.
    pub candidates: Vec<CrCandidate>,
    /// Whether the extra `[max(tau, 1)]` candidate strictly beat the others.
    pub defensive_won: bool,
}

/// Computes `pi*` from the prefix-set programs.
pub fn optimal_cr(instance: &Instance) -> Result<CrResult> {
    let t_max = instance.horizon();
    let tau = tau(instance);
    if instance.capacity() <= 0.0 {
        return Ok(CrResult {
            pi_star: 1.0,
            tau,
            argmax_set: Vec::new(),
            witness_profile: vec![instance.demand_lb(); t_max],
            candidates: Vec::new(),
            defensive_won: false,
        });
    }
    if instance.at_capacity_boundary() {
        return Err(Error::DegenerateInstance(format!(
            "capacity {} equals T * d_lb; every offline peak can vanish",
            instance.capacity()
        )));
    }
    let mut lengths: Vec<usize> = (tau + 1..=t_max).collect();
    let extra = tau.max(1);
    let has_extra = extra <= tau && extra <= t_max;
    if has_extra {
        lengths.push(extra);
    }
    let candidates: Vec<CrCandidate> = lengths
        .par_iter()
        .map(|&t| cr_compute(instance, &(1..=t).collect::<Vec<_>>()))
        .collect::<Result<_>>()?;

    let regular = if has_extra {
        &candidates[..candidates.len() - 1]
    } else {
        &candidates[..]
    };
    // Ties go to the shortest prefix, which comes first.
    let mut best = &regular[0];
    for cand in regular {
        if cand.value > best.value + 1e-12 {
            best = cand;
        }
    }
    let mut defensive_won = false;
    if has_extra {
        let cand = &candidates[candidates.len() - 1];
        if cand.value > best.value + 1e-9 {
            defensive_won = true;
            log::warn!("CR-Compute over [{extra}] exceeded every prefix beyond tau");
            best = cand;
        }
    }
    Ok(CrResult {
        pi_star: best.value.max(1.0),
        tau,
        argmax_set: best.index_set.clone(),
        witness_profile: best.witness.clone(),
        candidates: candidates.clone(),
        defensive_won,
    })
}

/// `(sum_{i in I} d_i - c) / sum_{i in I} v(d^i)` for a 1-based index set:
/// no online algorithm beats this ratio on `d`.
pub fn ratio_lower_bound(instance: &Instance, index_set: &[usize], demand: &DemandProfile) -> Result<f64> {
    let blocks = normalize_index_set(instance, index_set)?;
    let d = demand.values();
    let mut num = -instance.capacity();
    let mut den = 0.0;
    for i in blocks {
        num += d[i];
        den += offline_peak(instance, &instance.reference_profile(&d[..=i])?)?;
    }
    if den <= 0.0 {
        return Err(Error::DegenerateOfflinePeak);
    }
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiResult {
    /// `max_d sum_t [d_t - pi v(d^t)]^+` over the grid.
    pub value: f64,
    /// First grid profile attaining it.
    pub argmax: Vec<f64>,
}

/// Grid `{d_lb, d_lb + h, ...}` closed off with `d_ub`.
pub fn demand_grid(instance: &Instance, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("grid step {step} must be > 0")));
    }
    let (lb, ub) = (instance.demand_lb(), instance.demand_ub());
    let mut points = Vec::new();
    let mut k = 0u64;
    loop {
        let x = lb + k as f64 * step;
        if x >= ub - 1e-9 * (1.0 + ub) {
            break;
        }
        points.push(x);
        k += 1;
    }
    points.push(ub);
    Ok(points)
}

/// Worst-case energy that the unclamped fixed-ratio policy would spend,
/// by exhaustive enumeration of grid profiles. Test oracle only.
pub fn phi_bruteforce(instance: &Instance, pi: f64, step: f64) -> Result<PhiResult> {
    let horizon = instance.horizon();
    if horizon > BRUTE_FORCE_MAX_HORIZON {
        return Err(Error::HorizonTooLarge {
            max: BRUTE_FORCE_MAX_HORIZON,
            actual: horizon,
        });
    }
    if !(pi >= 1.0) {
        return Err(Error::InvalidParameter(format!("ratio {pi} must be >= 1")));
    }
    let grid = demand_grid(instance, step)?;
    let mut best = PhiResult {
        value: f64::NEG_INFINITY,
        argmax: Vec::new(),
    };
    let mut prefix = Vec::with_capacity(horizon);
    let mut padded = vec![instance.demand_lb(); horizon];
    fn rec(
        inst: &Instance,
        grid: &[f64],
        pi: f64,
        prefix: &mut Vec<f64>,
        padded: &mut Vec<f64>,
        spent: f64,
        best: &mut PhiResult,
    ) -> Result<()> {
        let t = prefix.len();
        if t == inst.horizon() {
            if spent > best.value + 1e-12 {
                best.value = spent;
                best.argmax = prefix.clone();
            }
            return Ok(());
        }
        for &d in grid {
            prefix.push(d);
            padded[t] = d;
            let v = solve_pmd(padded, inst.capacity(), inst.rate_limit())?.peak;
            let delta = (d - pi * v).max(0.0);
            rec(inst, grid, pi, prefix, padded, spent + delta, best)?;
            prefix.pop();
            padded[t] = inst.demand_lb();
        }
        Ok(())
    }
    rec(instance, &grid, pi, &mut prefix, &mut padded, 0.0, &mut best)?;
    Ok(best)
}

/// Smallest `pi` with `phi_bruteforce(pi) <= c`, by bisection on `[1, hi]`.
pub fn phi_fixed_point(instance: &Instance, step: f64, tol: f64) -> Result<f64> {
    let c = instance.capacity();
    let fits = |pi: f64| -> Result<bool> {
        Ok(phi_bruteforce(instance, pi, step)?.value <= c + ENERGY_TOL * (1.0 + c))
    };
    if fits(1.0)? {
        return Ok(1.0);
    }
    let mut lo = 1.0;
    let mut hi = 2.0;
    while !fits(hi)? {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if fits(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RateLimit;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_slot() -> Instance {
        Instance::new(1.0, RateLimit::Unbounded, 2, 1.0, 2.0).unwrap()
    }

    /// Ratio grid search over `(d_1, d_2)`.
    fn grid_ratio_t2(inst: &Instance, set: &[usize], step: f64) -> f64 {
        let grid = demand_grid(inst, step).unwrap();
        let mut best = f64::NEG_INFINITY;
        for &a in &grid {
            for &b in &grid {
                let d = DemandProfile::new(inst, vec![a, b]).unwrap();
                best = best.max(ratio_lower_bound(inst, set, &d).unwrap());
            }
        }
        best
    }

    #[test]
    fn two_slot_programs() {
        let inst = two_slot();
        let full = cr_compute(&inst, &[1, 2]).unwrap();
        assert_abs_diff_eq!(full.value, 4.0 / 3.0, epsilon = 1e-7);
        assert_abs_diff_eq!(full.value, grid_ratio_t2(&inst, &[1, 2], 0.001), epsilon = 1e-3);
        assert_abs_diff_eq!(full.witness[0], 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(full.witness[1], 2.0, epsilon = 1e-7);

        let first = cr_compute(&inst, &[1]).unwrap();
        assert_abs_diff_eq!(first.value, 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(first.value, grid_ratio_t2(&inst, &[1], 0.001), epsilon = 1e-3);
    }

    #[test]
    fn two_slot_optimal_ratio() {
        let res = optimal_cr(&two_slot()).unwrap();
        assert_eq!(res.tau, 0);
        assert_abs_diff_eq!(res.pi_star, 4.0 / 3.0, epsilon = 1e-7);
        assert_eq!(res.argmax_set, vec![1, 2]);
        assert!(!res.defensive_won);
        let fixed = phi_fixed_point(&two_slot(), 0.05, 1e-6).unwrap();
        assert_abs_diff_eq!(res.pi_star, fixed, epsilon = 1e-5);
    }

    #[test]
    fn no_uncertainty_means_ratio_one() {
        let inst = Instance::new(3.0, RateLimit::Unbounded, 4, 2.0, 2.0).unwrap();
        for set in [vec![1], vec![2, 4], vec![1, 2, 3, 4]] {
            assert!(cr_compute(&inst, &set).unwrap().value <= 1.0 + 1e-7);
        }
        assert_abs_diff_eq!(optimal_cr(&inst).unwrap().pi_star, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_inputs() {
        let inst = Instance::new(0.0, RateLimit::Unbounded, 3, 1.0, 2.0).unwrap();
        assert_eq!(optimal_cr(&inst).unwrap().pi_star, 1.0);
        let inst = Instance::new(3.0, RateLimit::Unbounded, 3, 1.0, 2.0).unwrap();
        assert_eq!(optimal_cr(&inst).unwrap_err().name(), "DegenerateInstance");
        let inst = two_slot();
        assert_eq!(cr_compute(&inst, &[]).unwrap_err().name(), "EmptyIndexSet");
        assert_eq!(cr_compute(&inst, &[3]).unwrap_err().name(), "InvalidIndexSet");
        assert_eq!(cr_compute(&inst, &[2, 1]).unwrap_err().name(), "InvalidIndexSet");
        let big = Instance::new(1.0, RateLimit::Unbounded, 7, 1.0, 2.0).unwrap();
        assert_eq!(phi_bruteforce(&big, 1.0, 0.5).unwrap_err().name(), "HorizonTooLarge");
    }

    #[test]
    fn tau_is_exact_on_decimals() {
        let inst = Instance::new(630.0, RateLimit::Unbounded, 10, 300.0, 600.0).unwrap();
        assert_eq!(tau(&inst), 1);
        let inst = Instance::new(1.2, RateLimit::Unbounded, 10, 0.3, 0.4).unwrap();
        // 1.2 / 0.4 is 2.9999999999999996 in binary floating point.
        assert_eq!(tau(&inst), 3);
        let inst = Instance::new(0.9, RateLimit::Unbounded, 10, 0.3, 0.4).unwrap();
        assert_eq!(tau(&inst), 2);
    }

    #[test]
    fn phi_examples() {
        let inst = two_slot();
        let one = phi_bruteforce(&inst, 1.0, 0.05).unwrap();
        assert_abs_diff_eq!(one.value, 1.5, epsilon = 1e-9);
        assert_eq!(one.argmax, vec![1.0, 2.0]);
        let star = phi_bruteforce(&inst, 4.0 / 3.0, 0.05).unwrap();
        assert_abs_diff_eq!(star.value, 1.0, epsilon = 1e-9);
        assert_eq!(phi_bruteforce(&inst, 10.0, 0.05).unwrap().value, 0.0);
    }

    #[test]
    fn appendix_instance_ratio() {
        let inst = Instance::new(630.0, RateLimit::Unbounded, 10, 300.0, 600.0).unwrap();
        let res = optimal_cr(&inst).unwrap();
        assert!((res.pi_star - 1.32).abs() <= 0.01, "pi* = {}", res.pi_star);
        let d = DemandProfile::new(&inst, res.witness_profile.clone()).unwrap();
        let replay = ratio_lower_bound(&inst, &res.argmax_set, &d).unwrap();
        assert_abs_diff_eq!(replay, res.pi_star, epsilon = 1e-6);
    }

    fn small_instances() -> Vec<Instance> {
        vec![
            two_slot(),
            Instance::new(1.5, RateLimit::Unbounded, 3, 1.0, 2.5).unwrap(),
            Instance::new(2.0, RateLimit::Bounded(0.8), 3, 1.0, 2.0).unwrap(),
            Instance::new(2.5, RateLimit::Unbounded, 4, 1.0, 3.0).unwrap(),
            Instance::new(3.5, RateLimit::Bounded(1.5), 4, 1.0, 2.0).unwrap(),
        ]
    }

    #[test]
    fn prefix_sets_dominate_all_subsets() {
        for inst in small_instances() {
            let t = inst.horizon();
            let res = optimal_cr(&inst).unwrap();
            let mut best = f64::NEG_INFINITY;
            for mask in 1u32..(1 << t) {
                let set: Vec<usize> = (1..=t).filter(|i| mask & (1 << (i - 1)) != 0).collect();
                best = best.max(cr_compute(&inst, &set).unwrap().value);
            }
            assert_abs_diff_eq!(res.pi_star, best.max(1.0), epsilon = 1e-7);
            assert!(!res.defensive_won);
        }
    }

    #[test]
    fn witness_replays_the_ratio() {
        for inst in small_instances() {
            let res = optimal_cr(&inst).unwrap();
            let d = DemandProfile::new(&inst, res.witness_profile.clone()).unwrap();
            let r = ratio_lower_bound(&inst, &res.argmax_set, &d).unwrap();
            assert_abs_diff_eq!(r, res.pi_star, epsilon = 1e-6);
        }
    }

    #[test]
    fn random_profiles_respect_lower_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for inst in small_instances() {
            let pi = optimal_cr(&inst).unwrap().pi_star;
            let t = inst.horizon();
            for _ in 0..200 {
                let d: Vec<f64> =
                    (0..t).map(|_| rng.random_range(inst.demand_lb()..=inst.demand_ub())).collect();
                let d = DemandProfile::new(&inst, d).unwrap();
                let mask = rng.random_range(1u32..(1 << t));
                let set: Vec<usize> = (1..=t).filter(|i| mask & (1 << (i - 1)) != 0).collect();
                assert!(ratio_lower_bound(&inst, &set, &d).unwrap() <= pi + 1e-7);
            }
        }
    }

    #[test]
    fn phi_decreases_then_flattens() {
        let inst = Instance::new(1.5, RateLimit::Unbounded, 3, 1.0, 2.5).unwrap();
        let mut prev = f64::INFINITY;
        let mut hit_zero = false;
        for k in 0..30 {
            let pi = 1.0 + 0.1 * k as f64;
            let phi = phi_bruteforce(&inst, pi, 0.25).unwrap().value;
            if hit_zero {
                assert_eq!(phi, 0.0);
            } else {
                assert!(phi < prev, "phi({pi}) = {phi} not below {prev}");
            }
            hit_zero |= phi == 0.0;
            prev = phi;
        }
        assert!(hit_zero);
    }

    #[test]
    fn phi_feasibility_threshold() {
        for inst in small_instances().into_iter().take(3) {
            let pi = optimal_cr(&inst).unwrap().pi_star;
            let c = inst.capacity();
            assert!(phi_bruteforce(&inst, pi, 0.1).unwrap().value <= c + 1e-7);
            assert!(phi_bruteforce(&inst, pi - 0.05, 0.1).unwrap().value > c);
        }
    }

    #[test]
    fn ratio_grows_with_capacity_and_uncertainty() {
        let mut prev = 0.0;
        for c in [0.5, 1.0, 1.5, 2.0, 2.5] {
            let inst = Instance::new(c, RateLimit::Unbounded, 3, 1.0, 2.0).unwrap();
            let pi = optimal_cr(&inst).unwrap().pi_star;
            assert!(pi >= prev - 1e-9);
            prev = pi;
        }
        let mut prev = 0.0;
        for ub in [1.0, 1.5, 2.0, 3.0, 4.0] {
            let inst = Instance::new(1.5, RateLimit::Unbounded, 3, 1.0, ub).unwrap();
            let pi = optimal_cr(&inst).unwrap().pi_star;
            assert!(pi >= prev - 1e-9);
            prev = pi;
        }
    }
}
