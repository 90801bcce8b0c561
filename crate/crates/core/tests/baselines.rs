//! Every baseline must emit a feasible schedule, whatever the input.

use peakmin::baselines::{run_equal_discharge, run_equal_ratio, run_rhc, run_rhc_clairvoyant, run_threshold, FutureView, RhcConfig};
use peakmin::offline::solve_offline_pmd;
use peakmin::{DemandProfile, Instance, RateLimit};
use proptest::prelude::*;

fn instance_and_demand() -> impl Strategy<Value = (Instance, DemandProfile)> {
    (1usize..=6, 0.5f64..3.0, 0.0f64..2.0, 0.0f64..1.0, prop::option::of(0.05f64..2.0)).prop_flat_map(
        |(horizon, lb, width, fill, rate)| {
            let ub = lb + width;
            let inst = Instance::new(fill * horizon as f64 * lb, RateLimit::from_option(rate), horizon, lb, ub).unwrap();
            prop::collection::vec(lb..=ub, horizon)
                .prop_map(move |v| (inst, DemandProfile::new(&inst, v).unwrap()))
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn baselines_are_feasible((inst, d) in instance_and_demand(), thr in 0.0f64..4.0, rate in 0.0f64..=1.0) {
        let mut runs = vec![
            run_threshold(&inst, &d, thr).unwrap(),
            run_equal_discharge(&inst, &d).unwrap(),
            run_equal_ratio(&inst, &d, rate).unwrap(),
        ];
        for view in [FutureView::UpperBound, FutureView::LowerBound, FutureView::Midpoint] {
            for window in 1..=inst.horizon() {
                runs.push(run_rhc(&inst, &d, RhcConfig { window, future_view: view }).unwrap());
            }
        }
        for run in &runs {
            prop_assert!(run.schedule.validate(&inst, d.values()).is_ok(), "{:?}", run.schedule);
        }
    }

    #[test]
    fn clairvoyant_rhc_matches_offline((inst, d) in instance_and_demand()) {
        prop_assume!(!inst.rate_limit().is_bounded());
        let rhc = run_rhc_clairvoyant(&inst, &d, inst.horizon()).unwrap();
        let off = solve_offline_pmd(&inst, &d).unwrap();
        for (a, b) in rhc.schedule.values().iter().zip(off.schedule.values()) {
            prop_assert!((a - b).abs() <= 1e-9, "{:?} vs {:?}", rhc.schedule, off.schedule);
        }
    }
}
