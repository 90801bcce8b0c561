//! Trace ingestion against a frozen fixture, plus energy conservation on
//! random transaction sets.

use std::path::PathBuf;

use chrono::{Duration, NaiveDate, NaiveTime};
use peakmin::harness::{ingest_trace, read_transactions, slot_energy, DayProfileSet, SlottingConfig, TraceTransaction};
use proptest::prelude::*;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[test]
fn three_transaction_golden() {
    // Per-slot energies by hand: [3 + 1, 3 + 3, 3 + 2, 1 + 6], doubled.
    let txs = read_transactions(&fixture("trace_three.csv")).unwrap();
    let config = SlottingConfig {
        on_peak_end: NaiveTime::from_hms_opt(13, 0, 0).unwrap(),
        scale_factor: 2.0,
        ..Default::default()
    };
    let set = ingest_trace(&txs, &config).unwrap();
    let golden = DayProfileSet::load(&fixture("trace_three_golden.json")).unwrap();
    assert_eq!(set.days.len(), 1);
    assert_eq!(set.days[0].date, golden.days[0].date);
    for (a, b) in set.days[0].demand.iter().zip(&golden.days[0].demand) {
        assert!((a - b).abs() < 1e-9, "{:?}", set.days[0].demand);
    }
    assert!((set.average_daily_energy - golden.average_daily_energy).abs() < 1e-9);
    assert_eq!((set.demand_lb, set.demand_ub), (golden.demand_lb, golden.demand_ub));
}

/// Energy of `tx` that falls inside `[lo, hi)`, computed on minute offsets.
fn energy_in(tx: &TraceTransaction, lo: chrono::NaiveDateTime, hi: chrono::NaiveDateTime) -> f64 {
    let start = (tx.start - lo).num_seconds() as f64 / 60.0;
    let end = start + tx.duration_min;
    let width = (hi - lo).num_seconds() as f64 / 60.0;
    let overlap = end.min(width) - start.max(0.0);
    tx.energy_kwh * overlap.max(0.0) / tx.duration_min
}

proptest! {
    #[test]
    fn slotting_conserves_energy(
        raw in prop::collection::vec((0i64..3 * 24 * 60, 1.0f64..400.0, 0.0f64..50.0), 1..25),
        slot in prop::sample::select(vec![5u32, 15, 30, 60]),
    ) {
        let base = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        let txs: Vec<_> = raw
            .iter()
            .map(|&(m, dur, e)| TraceTransaction::new(base + Duration::minutes(m), dur, e).unwrap())
            .collect();
        let slots = slot_energy(&txs, slot).unwrap();
        let total: f64 = slots.values().sum();
        let expected: f64 = txs.iter().map(|t| t.energy_kwh).sum();
        prop_assert!((total - expected).abs() <= 1e-9 * (1.0 + expected));

        // Restricted to one day's on-peak window the sums still agree.
        let lo = base + Duration::hours(12);
        let hi = base + Duration::hours(17);
        let in_window: f64 = slots.range(lo..hi).map(|(_, v)| v).sum();
        let attributed: f64 = txs.iter().map(|t| energy_in(t, lo, hi)).sum();
        prop_assert!((in_window - attributed).abs() <= 1e-9 * (1.0 + attributed));
    }
}
