//! Charging-transaction traces and their conversion to per-slot energy.
//!
//! A transaction draws constant power over its duration, so each slot it
//! touches receives energy in proportion to the overlap.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::harness::DayProfileSet;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceTransaction {
    pub start: NaiveDateTime,
    pub duration_min: f64,
    pub energy_kwh: f64,
}

impl TraceTransaction {
    pub fn new(start: NaiveDateTime, duration_min: f64, energy_kwh: f64) -> Result<Self> {
        if !(duration_min > 0.0 && duration_min.is_finite()) {
            return Err(Error::InvalidParameter(format!("duration {duration_min} must be > 0")));
        }
        if !(energy_kwh >= 0.0 && energy_kwh.is_finite()) {
            return Err(Error::InvalidParameter(format!("energy {energy_kwh} must be >= 0")));
        }
        Ok(TraceTransaction {
            start,
            duration_min,
            energy_kwh,
        })
    }

    fn span_seconds(&self) -> (f64, f64) {
        let t0 = self.start.and_utc().timestamp() as f64 + self.start.nanosecond() as f64 * 1e-9;
        (t0, t0 + self.duration_min * 60.0)
    }
}

const TIMESTAMP_FORMATS: [&str; 4] = [
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
];

/// Parses an ISO-8601 timestamp. An explicit UTC offset is dropped and the
/// local wall-clock time kept, since on-peak windows are defined locally.
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_local());
    }
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

/// Reads `start_iso8601,duration_min,energy_kwh` records. The header row is
/// required; columns are matched by name.
pub fn parse_transactions<R: Read>(reader: R) -> Result<Vec<TraceTransaction>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| malformed(1, e.to_string()))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| malformed(1, format!("missing column `{name}`")))
    };
    let (c_start, c_dur, c_energy) = (column("start_iso8601")?, column("duration_min")?, column("energy_kwh")?);

    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            malformed(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let field = |k: usize| record.get(k).ok_or_else(|| malformed(line, format!("missing field {}", k + 1)));
        let start = field(c_start)?;
        let start = parse_timestamp(start).ok_or_else(|| malformed(line, format!("bad timestamp `{start}`")))?;
        let number = |k: usize, what: &str| -> Result<f64> {
            let raw = field(k)?;
            raw.parse::<f64>()
                .map_err(|_| malformed(line, format!("bad {what} `{raw}`")))
        };
        let duration = number(c_dur, "duration")?;
        let energy = number(c_energy, "energy")?;
        let tx = TraceTransaction::new(start, duration, energy).map_err(|e| malformed(line, e.to_string()))?;
        out.push(tx);
    }
    Ok(out)
}

pub fn read_transactions(path: &Path) -> Result<Vec<TraceTransaction>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_transactions(file)
}

fn malformed(line: usize, reason: String) -> Error {
    Error::MalformedRecord { line, reason }
}

/// How transactions are cut into daily on-peak profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlottingConfig {
    pub slot_minutes: u32,
    pub on_peak_start: NaiveTime,
    pub on_peak_end: NaiveTime,
    /// Multiplies every slot value. Never inferred from the data.
    pub scale_factor: f64,
    /// Overrides the empirical `(d_lb, d_ub)`.
    pub bounds: Option<(f64, f64)>,
}

impl Default for SlottingConfig {
    fn default() -> Self {
        SlottingConfig {
            slot_minutes: 15,
            on_peak_start: NaiveTime::from_hms_opt(12, 0, 0).unwrap(),
            on_peak_end: NaiveTime::from_hms_opt(17, 0, 0).unwrap(),
            scale_factor: 1.0,
            bounds: None,
        }
    }
}

impl SlottingConfig {
    /// Number of slots in the on-peak window.
    pub fn horizon(&self) -> Result<usize> {
        if self.slot_minutes == 0 || 1440 % self.slot_minutes != 0 {
            return Err(Error::InvalidParameter(format!(
                "slot length {} min must divide a day",
                self.slot_minutes
            )));
        }
        let window = (self.on_peak_end - self.on_peak_start).num_minutes();
        let slot = i64::from(self.slot_minutes);
        if window <= 0 || window % slot != 0 || self.on_peak_start.num_seconds_from_midnight() % (slot as u32 * 60) != 0 {
            return Err(Error::InvalidParameter(format!(
                "on-peak window {}..{} must be a positive whole number of slots on the slot grid",
                self.on_peak_start, self.on_peak_end
            )));
        }
        if !(self.scale_factor > 0.0 && self.scale_factor.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "scale factor {} must be > 0",
                self.scale_factor
            )));
        }
        Ok((window / slot) as usize)
    }
}

/// Energy per slot, keyed by slot start. Slots are aligned to midnight.
/// Only slots that some transaction overlaps appear in the map.
pub fn slot_energy(transactions: &[TraceTransaction], slot_minutes: u32) -> Result<BTreeMap<NaiveDateTime, f64>> {
    if slot_minutes == 0 {
        return Err(Error::InvalidParameter("slot length must be positive".into()));
    }
    let slot = f64::from(slot_minutes) * 60.0;
    let mut out = BTreeMap::new();
    for tx in transactions {
        let (t0, t1) = tx.span_seconds();
        let power = tx.energy_kwh / (t1 - t0);
        let mut k = (t0 / slot).floor() as i64;
        while (k as f64) * slot < t1 {
            let lo = t0.max(k as f64 * slot);
            let hi = t1.min((k + 1) as f64 * slot);
            if hi > lo {
                let key = DateTime::from_timestamp(k * slot as i64, 0)
                    .ok_or_else(|| Error::InvalidParameter("timestamp out of range".into()))?
                    .naive_utc();
                *out.entry(key).or_insert(0.0) += power * (hi - lo);
            }
            k += 1;
        }
    }
    Ok(out)
}

/// Builds one profile per day from the on-peak window. Days where some
/// window slot has no overlapping transaction are dropped.
pub fn ingest_trace(transactions: &[TraceTransaction], config: &SlottingConfig) -> Result<DayProfileSet> {
    let horizon = config.horizon()?;
    if transactions.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let slots = slot_energy(transactions, config.slot_minutes)?;
    let step = chrono::Duration::minutes(i64::from(config.slot_minutes));
    let dates: BTreeSet<NaiveDate> = slots
        .keys()
        .filter(|k| k.time() >= config.on_peak_start && k.time() < config.on_peak_end)
        .map(|k| k.date())
        .collect();

    let mut days = Vec::new();
    for date in dates {
        let first = date.and_time(config.on_peak_start);
        let values: Option<Vec<f64>> = (0..horizon)
            .map(|k| slots.get(&(first + step * k as i32)).map(|e| e * config.scale_factor))
            .collect();
        match values {
            Some(values) => days.push((date, values)),
            None => log::info!("dropping {date}: on-peak window not fully covered"),
        }
    }
    if days.is_empty() {
        return Err(Error::EmptyTrace);
    }
    DayProfileSet::from_days(days, config)
}
