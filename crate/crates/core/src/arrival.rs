//! EV arrival profiles on the canonical 4-minute weekly grid.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{MINUTES_PER_DAY, SLOT_MINUTES, WEEK_SLOTS};

/// Slots in one day at 4-minute resolution.
pub const DAY_SLOTS: usize = (MINUTES_PER_DAY / SLOT_MINUTES) as usize;
/// 4-minute slots in one hour.
pub const SLOTS_PER_HOUR: usize = (60 / SLOT_MINUTES) as usize;

/// Share of the source dataset's annual sessions that fall in the Bay Area.
pub const REGION_SHARE: f64 = 521_601.0 / (521_601.0 + 52_979.0);
/// Growth in California plug-in vehicles from end-2013 to end-2017.
pub const GROWTH_FACTOR: f64 = 365_286.0 / 69_999.0;

/// Expected EV arrivals per 4-minute slot.
///
/// Counts are real-valued expectations, never negative. The horizon always
/// spans a whole number of days and slot 0 starts Monday 00:00.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalProfile {
    counts: Vec<f64>,
    label: String,
}

impl ArrivalProfile {
    pub fn new(counts: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if counts.is_empty() || !counts.len().is_multiple_of(DAY_SLOTS) {
            return Err(Error::validation(format!(
                "arrival horizon of {} slots is not a whole number of days ({DAY_SLOTS} slots/day)",
                counts.len()
            )));
        }
        if let Some((i, c)) = counts
            .iter()
            .enumerate()
            .find(|(_, c)| !c.is_finite() || **c < 0.0)
        {
            return Err(Error::validation(format!(
                "arrival count at slot {i} is {c}; counts must be finite and nonnegative"
            )));
        }
        Ok(Self {
            counts,
            label: label.into(),
        })
    }

    /// A week of zero arrivals.
    pub fn zeros(label: impl Into<String>) -> Self {
        Self {
            counts: vec![0.0; WEEK_SLOTS],
            label: label.into(),
        }
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn horizon_slots(&self) -> usize {
        self.counts.len()
    }

    pub fn slot_minutes(&self) -> u32 {
        SLOT_MINUTES
    }

    pub fn days(&self) -> usize {
        self.counts.len() / DAY_SLOTS
    }

    /// Total arrivals over the horizon.
    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Scales every slot by `region_share * growth_factor`.
    pub fn apply_corrections(&self, region_share: f64, growth_factor: f64) -> Result<Self> {
        if !(region_share > 0.0 && region_share <= 1.0) {
            return Err(Error::validation(format!(
                "region share must lie in (0, 1], got {region_share}"
            )));
        }
        if !(growth_factor > 0.0 && growth_factor.is_finite()) {
            return Err(Error::validation(format!(
                "growth factor must be positive, got {growth_factor}"
            )));
        }
        let k = region_share * growth_factor;
        Ok(Self {
            counts: self.counts.iter().map(|c| c * k).collect(),
            label: self.label.clone(),
        })
    }
}

/// Loads `slot,count` or `hour,count` CSV data from a file.
pub fn load_arrivals(path: impl AsRef<Path>) -> Result<ArrivalProfile> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "arrivals".to_owned());
    read_arrivals(file, label)
}

/// Parses arrival CSV data.
///
/// The header decides the resolution. `hour,count` accepts 24 rows (tiled over
/// seven days) or 168 rows; each hourly count is spread evenly over the hour's
/// fifteen 4-minute slots. `slot,count` accepts 360 rows (tiled) or 2520 rows.
/// Every index must appear exactly once.
pub fn read_arrivals<R: Read>(reader: R, label: impl Into<String>) -> Result<ArrivalProfile> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let hourly = match header.get(0).map(str::to_ascii_lowercase).as_deref() {
        Some("hour") => true,
        Some("slot") => false,
        other => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `hour,count` or `slot,count`, found {other:?}"),
            })
        }
    };

    let mut rows: Vec<(usize, f64, usize)> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let index: usize = record[0].parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid index `{}`", &record[0]),
        })?;
        let count: f64 = record[1].parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid count `{}`", &record[1]),
        })?;
        if !count.is_finite() || count < 0.0 {
            return Err(Error::validation(format!(
                "line {line}: arrival count {count} is negative or not finite"
            )));
        }
        rows.push((index, count, line));
    }

    let allowed: &[usize] = if hourly { &[24, 168] } else { &[DAY_SLOTS, WEEK_SLOTS] };
    if !allowed.contains(&rows.len()) {
        return Err(Error::validation(format!(
            "expected {} rows for {} data, found {}",
            allowed.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" or "),
            if hourly { "hourly" } else { "slot" },
            rows.len()
        )));
    }
    let n = rows.len();
    let mut values = vec![None; n];
    for (index, count, line) in rows {
        if index >= n {
            return Err(Error::validation(format!(
                "line {line}: index {index} out of range 0..{n}"
            )));
        }
        if values[index].replace(count).is_some() {
            return Err(Error::validation(format!(
                "line {line}: duplicate index {index}"
            )));
        }
    }
    let values: Vec<f64> = values.into_iter().map(|v| v.unwrap_or(0.0)).collect();

    let base: Vec<f64> = if hourly {
        values
            .iter()
            .flat_map(|&c| std::iter::repeat_n(c / SLOTS_PER_HOUR as f64, SLOTS_PER_HOUR))
            .collect()
    } else {
        values
    };
    ArrivalProfile::new(tile_to_week(&base), label)
}

fn tile_to_week(base: &[f64]) -> Vec<f64> {
    base.iter().copied().cycle().take(WEEK_SLOTS).collect()
}

/// Daily arrival shape with two equally weighted Gaussian bumps, tiled over a
/// week and scaled so each day sums to `total_daily_arrivals`.
///
/// Bump distance is measured around the 24-hour clock, and each slot takes the
/// density at its start time. `total_daily_arrivals == 0` yields a zero profile.
pub fn synthetic_bimodal_profile(
    total_daily_arrivals: f64,
    morning_peak_hour: f64,
    evening_peak_hour: f64,
    spread_hours: f64,
) -> Result<ArrivalProfile> {
    if !(total_daily_arrivals >= 0.0 && total_daily_arrivals.is_finite()) {
        return Err(Error::validation(format!(
            "total daily arrivals must be nonnegative, got {total_daily_arrivals}"
        )));
    }
    for peak in [morning_peak_hour, evening_peak_hour] {
        if !(0.0..24.0).contains(&peak) {
            return Err(Error::validation(format!(
                "peak hour {peak} outside [0, 24)"
            )));
        }
    }
    if !(spread_hours > 0.0 && spread_hours.is_finite()) {
        return Err(Error::validation(format!(
            "spread must be positive, got {spread_hours}"
        )));
    }
    let label = format!(
        "bimodal({total_daily_arrivals}/day, peaks {morning_peak_hour}h/{evening_peak_hour}h, spread {spread_hours}h)"
    );
    if total_daily_arrivals == 0.0 {
        return Ok(ArrivalProfile::zeros(label));
    }

    let bump = |hour: f64, peak: f64| {
        let d = (hour - peak).rem_euclid(24.0);
        let d = d.min(24.0 - d);
        (-0.5 * (d / spread_hours).powi(2)).exp()
    };
    let shape: Vec<f64> = (0..DAY_SLOTS)
        .map(|i| {
            let hour = (i as f64) * SLOT_MINUTES as f64 / 60.0;
            bump(hour, morning_peak_hour) + bump(hour, evening_peak_hour)
        })
        .collect();
    let norm: f64 = shape.iter().sum();
    let day: Vec<f64> = shape
        .iter()
        .map(|v| v / norm * total_daily_arrivals)
        .collect();
    ArrivalProfile::new(tile_to_week(&day), label)
}

/// Daily arrivals of the shipped fixture before corrections.
pub const FIXTURE_RAW_DAILY_ARRIVALS: f64 = 1700.0;
pub const FIXTURE_MORNING_PEAK: f64 = 9.0;
pub const FIXTURE_EVENING_PEAK: f64 = 18.0;
pub const FIXTURE_SPREAD: f64 = 2.0;

/// The default arrival profile: the bimodal fixture with the regional share and
/// fleet growth corrections applied.
pub fn default_fixture() -> ArrivalProfile {
    synthetic_bimodal_profile(
        FIXTURE_RAW_DAILY_ARRIVALS,
        FIXTURE_MORNING_PEAK,
        FIXTURE_EVENING_PEAK,
        FIXTURE_SPREAD,
    )
    .and_then(|p| p.apply_corrections(REGION_SHARE, GROWTH_FACTOR))
    .expect("fixture parameters are valid")
}
