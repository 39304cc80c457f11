//! Aggregate charging power from arrivals and a charger technology mix.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::arrival::ArrivalProfile;
use crate::error::{Error, Result};
use crate::{BILLING_MINUTES, SLOT_MINUTES};

/// Battery energy of the design vehicle (Chevy Bolt), kWh.
pub const DESIGN_SESSION_KWH: f64 = 60.0;

/// A charging technology. Vehicles arrive empty and charge at constant rated
/// power until full, so a session lasts `session_energy_kwh / rating_kw` hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargerTech {
    pub name: String,
    pub rating_kw: f64,
    pub session_energy_kwh: f64,
}

impl ChargerTech {
    pub fn new(name: impl Into<String>, rating_kw: f64, session_energy_kwh: f64) -> Result<Self> {
        let tech = Self {
            name: name.into(),
            rating_kw,
            session_energy_kwh,
        };
        tech.validate()?;
        Ok(tech)
    }

    /// Representative Level-2 charger: 3 kW, 60 kWh sessions.
    pub fn level2() -> Self {
        Self {
            name: "L2".into(),
            rating_kw: 3.0,
            session_energy_kwh: DESIGN_SESSION_KWH,
        }
    }

    /// Ultra-fast charger: 900 kW, 60 kWh sessions.
    pub fn ufc() -> Self {
        Self {
            name: "UFC".into(),
            rating_kw: 900.0,
            session_energy_kwh: DESIGN_SESSION_KWH,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rating_kw > 0.0 && self.rating_kw.is_finite()) {
            return Err(Error::validation(format!(
                "{}: rating must be positive, got {} kW",
                self.name, self.rating_kw
            )));
        }
        if !(self.session_energy_kwh > 0.0 && self.session_energy_kwh.is_finite()) {
            return Err(Error::validation(format!(
                "{}: session energy must be positive, got {} kWh",
                self.name, self.session_energy_kwh
            )));
        }
        let slots = self.session_minutes() / SLOT_MINUTES as f64;
        if (slots - slots.round()).abs() > 1e-9 || slots.round() < 1.0 {
            return Err(Error::validation(format!(
                "{}: session of {} min is not a whole number of {SLOT_MINUTES}-minute slots",
                self.name,
                self.session_minutes()
            )));
        }
        Ok(())
    }

    pub fn session_minutes(&self) -> f64 {
        self.session_energy_kwh * 60.0 / self.rating_kw
    }

    pub fn session_slots(&self) -> usize {
        (self.session_minutes() / SLOT_MINUTES as f64).round() as usize
    }
}

/// Session duration in hours.
pub fn session_duration(tech: &ChargerTech) -> Result<f64> {
    tech.validate()?;
    Ok(tech.session_energy_kwh / tech.rating_kw)
}

/// Charging power per 4-minute slot, kW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    pub kw: Vec<f64>,
}

/// Average power per 15-minute billing interval, kW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BillingProfile {
    pub kw: Vec<f64>,
}

impl PowerProfile {
    pub fn horizon_slots(&self) -> usize {
        self.kw.len()
    }

    pub fn slot_minutes(&self) -> u32 {
        SLOT_MINUTES
    }

    pub fn total_energy(&self) -> f64 {
        total_energy(&self.kw, SLOT_MINUTES)
    }

    pub fn peak(&self) -> f64 {
        self.kw.iter().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            kw: self.kw.iter().map(|v| v * k).collect(),
        }
    }

    /// `(1 - share) * a + share * b`, slot-wise.
    pub fn affine(a: &Self, b: &Self, share: f64) -> Self {
        debug_assert_eq!(a.kw.len(), b.kw.len());
        Self {
            kw: a
                .kw
                .iter()
                .zip(&b.kw)
                .map(|(x, y)| (1.0 - share) * x + share * y)
                .collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_kw_csv(out, &self.kw, SLOT_MINUTES)
    }
}

impl BillingProfile {
    pub fn new(kw: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = kw.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::validation(format!(
                "billing slot {i} has invalid power {v} kW"
            )));
        }
        Ok(Self { kw })
    }

    pub fn len(&self) -> usize {
        self.kw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kw.is_empty()
    }

    pub fn slot_minutes(&self) -> u32 {
        BILLING_MINUTES
    }

    pub fn total_energy(&self) -> f64 {
        total_energy(&self.kw, BILLING_MINUTES)
    }

    pub fn peak(&self) -> f64 {
        self.kw.iter().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            kw: self.kw.iter().map(|v| v * k).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_kw_csv(out, &self.kw, BILLING_MINUTES)
    }

    /// Reads `slot_start_minute,kw` rows on the 15-minute grid. Lines starting
    /// with `#` are skipped.
    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut kw = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            let parse = |i: usize| -> Result<f64> {
                record
                    .get(i)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::Parse {
                        line,
                        message: format!("expected `slot_start_minute,kw`, found {record:?}"),
                    })
            };
            let (minute, value) = (parse(0)?, parse(1)?);
            if minute != (kw.len() as u32 * BILLING_MINUTES) as f64 {
                return Err(Error::Parse {
                    line,
                    message: format!(
                        "expected slot_start_minute {}, found {minute}",
                        kw.len() as u32 * BILLING_MINUTES
                    ),
                });
            }
            kw.push(value);
        }
        if kw.is_empty() {
            return Err(Error::validation("load profile has no rows"));
        }
        Self::new(kw)
    }
}

fn write_kw_csv<W: Write>(out: W, kw: &[f64], slot_minutes: u32) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["slot_start_minute", "kw"])
        .map_err(csv_io)?;
    for (i, v) in kw.iter().enumerate() {
        w.write_record([(i as u64 * slot_minutes as u64).to_string(), v.to_string()])
            .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Energy in kWh of a power series sampled every `slot_minutes`.
pub fn total_energy(kw: &[f64], slot_minutes: u32) -> f64 {
    kw.iter().sum::<f64>() * slot_minutes as f64 / 60.0
}

/// Aggregate power when every arrival charges at `tech.rating_kw` for
/// `tech.session_slots()` consecutive slots starting at its arrival slot.
/// Sessions running past the end of the horizon wrap to its start.
pub fn synthesize_profile(arrivals: &ArrivalProfile, tech: &ChargerTech) -> Result<PowerProfile> {
    tech.validate()?;
    let a = arrivals.counts();
    let n = a.len();
    let len = tech.session_slots();
    let (full_cycles, rem) = (len / n, len % n);
    let cycle_total = if full_cycles > 0 {
        full_cycles as f64 * arrivals.total()
    } else {
        0.0
    };

    // kw[t] = rating * sum of arrivals in the trailing window (t - rem, t].
    let kw = (0..n)
        .map(|t| {
            let window = if rem == 0 {
                0.0
            } else if rem <= t + 1 {
                a[t + 1 - rem..=t].iter().sum::<f64>()
            } else {
                a[..=t].iter().sum::<f64>() + a[n - (rem - t - 1)..].iter().sum::<f64>()
            };
            tech.rating_kw * (window + cycle_total)
        })
        .collect();
    Ok(PowerProfile { kw })
}

/// Splits each slot's arrivals fractionally: `1 - ufc_share` charge on `l2`,
/// `ufc_share` on `ufc`.
pub fn blend_profiles(
    arrivals: &ArrivalProfile,
    ufc_share: f64,
    l2: &ChargerTech,
    ufc: &ChargerTech,
) -> Result<PowerProfile> {
    check_share(ufc_share)?;
    let p_l2 = synthesize_profile(arrivals, l2)?;
    let p_ufc = synthesize_profile(arrivals, ufc)?;
    Ok(PowerProfile::affine(&p_l2, &p_ufc, ufc_share))
}

pub(crate) fn check_share(share: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&share) {
        return Err(Error::validation(format!(
            "UFC share must lie in [0, 1], got {share}"
        )));
    }
    Ok(())
}

/// Overlap-weighted average of 4-minute slots onto 15-minute intervals.
/// Energy is preserved exactly up to rounding.
pub fn downsample_15min(profile: &PowerProfile) -> Result<BillingProfile> {
    let src = SLOT_MINUTES as usize;
    let dst = BILLING_MINUTES as usize;
    let minutes = profile.kw.len() * src;
    if minutes == 0 || !minutes.is_multiple_of(dst) {
        return Err(Error::validation(format!(
            "horizon of {minutes} min is not divisible into {dst}-minute intervals"
        )));
    }
    let mut out = vec![0.0; minutes / dst];
    for (i, &p) in profile.kw.iter().enumerate() {
        let (start, end) = (i * src, (i + 1) * src);
        let mut m = start;
        while m < end {
            let j = m / dst;
            let boundary = ((j + 1) * dst).min(end);
            out[j] += p * (boundary - m) as f64;
            m = boundary;
        }
    }
    for v in &mut out {
        *v /= dst as f64;
    }
    BillingProfile::new(out)
}
