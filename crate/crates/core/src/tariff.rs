//! Time-of-use billing: per-interval energy charges, demand charges and
//! station O&M / annualized capital costs.
//!
//! Schedules are built from JSON period rules on the 15-minute grid of a week
//! starting Monday 00:00. The rules of a season must cover every interval
//! exactly once.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fleet::BillingProfile;
use crate::{BILLING_MINUTES, MINUTES_PER_DAY};

/// 15-minute intervals per day.
pub const DAY_INTERVALS: usize = (MINUTES_PER_DAY / BILLING_MINUTES) as usize;
/// 15-minute intervals per week.
pub const WEEK_INTERVALS: usize = 7 * DAY_INTERVALS;

/// Hours per billing interval.
const INTERVAL_HOURS: f64 = BILLING_MINUTES as f64 / 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Period {
    Peak,
    PartPeak,
    OffPeak,
}

impl Period {
    pub const ALL: [Period; 3] = [Period::Peak, Period::PartPeak, Period::OffPeak];

    pub fn as_str(self) -> &'static str {
        match self {
            Period::Peak => "peak",
            Period::PartPeak => "part_peak",
            Period::OffPeak => "off_peak",
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Season {
    Summer,
    Winter,
}

impl Season {
    pub fn as_str(self) -> &'static str {
        match self {
            Season::Summer => "summer",
            Season::Winter => "winter",
        }
    }
}

impl fmt::Display for Season {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Season {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "summer" => Ok(Season::Summer),
            "winter" => Ok(Season::Winter),
            _ => Err(Error::validation(format!(
                "unknown season `{s}` (expected summer or winter)"
            ))),
        }
    }
}

/// $/kWh per period. Missing periods bill at zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyRates {
    pub peak: f64,
    pub part_peak: f64,
    pub off_peak: f64,
}

impl EnergyRates {
    pub fn rate(&self, period: Period) -> f64 {
        match period {
            Period::Peak => self.peak,
            Period::PartPeak => self.part_peak,
            Period::OffPeak => self.off_peak,
        }
    }
}

/// $/kW on the highest interval demand within peak intervals, part-peak
/// intervals, and all intervals.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemandRates {
    pub peak: f64,
    pub part_peak: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationCostParams {
    /// O&M, $/station/year.
    pub om_annual: f64,
    /// Uniform annualized capital, $/station/year.
    pub capital_annualized: f64,
}

impl StationCostParams {
    pub fn level2() -> Self {
        Self {
            om_annual: 200.0,
            capital_annualized: 592.0,
        }
    }

    pub fn ufc() -> Self {
        Self {
            om_annual: 2000.0,
            capital_annualized: 5904.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.om_annual >= 0.0 && self.capital_annualized >= 0.0) {
            return Err(Error::Config(format!(
                "station costs must be nonnegative: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            om_annual: self.om_annual * k,
            capital_annualized: self.capital_annualized * k,
        }
    }
}

/// A seasonal TOU schedule on the 15-minute grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TouSchedule {
    pub tariff_name: String,
    pub season: Season,
    classification: Vec<Period>,
    pub energy_rates: EnergyRates,
    pub demand_rates: DemandRates,
}

impl TouSchedule {
    /// Builds a schedule from an explicit per-interval classification. The
    /// classification repeats over profiles longer than it.
    pub fn from_classification(
        tariff_name: impl Into<String>,
        season: Season,
        classification: Vec<Period>,
        energy_rates: EnergyRates,
        demand_rates: DemandRates,
    ) -> Result<Self> {
        let s = Self {
            tariff_name: tariff_name.into(),
            season,
            classification,
            energy_rates,
            demand_rates,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        let name = &self.tariff_name;
        if self.classification.is_empty() {
            return Err(Error::Config(format!("{name}/{}: empty classification", self.season)));
        }
        let e = &self.energy_rates;
        let d = &self.demand_rates;
        for r in [e.peak, e.part_peak, e.off_peak, d.peak, d.part_peak, d.max] {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::Config(format!(
                    "{name}/{}: rates must be finite and nonnegative, got {r}",
                    self.season
                )));
            }
        }
        if self.season == Season::Winter {
            if self.classification.contains(&Period::Peak) {
                return Err(Error::Config(format!(
                    "{name}/winter: winter schedules have no peak period"
                )));
            }
            if e.peak != 0.0 || d.peak != 0.0 {
                return Err(Error::Config(format!(
                    "{name}/winter: winter schedules cannot carry peak rates"
                )));
            }
        }
        Ok(())
    }

    pub fn classification(&self) -> &[Period] {
        &self.classification
    }

    pub fn period_of(&self, interval: usize) -> Period {
        self.classification[interval % self.classification.len()]
    }

    pub fn has_period(&self, period: Period) -> bool {
        self.classification.contains(&period)
    }

    /// Checks that a profile tiles this schedule's cycle.
    pub fn check_alignment(&self, profile: &BillingProfile) -> Result<()> {
        let n = self.classification.len();
        if !profile.len().is_multiple_of(n) {
            return Err(Error::Config(format!(
                "{}/{}: profile of {} intervals has slots with no classified period (cycle of {n})",
                self.tariff_name,
                self.season,
                profile.len()
            )));
        }
        Ok(())
    }

    /// Same classification with every energy and demand rate multiplied by `k`.
    pub fn scaled_rates(&self, k: f64) -> Self {
        let e = self.energy_rates;
        let d = self.demand_rates;
        Self {
            energy_rates: EnergyRates {
                peak: e.peak * k,
                part_peak: e.part_peak * k,
                off_peak: e.off_peak * k,
            },
            demand_rates: DemandRates {
                peak: d.peak * k,
                part_peak: d.part_peak * k,
                max: d.max * k,
            },
            ..self.clone()
        }
    }
}

/// Energy charges by period, $.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyCharges {
    pub peak: f64,
    pub part_peak: f64,
    pub off_peak: f64,
}

impl EnergyCharges {
    pub fn total(&self) -> f64 {
        self.peak + self.part_peak + self.off_peak
    }
}

/// Billed cost decomposition, $.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub energy_peak: f64,
    pub energy_part_peak: f64,
    pub energy_off_peak: f64,
    pub demand: f64,
    pub om_and_capital: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn new(energy: EnergyCharges, demand: f64, om_and_capital: f64) -> Self {
        let mut c = Self {
            energy_peak: energy.peak,
            energy_part_peak: energy.part_peak,
            energy_off_peak: energy.off_peak,
            demand,
            om_and_capital,
            total: 0.0,
        };
        c.total = c.component_sum();
        c
    }

    pub fn component_sum(&self) -> f64 {
        self.energy_peak + self.energy_part_peak + self.energy_off_peak + self.demand + self.om_and_capital
    }

    pub fn energy(&self) -> f64 {
        self.energy_peak + self.energy_part_peak + self.energy_off_peak
    }

    /// Energy plus demand charges, excluding station costs.
    pub fn electricity(&self) -> f64 {
        self.energy() + self.demand
    }
}

impl std::ops::Add for CostBreakdown {
    type Output = CostBreakdown;

    fn add(self, o: CostBreakdown) -> CostBreakdown {
        CostBreakdown::new(
            EnergyCharges {
                peak: self.energy_peak + o.energy_peak,
                part_peak: self.energy_part_peak + o.energy_part_peak,
                off_peak: self.energy_off_peak + o.energy_off_peak,
            },
            self.demand + o.demand,
            self.om_and_capital + o.om_and_capital,
        )
    }
}

/// Energy charge for each interval (kW × 0.25 h × period rate), summed per period.
pub fn energy_charge(profile: &BillingProfile, schedule: &TouSchedule) -> Result<EnergyCharges> {
    schedule.check_alignment(profile)?;
    let mut kwh = [0.0_f64; 3];
    for (i, &kw) in profile.kw.iter().enumerate() {
        kwh[schedule.period_of(i) as usize] += kw * INTERVAL_HOURS;
    }
    let r = &schedule.energy_rates;
    Ok(EnergyCharges {
        peak: kwh[Period::Peak as usize] * r.peak,
        part_peak: kwh[Period::PartPeak as usize] * r.part_peak,
        off_peak: kwh[Period::OffPeak as usize] * r.off_peak,
    })
}

/// Highest interval demand per category: (peak, part-peak, all intervals).
/// `None` where the schedule has no interval of that period.
pub fn max_demands(
    profile: &BillingProfile,
    schedule: &TouSchedule,
) -> Result<(Option<f64>, Option<f64>, f64)> {
    schedule.check_alignment(profile)?;
    if profile.is_empty() {
        return Err(Error::validation("demand charge of an empty profile"));
    }
    let mut peak: Option<f64> = None;
    let mut part: Option<f64> = None;
    let mut all = 0.0_f64;
    for (i, &kw) in profile.kw.iter().enumerate() {
        match schedule.period_of(i) {
            Period::Peak => peak = Some(peak.map_or(kw, |m| m.max(kw))),
            Period::PartPeak => part = Some(part.map_or(kw, |m| m.max(kw))),
            Period::OffPeak => {}
        }
        all = all.max(kw);
    }
    Ok((peak, part, all))
}

/// Demand charge for one billing run, before any proration.
pub fn demand_charge(profile: &BillingProfile, schedule: &TouSchedule) -> Result<f64> {
    let (peak, part, all) = max_demands(profile, schedule)?;
    let r = &schedule.demand_rates;
    Ok(peak.unwrap_or(0.0) * r.peak + part.unwrap_or(0.0) * r.part_peak + all * r.max)
}

/// Station O&M plus annualized capital over `billing_days`.
pub fn station_costs(params: &StationCostParams, station_count: f64, billing_days: f64) -> Result<f64> {
    params.validate()?;
    if !(station_count >= 0.0) {
        return Err(Error::validation(format!(
            "station count must be nonnegative, got {station_count}"
        )));
    }
    Ok((params.om_annual + params.capital_annualized) * station_count * billing_days / 365.0)
}

/// One technology's share of a fleet bill.
#[derive(Debug, Clone, Copy)]
pub struct TechBill<'a> {
    pub profile: &'a BillingProfile,
    pub schedule: &'a TouSchedule,
    pub stations: f64,
    pub costs: &'a StationCostParams,
}

impl TechBill<'_> {
    pub fn bill(&self, billing_days: f64, demand_proration: f64) -> Result<CostBreakdown> {
        let energy = energy_charge(self.profile, self.schedule)?;
        let demand = demand_charge(self.profile, self.schedule)? * demand_proration;
        let stations = station_costs(self.costs, self.stations, billing_days)?;
        Ok(CostBreakdown::new(energy, demand, stations))
    }
}

/// Bills each technology's aggregate profile under its own tariff and sums
/// the results. No netting across technologies.
pub fn total_cost(
    l2: TechBill<'_>,
    ufc: TechBill<'_>,
    billing_days: f64,
    demand_proration: f64,
) -> Result<CostBreakdown> {
    if !(demand_proration >= 0.0) {
        return Err(Error::validation(format!(
            "demand proration must be nonnegative, got {demand_proration}"
        )));
    }
    Ok(l2.bill(billing_days, demand_proration)? + ufc.bill(billing_days, demand_proration)?)
}

// ---------------------------------------------------------------------------
// JSON configuration

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TechKind {
    L2,
    Ufc,
}

impl TechKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TechKind::L2 => "l2",
            TechKind::Ufc => "ufc",
        }
    }
}

/// One rule: `period` applies on `days` from `start` (inclusive) to `end`
/// (exclusive). Times are `HH:MM` on the 15-minute grid; `24:00` closes a day.
/// `days` accepts `mon`..`sun`, `weekdays`, `weekends`, `all`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodRule {
    pub days: Vec<String>,
    pub start: String,
    pub end: String,
    pub period: Period,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeasonConfig {
    pub periods: Vec<PeriodRule>,
    pub energy_rates: EnergyRates,
    pub demand_rates: DemandRates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TariffConfig {
    pub summer: SeasonConfig,
    pub winter: SeasonConfig,
}

/// The tariff config file: named tariffs, which tariff bills which charger
/// technology, and per-technology station costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TariffBook {
    #[serde(default)]
    pub description: Option<String>,
    pub tariffs: BTreeMap<String, TariffConfig>,
    pub assignment: BTreeMap<TechKind, String>,
    pub station_costs: BTreeMap<TechKind, StationCostParams>,
}

const DEFAULT_TARIFFS_JSON: &str = include_str!("../data/default_tariffs.json");

impl TariffBook {
    pub fn from_json(text: &str) -> Result<Self> {
        let book: TariffBook =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("tariff config: {e}")))?;
        book.validate()?;
        Ok(book)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Reconstructed E-19 / E-20 secondary defaults. Demand rates and station
    /// costs are the published values; period windows and energy rates are
    /// approximations.
    pub fn default_book() -> Self {
        Self::from_json(DEFAULT_TARIFFS_JSON).expect("bundled tariff config is valid")
    }

    pub fn default_json() -> &'static str {
        DEFAULT_TARIFFS_JSON
    }

    pub fn validate(&self) -> Result<()> {
        for kind in [TechKind::L2, TechKind::Ufc] {
            let name = self
                .assignment
                .get(&kind)
                .ok_or_else(|| Error::Config(format!("no tariff assigned to {}", kind.as_str())))?;
            if !self.tariffs.contains_key(name) {
                return Err(Error::Config(format!(
                    "{} is assigned unknown tariff `{name}`",
                    kind.as_str()
                )));
            }
            self.station_costs
                .get(&kind)
                .ok_or_else(|| Error::Config(format!("no station costs for {}", kind.as_str())))?
                .validate()?;
        }
        for name in self.tariffs.keys() {
            for season in [Season::Summer, Season::Winter] {
                self.schedule(name, season)?;
            }
        }
        Ok(())
    }

    pub fn schedule(&self, tariff_name: &str, season: Season) -> Result<TouSchedule> {
        let t = self
            .tariffs
            .get(tariff_name)
            .ok_or_else(|| Error::Config(format!("unknown tariff `{tariff_name}`")))?;
        let cfg = match season {
            Season::Summer => &t.summer,
            Season::Winter => &t.winter,
        };
        let classification = classify_week(&cfg.periods)
            .map_err(|e| Error::Config(format!("{tariff_name}/{season}: {e}")))?;
        TouSchedule::from_classification(
            tariff_name,
            season,
            classification,
            cfg.energy_rates,
            cfg.demand_rates,
        )
    }

    pub fn schedule_for(&self, kind: TechKind, season: Season) -> Result<TouSchedule> {
        let name = self
            .assignment
            .get(&kind)
            .ok_or_else(|| Error::Config(format!("no tariff assigned to {}", kind.as_str())))?;
        self.schedule(name, season)
    }

    pub fn station_costs_for(&self, kind: TechKind) -> Result<StationCostParams> {
        self.station_costs
            .get(&kind)
            .copied()
            .ok_or_else(|| Error::Config(format!("no station costs for {}", kind.as_str())))
    }
}

fn parse_days(days: &[String]) -> std::result::Result<Vec<usize>, String> {
    const NAMES: [&str; 7] = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];
    let mut out = Vec::new();
    for d in days {
        match d.to_ascii_lowercase().as_str() {
            "weekdays" => out.extend(0..5),
            "weekends" => out.extend(5..7),
            "all" => out.extend(0..7),
            other => match NAMES.iter().position(|n| *n == other) {
                Some(i) => out.push(i),
                None => return Err(format!("unknown day `{d}`")),
            },
        }
    }
    if out.is_empty() {
        return Err("rule has no days".into());
    }
    Ok(out)
}

fn parse_interval_boundary(s: &str) -> std::result::Result<usize, String> {
    let (h, m) = s
        .split_once(':')
        .ok_or_else(|| format!("time `{s}` is not HH:MM"))?;
    let h: u32 = h.parse().map_err(|_| format!("bad hour in `{s}`"))?;
    let m: u32 = m.parse().map_err(|_| format!("bad minute in `{s}`"))?;
    let minutes = h * 60 + m;
    if m >= 60 || minutes > MINUTES_PER_DAY {
        return Err(format!("time `{s}` out of range"));
    }
    if !minutes.is_multiple_of(BILLING_MINUTES) {
        return Err(format!("time `{s}` is not on the {BILLING_MINUTES}-minute grid"));
    }
    Ok((minutes / BILLING_MINUTES) as usize)
}

/// Expands period rules into one period per 15-minute interval of the week.
/// Overlapping or missing coverage is an error.
pub fn classify_week(rules: &[PeriodRule]) -> std::result::Result<Vec<Period>, String> {
    let mut slots: Vec<Option<Period>> = vec![None; WEEK_INTERVALS];
    for (k, rule) in rules.iter().enumerate() {
        let days = parse_days(&rule.days).map_err(|e| format!("rule {k}: {e}"))?;
        let start = parse_interval_boundary(&rule.start).map_err(|e| format!("rule {k}: {e}"))?;
        let end = parse_interval_boundary(&rule.end).map_err(|e| format!("rule {k}: {e}"))?;
        if start >= end {
            return Err(format!("rule {k}: start {} is not before end {}", rule.start, rule.end));
        }
        for day in days {
            for i in start..end {
                let slot = &mut slots[day * DAY_INTERVALS + i];
                if let Some(prev) = slot.replace(rule.period) {
                    return Err(format!(
                        "rule {k} overlaps an earlier {prev} rule on day {day} at {:02}:{:02}",
                        i * 15 / 60,
                        i * 15 % 60
                    ));
                }
            }
        }
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            p.ok_or_else(|| {
                let (day, t) = (i / DAY_INTERVALS, i % DAY_INTERVALS);
                format!("gap: no rule covers day {day} at {:02}:{:02}", t * 15 / 60, t * 15 % 60)
            })
        })
        .collect()
}
