//! Station-owner, EV-user and grid-operator objectives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fleet::{check_share, BillingProfile};
use crate::tariff::{CostBreakdown, Period, Season, TouSchedule};

/// A value-of-time rate applied to charging duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotModel {
    pub label: String,
    /// $/hour.
    pub rate: f64,
}

impl VotModel {
    pub fn new(label: impl Into<String>, rate: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::validation(format!("VOT rate must be nonnegative, got {rate}")));
        }
        Ok(Self {
            label: label.into(),
            rate,
        })
    }

    /// No VOT, the summer tipping point, the federal minimum wage, and average
    /// ride-hail driver income.
    pub fn standard_set() -> Vec<VotModel> {
        [
            ("no_vot", 0.00),
            ("tipping_point", 0.70),
            ("fed_min_wage", 7.25),
            ("uber_driver", 8.55),
        ]
        .into_iter()
        .map(|(label, rate)| VotModel {
            label: label.into(),
            rate,
        })
        .collect()
    }
}

/// Nominal session lengths charged to the EV user, hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionHours {
    pub l2: f64,
    pub ufc: f64,
}

impl Default for SessionHours {
    fn default() -> Self {
        Self {
            l2: 20.0,
            ufc: 1.0 / 15.0,
        }
    }
}

impl SessionHours {
    /// Fleet-average charging hours per arrival at a given UFC share.
    pub fn mean_hours(&self, ufc_share: f64) -> f64 {
        (1.0 - ufc_share) * self.l2 + ufc_share * self.ufc
    }
}

/// Station cost plus the monetized charging time of every arrival.
pub fn ev_user_cost(
    cost: &CostBreakdown,
    arrivals_total: f64,
    ufc_share: f64,
    hours: SessionHours,
    vot: &VotModel,
) -> Result<f64> {
    check_share(ufc_share)?;
    if !(arrivals_total >= 0.0) {
        return Err(Error::validation(format!(
            "arrival total must be nonnegative, got {arrivals_total}"
        )));
    }
    Ok(cost.total + vot.rate * arrivals_total * hours.mean_hours(ufc_share))
}

/// VOT rate at which an all-L2 and an all-UFC fleet cost the EV user the same.
/// Zero when UFC electricity is not more expensive.
pub fn vot_tipping_point(
    elec_cost_at_share0: f64,
    elec_cost_at_share1: f64,
    arrivals_total: f64,
    hours: SessionHours,
) -> Result<f64> {
    if !(arrivals_total > 0.0) {
        return Err(Error::validation(format!(
            "tipping point needs positive arrivals, got {arrivals_total}"
        )));
    }
    let saved = hours.l2 - hours.ufc;
    if !(saved > 0.0) {
        return Err(Error::validation("UFC sessions must be shorter than L2 sessions"));
    }
    let gap = elec_cost_at_share1 - elec_cost_at_share0;
    if gap <= 0.0 {
        return Ok(0.0);
    }
    Ok(gap / (arrivals_total * saved))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMetrics {
    /// Energy drawn during the measurement window's peak intervals.
    pub peak_period_energy_kwh: f64,
    /// Highest 15-minute demand over the horizon.
    pub observed_peak_kw: f64,
    pub total_energy_kwh: f64,
}

/// Grid-operator metrics. `window` supplies the peak-period classification;
/// winter runs measure against the summer peak window.
pub fn grid_metrics(profile: &BillingProfile, window: &TouSchedule) -> Result<GridMetrics> {
    window.check_alignment(profile)?;
    let hours = profile.slot_minutes() as f64 / 60.0;
    let peak_kw: f64 = profile
        .kw
        .iter()
        .enumerate()
        .filter(|(i, _)| window.period_of(*i) == Period::Peak)
        .map(|(_, kw)| kw)
        .sum();
    Ok(GridMetrics {
        peak_period_energy_kwh: peak_kw * hours,
        observed_peak_kw: profile.peak(),
        total_energy_kwh: profile.total_energy(),
    })
}

/// Statewide peak and population used to scale a regional baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridContext {
    pub regional_peak_mw: f64,
    pub sub_population: f64,
    pub total_population: f64,
}

impl Default for GridContext {
    /// California record peak (1 Sep 2017) and Bay Area / California population.
    fn default() -> Self {
        Self {
            regional_peak_mw: 50_116.0,
            sub_population: 7.76e6,
            total_population: 39.54e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionalPeakShare {
    pub regional_baseline_mw: f64,
    pub fraction: f64,
}

/// Sub-region baseline as the population-proportional slice of the regional
/// peak, and the fraction an added load represents of it.
pub fn regional_peak_share(ctx: &GridContext, added_peak_kw: f64) -> Result<RegionalPeakShare> {
    if !(ctx.sub_population > 0.0
        && ctx.total_population > 0.0
        && ctx.sub_population <= ctx.total_population
        && ctx.regional_peak_mw > 0.0)
    {
        return Err(Error::validation(format!("invalid grid context {ctx:?}")));
    }
    if !(added_peak_kw >= 0.0) {
        return Err(Error::validation(format!(
            "added peak must be nonnegative, got {added_peak_kw}"
        )));
    }
    let baseline = ctx.regional_peak_mw * ctx.sub_population / ctx.total_population;
    Ok(RegionalPeakShare {
        regional_baseline_mw: baseline,
        fraction: added_peak_kw / 1000.0 / baseline,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotCost {
    pub label: String,
    pub rate: f64,
    pub total: f64,
}

/// All three stakeholder views of one UFC share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub ufc_share: f64,
    pub season: Season,
    pub cost: CostBreakdown,
    pub ev_user_total: Vec<VotCost>,
    pub peak_period_energy_kwh: f64,
    pub total_energy_kwh: f64,
    pub observed_peak_kw: f64,
    pub arrivals_total: f64,
    /// Tariff and season whose peak intervals define `peak_period_energy_kwh`.
    pub peak_window: String,
}
