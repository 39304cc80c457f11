//! UFC replacement sweep: fleet load → billing → objectives for each share.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::arrival::ArrivalProfile;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fleet::{
    check_share, csv_io, downsample_15min, session_duration, synthesize_profile, BillingProfile,
    ChargerTech, PowerProfile,
};
use crate::objectives::{
    ev_user_cost, grid_metrics, vot_tipping_point, ScenarioResult, SessionHours, VotCost, VotModel,
};
use crate::tariff::{
    total_cost, CostBreakdown, Season, StationCostParams, TariffBook, TechBill, TechKind,
    TouSchedule,
};
use crate::REGION_PLUGS;

/// Everything needed to evaluate scenarios for one season.
#[derive(Debug, Clone)]
pub struct SweepSetup {
    pub arrivals: ArrivalProfile,
    pub l2: ChargerTech,
    pub ufc: ChargerTech,
    pub season: Season,
    pub l2_schedule: TouSchedule,
    pub ufc_schedule: TouSchedule,
    /// Peak window for grid metrics; the summer schedule in both seasons.
    pub metric_window: TouSchedule,
    pub l2_costs: StationCostParams,
    pub ufc_costs: StationCostParams,
    pub vots: Vec<VotModel>,
    pub demand_proration: f64,
    pub plugs: f64,
}

impl SweepSetup {
    /// L2 billed under the book's `l2` tariff, UFC under its `ufc` tariff, and
    /// grid metrics measured on the L2 tariff's summer peak window.
    pub fn from_book(
        arrivals: ArrivalProfile,
        l2: ChargerTech,
        ufc: ChargerTech,
        book: &TariffBook,
        season: Season,
    ) -> Result<Self> {
        Ok(Self {
            arrivals,
            l2,
            ufc,
            season,
            l2_schedule: book.schedule_for(TechKind::L2, season)?,
            ufc_schedule: book.schedule_for(TechKind::Ufc, season)?,
            metric_window: book.schedule_for(TechKind::L2, Season::Summer)?,
            l2_costs: book.station_costs_for(TechKind::L2)?,
            ufc_costs: book.station_costs_for(TechKind::Ufc)?,
            vots: VotModel::standard_set(),
            demand_proration: 1.0,
            plugs: REGION_PLUGS,
        })
    }

    /// Synthesizes the two pure-technology profiles once.
    pub fn prepare(&self) -> Result<Evaluator<'_>> {
        if !(self.plugs >= 0.0) {
            return Err(Error::validation(format!("plug count must be nonnegative, got {}", self.plugs)));
        }
        if !(self.demand_proration >= 0.0) {
            return Err(Error::validation(format!(
                "demand proration must be nonnegative, got {}",
                self.demand_proration
            )));
        }
        let power_l2 = synthesize_profile(&self.arrivals, &self.l2)?;
        let power_ufc = synthesize_profile(&self.arrivals, &self.ufc)?;
        let billing_l2 = downsample_15min(&power_l2)?;
        let billing_ufc = downsample_15min(&power_ufc)?;
        for (sched, p) in [
            (&self.l2_schedule, &billing_l2),
            (&self.ufc_schedule, &billing_ufc),
            (&self.metric_window, &billing_l2),
        ] {
            sched.check_alignment(p)?;
        }
        let hours = SessionHours {
            l2: session_duration(&self.l2)?,
            ufc: session_duration(&self.ufc)?,
        };
        Ok(Evaluator {
            setup: self,
            power_l2,
            power_ufc,
            billing_l2,
            billing_ufc,
            hours,
            arrivals_total: self.arrivals.total(),
        })
    }
}

/// Memoized pure profiles. Intermediate shares are affine blends of these,
/// which is exact because synthesis and downsampling are linear in arrivals.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    setup: &'a SweepSetup,
    power_l2: PowerProfile,
    power_ufc: PowerProfile,
    billing_l2: BillingProfile,
    billing_ufc: BillingProfile,
    hours: SessionHours,
    arrivals_total: f64,
}

impl Evaluator<'_> {
    pub fn setup(&self) -> &SweepSetup {
        self.setup
    }

    pub fn session_hours(&self) -> SessionHours {
        self.hours
    }

    pub fn arrivals_total(&self) -> f64 {
        self.arrivals_total
    }

    /// Combined 4-minute fleet profile.
    pub fn power_profile(&self, share: f64) -> Result<PowerProfile> {
        check_share(share)?;
        Ok(PowerProfile::affine(&self.power_l2, &self.power_ufc, share))
    }

    /// Per-technology billing profiles `(l2, ufc)` at a share.
    pub fn billing_parts(&self, share: f64) -> Result<(BillingProfile, BillingProfile)> {
        check_share(share)?;
        Ok((self.billing_l2.scaled(1.0 - share), self.billing_ufc.scaled(share)))
    }

    /// Combined 15-minute fleet profile.
    pub fn billing_profile(&self, share: f64) -> Result<BillingProfile> {
        let (l2, ufc) = self.billing_parts(share)?;
        BillingProfile::new(l2.kw.iter().zip(&ufc.kw).map(|(a, b)| a + b).collect())
    }

    pub fn cost(&self, share: f64) -> Result<CostBreakdown> {
        let s = self.setup;
        let (l2, ufc) = self.billing_parts(share)?;
        let days = s.arrivals.days() as f64;
        total_cost(
            TechBill {
                profile: &l2,
                schedule: &s.l2_schedule,
                stations: s.plugs * (1.0 - share),
                costs: &s.l2_costs,
            },
            TechBill {
                profile: &ufc,
                schedule: &s.ufc_schedule,
                stations: s.plugs * share,
                costs: &s.ufc_costs,
            },
            days,
            s.demand_proration,
        )
    }

    pub fn evaluate(&self, share: f64) -> Result<ScenarioResult> {
        let s = self.setup;
        let cost = self.cost(share)?;
        let ev_user_total = s
            .vots
            .iter()
            .map(|v| {
                Ok(VotCost {
                    label: v.label.clone(),
                    rate: v.rate,
                    total: ev_user_cost(&cost, self.arrivals_total, share, self.hours, v)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let grid = grid_metrics(&self.billing_profile(share)?, &s.metric_window)?;
        Ok(ScenarioResult {
            ufc_share: share,
            season: s.season,
            cost,
            ev_user_total,
            peak_period_energy_kwh: grid.peak_period_energy_kwh,
            total_energy_kwh: grid.total_energy_kwh,
            observed_peak_kw: grid.observed_peak_kw,
            arrivals_total: self.arrivals_total,
            peak_window: format!("{}/{}", s.metric_window.tariff_name, s.metric_window.season),
        })
    }

    /// EV-user tipping point between the all-L2 and all-UFC fleets.
    pub fn tipping_point(&self, basis: CostBasis) -> Result<TippingPoint> {
        let c0 = self.cost(0.0)?;
        let c1 = self.cost(1.0)?;
        let (elec0, elec1) = (basis.of(&c0), basis.of(&c1));
        Ok(TippingPoint {
            season: self.setup.season,
            basis,
            vot_per_hour: vot_tipping_point(elec0, elec1, self.arrivals_total, self.hours)?,
            cost_share0: elec0,
            cost_share1: elec1,
            arrivals_total: self.arrivals_total,
        })
    }
}

/// Which cost components enter the tipping point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostBasis {
    /// Energy, demand and station costs.
    #[default]
    Total,
    EnergyOnly,
}

impl CostBasis {
    pub fn of(self, c: &CostBreakdown) -> f64 {
        match self {
            CostBasis::Total => c.total,
            CostBasis::EnergyOnly => c.energy(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TippingPoint {
    pub season: Season,
    pub basis: CostBasis,
    pub vot_per_hour: f64,
    pub cost_share0: f64,
    pub cost_share1: f64,
    pub arrivals_total: f64,
}

/// Shares `i / (steps - 1)` for `i in 0..steps`.
pub fn sweep_shares(steps: usize) -> Result<Vec<f64>> {
    if steps < 2 {
        return Err(Error::validation(format!("sweep needs at least 2 steps, got {steps}")));
    }
    let last = (steps - 1) as f64;
    Ok((0..steps).map(|i| i as f64 / last).collect())
}

/// One result per share, ordered by share.
pub fn run_sweep(setup: &SweepSetup, steps: usize, exec: Execution) -> Result<Vec<ScenarioResult>> {
    let shares = sweep_shares(steps)?;
    let eval = setup.prepare()?;
    exec.map(&shares, |&s| eval.evaluate(s)).into_iter().collect()
}

/// Writes sweep rows with one `ev_user_total_<label>` column per VOT model.
pub fn write_sweep_csv<W: Write>(out: W, results: &[ScenarioResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "share",
        "energy_peak",
        "energy_part_peak",
        "energy_off_peak",
        "demand",
        "om",
        "total",
    ]
    .map(String::from)
    .to_vec();
    if let Some(first) = results.first() {
        header.extend(first.ev_user_total.iter().map(|v| format!("ev_user_total_{}", v.label)));
    }
    header.extend(["peak_period_energy", "observed_peak", "total_energy"].map(String::from));
    w.write_record(&header).map_err(csv_io)?;
    for r in results {
        let c = &r.cost;
        let mut row: Vec<String> = [
            r.ufc_share,
            c.energy_peak,
            c.energy_part_peak,
            c.energy_off_peak,
            c.demand,
            c.om_and_capital,
            c.total,
        ]
        .iter()
        .map(f64::to_string)
        .collect();
        row.extend(r.ev_user_total.iter().map(|v| v.total.to_string()));
        row.extend(
            [r.peak_period_energy_kwh, r.observed_peak_kw, r.total_energy_kwh]
                .iter()
                .map(f64::to_string),
        );
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}
