//! Battery dispatch against a 15-minute load profile.
//!
//! Two objectives are supported. [`min_peak_dispatch`] finds the lowest grid
//! draw cap a battery can hold by bisecting on the cap with a greedy
//! feasibility pass. [`min_cost_dispatch`] minimizes energy plus demand charges
//! with a linear program.
//!
//! Battery power is positive when discharging into the load. Grid draw is
//! `load - discharge + charge` and must stay nonnegative.

use std::io::Write;
use std::time::Duration;

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fleet::{csv_io, BillingProfile};
use crate::tariff::{demand_charge, energy_charge, CostBreakdown, Period, TouSchedule};
use crate::BILLING_MINUTES;

const DT_HOURS: f64 = BILLING_MINUTES as f64 / 60.0;

/// Bisection stops once the cap bracket is narrower than this, kW.
pub const CAP_TOLERANCE_KW: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalSoc {
    /// End the horizon at the initial state of charge.
    #[default]
    Cyclic,
    /// Any terminal state of charge.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Battery {
    pub capacity_kwh: f64,
    pub max_charge_kw: f64,
    pub max_discharge_kw: f64,
    /// Fraction of grid energy stored when charging.
    pub charge_efficiency: f64,
    /// Fraction of stored energy delivered when discharging.
    pub discharge_efficiency: f64,
    pub initial_soc_kwh: f64,
}

impl Battery {
    /// Round-trip efficiency split evenly as `sqrt(eta)` each way.
    pub fn new(
        capacity_kwh: f64,
        max_charge_kw: f64,
        max_discharge_kw: f64,
        round_trip_efficiency: f64,
        initial_soc_kwh: f64,
    ) -> Result<Self> {
        let eta = round_trip_efficiency.sqrt();
        Self::with_split(capacity_kwh, max_charge_kw, max_discharge_kw, eta, eta, initial_soc_kwh)
            .map_err(|e| match e {
                Error::Validation(m) => Error::Validation(format!(
                    "{m} (round-trip efficiency {round_trip_efficiency})"
                )),
                e => e,
            })
    }

    pub fn with_split(
        capacity_kwh: f64,
        max_charge_kw: f64,
        max_discharge_kw: f64,
        charge_efficiency: f64,
        discharge_efficiency: f64,
        initial_soc_kwh: f64,
    ) -> Result<Self> {
        let b = Self {
            capacity_kwh,
            max_charge_kw,
            max_discharge_kw,
            charge_efficiency,
            discharge_efficiency,
            initial_soc_kwh,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.capacity_kwh >= 0.0 && self.capacity_kwh.is_finite()) {
            return Err(Error::validation(format!(
                "battery capacity must be nonnegative, got {} kWh",
                self.capacity_kwh
            )));
        }
        if !(self.max_charge_kw > 0.0 && self.max_discharge_kw > 0.0)
            || !(self.max_charge_kw.is_finite() && self.max_discharge_kw.is_finite())
        {
            return Err(Error::validation(format!(
                "battery power limits must be positive, got charge {} kW / discharge {} kW",
                self.max_charge_kw, self.max_discharge_kw
            )));
        }
        for eta in [self.charge_efficiency, self.discharge_efficiency] {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::validation(format!(
                    "battery efficiency must lie in (0, 1], got {eta}"
                )));
            }
        }
        if !(self.initial_soc_kwh >= 0.0 && self.initial_soc_kwh <= self.capacity_kwh) {
            return Err(Error::validation(format!(
                "initial state of charge {} kWh outside [0, {}]",
                self.initial_soc_kwh, self.capacity_kwh
            )));
        }
        Ok(())
    }

    pub fn round_trip_efficiency(&self) -> f64 {
        self.charge_efficiency * self.discharge_efficiency
    }

    /// State of charge after one interval.
    fn step(&self, soc: f64, charge_kw: f64, discharge_kw: f64) -> f64 {
        soc + (charge_kw * self.charge_efficiency - discharge_kw / self.discharge_efficiency) * DT_HOURS
    }

    fn tolerance(&self, scale: f64) -> f64 {
        1e-9 * scale.max(self.capacity_kwh).max(self.max_charge_kw).max(self.max_discharge_kw).max(1.0)
    }
}

/// Per-interval charge and discharge power with the resulting state of charge
/// at every interval boundary (`soc_kwh.len() == charge_kw.len() + 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchPlan {
    pub battery: Battery,
    pub terminal: TerminalSoc,
    pub charge_kw: Vec<f64>,
    pub discharge_kw: Vec<f64>,
    pub soc_kwh: Vec<f64>,
}

impl DispatchPlan {
    pub fn idle(battery: Battery, terminal: TerminalSoc, slots: usize) -> Self {
        Self {
            battery,
            terminal,
            charge_kw: vec![0.0; slots],
            discharge_kw: vec![0.0; slots],
            soc_kwh: vec![battery.initial_soc_kwh; slots + 1],
        }
    }

    /// Builds a plan from per-interval powers, recomputing the SoC trajectory.
    pub fn from_powers(
        battery: Battery,
        terminal: TerminalSoc,
        charge_kw: Vec<f64>,
        discharge_kw: Vec<f64>,
    ) -> Self {
        let mut soc = Vec::with_capacity(charge_kw.len() + 1);
        let mut s = battery.initial_soc_kwh;
        soc.push(s);
        for (c, d) in charge_kw.iter().zip(&discharge_kw) {
            s = battery.step(s, *c, *d);
            soc.push(s);
        }
        Self {
            battery,
            terminal,
            charge_kw,
            discharge_kw,
            soc_kwh: soc,
        }
    }

    pub fn len(&self) -> usize {
        self.charge_kw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charge_kw.is_empty()
    }

    /// Net battery power per interval, positive when discharging.
    pub fn battery_kw(&self) -> Vec<f64> {
        self.discharge_kw
            .iter()
            .zip(&self.charge_kw)
            .map(|(d, c)| d - c)
            .collect()
    }

    pub fn energy_charged_kwh(&self) -> f64 {
        self.charge_kw.iter().sum::<f64>() * DT_HOURS
    }

    pub fn energy_discharged_kwh(&self) -> f64 {
        self.discharge_kw.iter().sum::<f64>() * DT_HOURS
    }

    /// `slot,load_kw,battery_kw,grid_kw,soc_kwh`; SoC is the value at the end
    /// of the interval.
    pub fn write_csv<W: Write>(&self, out: W, load: &BillingProfile) -> Result<()> {
        let grid = apply_dispatch(load, self)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["slot", "load_kw", "battery_kw", "grid_kw", "soc_kwh"])
            .map_err(csv_io)?;
        for (i, b) in self.battery_kw().iter().enumerate() {
            w.write_record([
                i.to_string(),
                load.kw[i].to_string(),
                b.to_string(),
                grid.kw[i].to_string(),
                self.soc_kwh[i + 1].to_string(),
            ])
            .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Grid draw after dispatch. Every plan invariant is checked first; the error
/// names the first offending interval.
pub fn apply_dispatch(profile: &BillingProfile, plan: &DispatchPlan) -> Result<BillingProfile> {
    let n = profile.len();
    if plan.charge_kw.len() != n || plan.discharge_kw.len() != n || plan.soc_kwh.len() != n + 1 {
        return Err(Error::validation(format!(
            "plan covers {} intervals but the profile has {n}",
            plan.charge_kw.len()
        )));
    }
    let b = &plan.battery;
    b.validate()?;
    let tol = b.tolerance(profile.peak());
    if (plan.soc_kwh[0] - b.initial_soc_kwh).abs() > tol {
        return Err(Error::validation(format!(
            "plan starts at {} kWh, battery initial SoC is {} kWh",
            plan.soc_kwh[0], b.initial_soc_kwh
        )));
    }
    let mut grid = Vec::with_capacity(n);
    for t in 0..n {
        let (c, d) = (plan.charge_kw[t], plan.discharge_kw[t]);
        if !(c >= -tol && c <= b.max_charge_kw + tol) {
            return Err(Error::validation(format!(
                "slot {t}: charge {c} kW outside [0, {}]",
                b.max_charge_kw
            )));
        }
        if !(d >= -tol && d <= b.max_discharge_kw + tol) {
            return Err(Error::validation(format!(
                "slot {t}: discharge {d} kW outside [0, {}]",
                b.max_discharge_kw
            )));
        }
        let expected = b.step(plan.soc_kwh[t], c, d);
        if (plan.soc_kwh[t + 1] - expected).abs() > tol * (t + 1) as f64 {
            return Err(Error::validation(format!(
                "slot {t}: SoC {} kWh inconsistent with dispatch (expected {expected})",
                plan.soc_kwh[t + 1]
            )));
        }
        let s = plan.soc_kwh[t + 1];
        if s < -tol || s > b.capacity_kwh + tol {
            return Err(Error::validation(format!(
                "slot {t}: SoC {s} kWh outside [0, {}]",
                b.capacity_kwh
            )));
        }
        let g = profile.kw[t] - d + c;
        if g < -tol {
            return Err(Error::validation(format!("slot {t}: grid draw {g} kW is negative")));
        }
        grid.push(g.max(0.0));
    }
    if plan.terminal == TerminalSoc::Cyclic
        && (plan.soc_kwh[n] - b.initial_soc_kwh).abs() > tol * (n.max(1)) as f64
    {
        return Err(Error::validation(format!(
            "slot {}: terminal SoC {} kWh differs from initial {} kWh",
            n.saturating_sub(1),
            plan.soc_kwh[n],
            b.initial_soc_kwh
        )));
    }
    BillingProfile::new(grid)
}

/// Whether grid draw can be held at or below `cap_kw` over the whole horizon.
///
/// Forward pass that discharges exactly the excess above the cap and otherwise
/// recharges as fast as headroom, power and capacity allow. This keeps the SoC
/// as high as any feasible schedule can at every step, so it fails only when
/// every schedule fails.
pub fn cap_is_feasible(load: &[f64], battery: &Battery, terminal: TerminalSoc, cap_kw: f64) -> bool {
    let tol = battery.tolerance(cap_kw);
    let mut soc = battery.initial_soc_kwh;
    for &l in load {
        if l > cap_kw {
            let d = l - cap_kw;
            if d > battery.max_discharge_kw + tol {
                return false;
            }
            soc -= d / battery.discharge_efficiency * DT_HOURS;
            if soc < -tol {
                return false;
            }
        } else {
            let c = battery.max_charge_kw.min(cap_kw - l);
            soc = (soc + c * battery.charge_efficiency * DT_HOURS).min(battery.capacity_kwh);
        }
    }
    match terminal {
        TerminalSoc::Cyclic => soc >= battery.initial_soc_kwh - tol * load.len().max(1) as f64,
        TerminalSoc::Free => true,
    }
}

/// Plan that holds grid draw at or below `cap_kw`, charging only as much and
/// as late as later discharges (and the cyclic target) require.
fn plan_for_cap(
    load: &[f64],
    battery: &Battery,
    terminal: TerminalSoc,
    cap_kw: f64,
) -> Option<DispatchPlan> {
    let n = load.len();
    let tol = battery.tolerance(cap_kw);
    let headroom = |l: f64| battery.max_charge_kw.min((cap_kw - l).max(0.0));

    // required[t]: least SoC at the start of interval t that still meets
    // every later discharge and the terminal target
    let mut required = vec![0.0; n + 1];
    required[n] = match terminal {
        TerminalSoc::Cyclic => battery.initial_soc_kwh,
        TerminalSoc::Free => 0.0,
    };
    for t in (0..n).rev() {
        let l = load[t];
        if l - cap_kw > battery.max_discharge_kw + tol {
            return None;
        }
        required[t] = if l > cap_kw {
            required[t + 1] + (l - cap_kw) / battery.discharge_efficiency * DT_HOURS
        } else {
            (required[t + 1] - headroom(l) * battery.charge_efficiency * DT_HOURS).max(0.0)
        };
        if required[t] > battery.capacity_kwh + tol {
            return None;
        }
    }
    if required[0] > battery.initial_soc_kwh + tol {
        return None;
    }

    let mut charge = vec![0.0; n];
    let mut discharge = vec![0.0; n];
    let mut soc = battery.initial_soc_kwh;
    for t in 0..n {
        let l = load[t];
        if l > cap_kw {
            discharge[t] = (l - cap_kw).min(battery.max_discharge_kw);
        } else {
            let deficit = required[t + 1] - soc;
            if deficit > 0.0 {
                charge[t] = (deficit / (battery.charge_efficiency * DT_HOURS)).min(headroom(l));
            }
        }
        soc = battery.step(soc, charge[t], discharge[t]);
    }
    Some(DispatchPlan::from_powers(*battery, terminal, charge, discharge))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakShaveResult {
    pub plan: DispatchPlan,
    pub original_peak_kw: f64,
    pub achieved_peak_kw: f64,
    /// Feasible cap at which bisection stopped.
    pub cap_kw: f64,
}

/// Lowest achievable peak grid draw, via bisection on the cap over
/// `[0, max(load)]` until the bracket is under [`CAP_TOLERANCE_KW`].
pub fn min_peak_dispatch(profile: &BillingProfile, battery: &Battery) -> Result<PeakShaveResult> {
    min_peak_dispatch_with(profile, battery, TerminalSoc::Cyclic)
}

pub fn min_peak_dispatch_with(
    profile: &BillingProfile,
    battery: &Battery,
    terminal: TerminalSoc,
) -> Result<PeakShaveResult> {
    battery.validate()?;
    let load = &profile.kw;
    let original = profile.peak();
    if !cap_is_feasible(load, battery, terminal, original) {
        return Err(Error::Infeasible(format!(
            "battery cannot meet its terminal SoC constraint even without shaving (cap {original} kW)"
        )));
    }
    let (mut lo, mut hi) = (0.0, original);
    if cap_is_feasible(load, battery, terminal, lo) {
        hi = lo;
    }
    while hi - lo > CAP_TOLERANCE_KW {
        let mid = 0.5 * (lo + hi);
        if cap_is_feasible(load, battery, terminal, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let plan = plan_for_cap(load, battery, terminal, hi).ok_or_else(|| {
        Error::Infeasible(format!("no dispatch plan holds the feasible cap {hi} kW"))
    })?;
    let shaved = apply_dispatch(profile, &plan)?;
    Ok(PeakShaveResult {
        achieved_peak_kw: shaved.peak(),
        original_peak_kw: original,
        cap_kw: hi,
        plan,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostDispatchOptions {
    pub demand_proration: f64,
    pub terminal: TerminalSoc,
    /// $/kWh on battery throughput; breaks ties against simultaneous charge
    /// and discharge.
    pub throughput_penalty: f64,
    pub time_limit_secs: u64,
}

impl Default for CostDispatchOptions {
    fn default() -> Self {
        Self {
            demand_proration: 1.0,
            terminal: TerminalSoc::Cyclic,
            throughput_penalty: 1e-7,
            time_limit_secs: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostShaveResult {
    pub plan: DispatchPlan,
    /// Bill of the shaved profile (station costs excluded).
    pub cost: CostBreakdown,
    pub unshaved_cost: CostBreakdown,
    pub achieved_peak_kw: f64,
}

fn bill(profile: &BillingProfile, schedule: &TouSchedule, proration: f64) -> Result<CostBreakdown> {
    Ok(CostBreakdown::new(
        energy_charge(profile, schedule)?,
        demand_charge(profile, schedule)? * proration,
        0.0,
    ))
}

/// Dispatch minimizing energy plus demand charges of the shaved profile.
pub fn min_cost_dispatch(
    profile: &BillingProfile,
    battery: &Battery,
    schedule: &TouSchedule,
) -> Result<CostShaveResult> {
    min_cost_dispatch_with(profile, battery, schedule, &CostDispatchOptions::default())
}

/// Linear program over per-interval charge `c`, discharge `d` and SoC `s`,
/// with one auxiliary max-demand variable per billed demand category:
///
/// ```text
/// min  Σ rate(t)·dt·(c_t − d_t) + Σ_k proration·rate_k·M_k + ε·Σ (c_t + d_t)
/// s.t. s_t = s_{t−1} + dt·(η_c·c_t − d_t/η_d)
///      d_t − c_t ≤ load_t
///      M_k ≥ load_t − d_t + c_t     for t in category k
///      0 ≤ c ≤ c_max, 0 ≤ d ≤ d_max, 0 ≤ s ≤ capacity
/// ```
pub fn min_cost_dispatch_with(
    profile: &BillingProfile,
    battery: &Battery,
    schedule: &TouSchedule,
    opts: &CostDispatchOptions,
) -> Result<CostShaveResult> {
    battery.validate()?;
    schedule.check_alignment(profile)?;
    if !(opts.demand_proration >= 0.0 && opts.throughput_penalty >= 0.0) {
        return Err(Error::validation("proration and throughput penalty must be nonnegative"));
    }
    let n = profile.len();
    let load = &profile.kw;
    let unshaved = bill(profile, schedule, opts.demand_proration)?;
    if battery.capacity_kwh == 0.0 || n == 0 {
        let plan = DispatchPlan::idle(*battery, opts.terminal, n);
        return Ok(CostShaveResult {
            plan,
            cost: unshaved,
            unshaved_cost: unshaved,
            achieved_peak_kw: profile.peak(),
        });
    }

    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let rates = schedule.energy_rates;
    let eps = opts.throughput_penalty;
    let mut charge = Vec::with_capacity(n);
    let mut discharge = Vec::with_capacity(n);
    let mut soc = Vec::with_capacity(n);
    for t in 0..n {
        let r = rates.rate(schedule.period_of(t)) * DT_HOURS;
        charge.push(lp.add_var(r + eps, (0.0, battery.max_charge_kw)));
        discharge.push(lp.add_var(-r + eps, (0.0, battery.max_discharge_kw)));
        let bounds = if t + 1 == n && opts.terminal == TerminalSoc::Cyclic {
            (battery.initial_soc_kwh, battery.initial_soc_kwh)
        } else {
            (0.0, battery.capacity_kwh)
        };
        soc.push(lp.add_var(0.0, bounds));
    }

    for t in 0..n {
        let mut expr = vec![
            (soc[t], 1.0),
            (charge[t], -battery.charge_efficiency * DT_HOURS),
            (discharge[t], DT_HOURS / battery.discharge_efficiency),
        ];
        let rhs = if t == 0 {
            battery.initial_soc_kwh
        } else {
            expr.push((soc[t - 1], -1.0));
            0.0
        };
        lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, rhs);
        lp.add_constraint([(discharge[t], 1.0), (charge[t], -1.0)], ComparisonOp::Le, load[t]);
    }

    let d = schedule.demand_rates;
    let categories: [(Option<Period>, f64); 3] = [
        (Some(Period::Peak), d.peak),
        (Some(Period::PartPeak), d.part_peak),
        (None, d.max),
    ];
    for (period, rate) in categories {
        let weight = rate * opts.demand_proration;
        if weight <= 0.0 {
            continue;
        }
        let slots: Vec<usize> = (0..n)
            .filter(|&t| period.is_none_or(|p| schedule.period_of(t) == p))
            .collect();
        if slots.is_empty() {
            continue;
        }
        let m = lp.add_var(weight, (0.0, f64::INFINITY));
        for t in slots {
            lp.add_constraint(
                [(m, 1.0), (discharge[t], 1.0), (charge[t], -1.0)],
                ComparisonOp::Ge,
                load[t],
            );
        }
    }
    lp.set_time_limit(Duration::from_secs(opts.time_limit_secs));

    let solver_error = |message: String, iterations: u64| Error::Solver {
        message,
        iterations: iterations as usize,
        slots: n,
    };
    let outcome = lp.solve().map_err(|e| match e {
        microlp::Error::Infeasible => {
            Error::Infeasible("cost dispatch LP has no feasible point".into())
        }
        e => solver_error(e.to_string(), 0),
    })?;
    let stats = outcome.stats();
    let solution = outcome
        .into_solution()
        .map_err(|i| solver_error(format!("stopped early: {:?}", i.termination_reason()), stats.lp_iterations))?;

    let tol = battery.tolerance(profile.peak());
    let snap = |v: f64, hi: f64| if v < tol { 0.0 } else { v.min(hi) };
    let c: Vec<f64> = charge
        .iter()
        .map(|&v| snap(solution.var_value(v), battery.max_charge_kw))
        .collect();
    let dch: Vec<f64> = discharge
        .iter()
        .enumerate()
        .map(|(t, &v)| snap(solution.var_value(v), battery.max_discharge_kw).min(load[t] + c[t]))
        .collect();
    let plan = DispatchPlan::from_powers(*battery, opts.terminal, c, dch);
    let shaved = apply_dispatch(profile, &plan).map_err(|e| {
        solver_error(format!("LP solution failed plan validation: {e}"), stats.lp_iterations)
    })?;
    Ok(CostShaveResult {
        cost: bill(&shaved, schedule, opts.demand_proration)?,
        achieved_peak_kw: shaved.peak(),
        unshaved_cost: unshaved,
        plan,
    })
}
