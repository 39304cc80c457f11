//! Independent reference solutions used by the oracle and acceptance tests.

#![allow(dead_code)]

use ufc_core::objectives::{ev_user_cost, SessionHours};
use ufc_core::peakshave::TerminalSoc;
use ufc_core::{Battery, CostBreakdown, Period, TouSchedule, VotModel};

pub const DT: f64 = 0.25;

/// Grid draw for moving the SoC by `delta_kwh` in one interval, if the move
/// respects the power limits.
fn grid_for_move(load: f64, delta_kwh: f64, b: &Battery) -> Option<f64> {
    let eps = 1e-9 * (1.0 + b.max_charge_kw.max(b.max_discharge_kw));
    if delta_kwh >= 0.0 {
        let c = delta_kwh / (b.charge_efficiency * DT);
        (c <= b.max_charge_kw + eps).then_some(load + c)
    } else {
        let d = -delta_kwh * b.discharge_efficiency / DT;
        (d <= b.max_discharge_kw + eps && d <= load + eps).then_some(load - d)
    }
}

fn soc_grid(b: &Battery, levels: usize) -> (f64, usize) {
    let step = b.capacity_kwh / levels as f64;
    let i0 = (b.initial_soc_kwh / step).round() as usize;
    assert!(
        (i0 as f64 * step - b.initial_soc_kwh).abs() < 1e-9 * b.capacity_kwh.max(1.0),
        "initial SoC must sit on the oracle grid"
    );
    (step, i0)
}

/// Lowest peak grid draw over every SoC path restricted to `levels + 1`
/// evenly spaced states, by dynamic programming over (interval, state).
pub fn brute_force_min_peak(load: &[f64], b: &Battery, terminal: TerminalSoc, levels: usize) -> f64 {
    let peak = load.iter().cloned().fold(0.0, f64::max);
    if b.capacity_kwh == 0.0 {
        return peak;
    }
    let (step, i0) = soc_grid(b, levels);
    let reach = ((b.max_charge_kw * b.charge_efficiency).max(b.max_discharge_kw / b.discharge_efficiency) * DT
        / step)
        .ceil() as usize
        + 1;
    let mut best = vec![f64::INFINITY; levels + 1];
    best[i0] = 0.0;
    for &l in load {
        let mut next = vec![f64::INFINITY; levels + 1];
        for (i, &v) in best.iter().enumerate() {
            if !v.is_finite() {
                continue;
            }
            let lo = i.saturating_sub(reach);
            let hi = (i + reach).min(levels);
            for (j, slot) in next.iter_mut().enumerate().take(hi + 1).skip(lo) {
                let delta = (j as f64 - i as f64) * step;
                if let Some(g) = grid_for_move(l, delta, b) {
                    let m = v.max(g);
                    if m < *slot {
                        *slot = m;
                    }
                }
            }
        }
        best = next;
    }
    match terminal {
        TerminalSoc::Cyclic => best[i0],
        TerminalSoc::Free => best.iter().cloned().fold(f64::INFINITY, f64::min),
    }
}

/// Cheapest bill (energy plus unprorated demand) over SoC paths restricted to
/// `levels + 1` states. Demand levels are enumerated from the finite set of
/// grid draws the restricted paths can produce; for each combination the
/// energy cost is minimized by dynamic programming under those caps.
pub fn grid_search_min_cost(
    load: &[f64],
    b: &Battery,
    schedule: &TouSchedule,
    terminal: TerminalSoc,
    levels: usize,
) -> f64 {
    let n = load.len();
    let (step, i0) = if b.capacity_kwh == 0.0 { (0.0, 0) } else { soc_grid(b, levels) };
    let levels = if b.capacity_kwh == 0.0 { 0 } else { levels };
    let d = schedule.demand_rates;
    let categories: Vec<(f64, Vec<bool>)> = [
        (d.peak, Some(Period::Peak)),
        (d.part_peak, Some(Period::PartPeak)),
        (d.max, None),
    ]
    .into_iter()
    .filter(|(rate, _)| *rate > 0.0)
    .map(|(rate, p)| (rate, (0..n).map(|t| p.is_none_or(|p| schedule.period_of(t) == p)).collect::<Vec<_>>()))
    // a category with no intervals bills nothing
    .filter(|(_, member)| member.iter().any(|&m| m))
    .collect();
    assert!(categories.len() <= 2, "oracle enumerates at most two demand categories");

    let moves: Vec<f64> = (0..=2 * levels).map(|k| (k as f64 - levels as f64) * step).collect();
    let candidates = |member: &[bool]| {
        let mut v: Vec<f64> = Vec::new();
        for t in (0..n).filter(|&t| member[t]) {
            v.extend(moves.iter().filter_map(|&m| grid_for_move(load[t], m, b)));
        }
        v.sort_by(|a, c| a.partial_cmp(c).unwrap());
        v.dedup_by(|a, c| (*a - *c).abs() < 1e-12);
        v
    };
    let cand: Vec<Vec<f64>> = categories.iter().map(|(_, m)| candidates(m)).collect();

    let energy_min = |caps: &[f64]| -> f64 {
        let cap_at = |t: usize| {
            categories
                .iter()
                .zip(caps)
                .filter(|((_, m), _)| m[t])
                .map(|(_, c)| *c)
                .fold(f64::INFINITY, f64::min)
        };
        let mut best = vec![f64::INFINITY; levels + 1];
        best[i0] = 0.0;
        for (t, &l) in load.iter().enumerate() {
            let rate = schedule.energy_rates.rate(schedule.period_of(t));
            let cap = cap_at(t) + 1e-9;
            let mut next = vec![f64::INFINITY; levels + 1];
            for (i, &v) in best.iter().enumerate() {
                if !v.is_finite() {
                    continue;
                }
                for (j, slot) in next.iter_mut().enumerate() {
                    let delta = (j as f64 - i as f64) * step;
                    if let Some(g) = grid_for_move(l, delta, b) {
                        if g <= cap {
                            let c = v + rate * g * DT;
                            if c < *slot {
                                *slot = c;
                            }
                        }
                    }
                }
            }
            best = next;
        }
        match terminal {
            TerminalSoc::Cyclic => best[i0],
            TerminalSoc::Free => best.iter().cloned().fold(f64::INFINITY, f64::min),
        }
    };

    let mut best = f64::INFINITY;
    match cand.len() {
        0 => best = energy_min(&[]),
        1 => {
            for &m in &cand[0] {
                best = best.min(energy_min(&[m]) + categories[0].0 * m);
            }
        }
        _ => {
            for &m0 in &cand[0] {
                for &m1 in &cand[1] {
                    let e = energy_min(&[m0, m1]);
                    best = best.min(e + categories[0].0 * m0 + categories[1].0 * m1);
                }
            }
        }
    }
    best
}

/// VOT at which the EV user is indifferent between all-L2 and all-UFC,
/// found by bisection on the user-cost difference.
pub fn bisect_tipping_point(cost0: f64, cost1: f64, arrivals: f64) -> f64 {
    let hours = SessionHours::default();
    let diff = |v: f64| {
        let vot = VotModel::new("bisect", v).unwrap();
        let at = |total: f64, share: f64| {
            let c = CostBreakdown { total, ..Default::default() };
            ev_user_cost(&c, arrivals, share, hours, &vot).unwrap()
        };
        at(cost0, 0.0) - at(cost1, 1.0)
    };
    if diff(0.0) >= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while diff(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if diff(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}
