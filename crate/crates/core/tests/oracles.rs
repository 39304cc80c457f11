mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{bisect_tipping_point, brute_force_min_peak, grid_search_min_cost, DT};
use ufc_core::objectives::{vot_tipping_point, SessionHours};
use ufc_core::peakshave::{
    apply_dispatch, min_cost_dispatch_with, min_peak_dispatch_with, CostDispatchOptions, TerminalSoc,
    CAP_TOLERANCE_KW,
};
use ufc_core::tariff::{DemandRates, EnergyRates};
use ufc_core::{Battery, BillingProfile, Period, Season, TouSchedule};

const PEAK_LEVELS: usize = 800;

fn random_grid_battery(rng: &mut ChaCha8Rng, levels: usize, cap: (f64, f64), power: (f64, f64)) -> Battery {
    let capacity = rng.random_range(cap.0..cap.1);
    let init = rng.random_range(0..=levels) as f64 * capacity / levels as f64;
    let eta = match rng.random_range(0..4) {
        0 => 1.0,
        1 => 0.9,
        2 => 0.81,
        _ => rng.random_range(0.7..1.0),
    };
    Battery::new(
        capacity,
        rng.random_range(power.0..power.1),
        rng.random_range(power.0..power.1),
        eta,
        init,
    )
    .unwrap()
}

#[test]
fn min_peak_matches_brute_force_on_small_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for case in 0..150 {
        let n = rng.random_range(1..=12);
        let load: Vec<f64> = (0..n).map(|_| rng.random_range(100.0..400.0)).collect();
        let b = random_grid_battery(&mut rng, PEAK_LEVELS, (1.0, 40.0), (10.0, 150.0));
        let terminal = if case % 3 == 0 { TerminalSoc::Free } else { TerminalSoc::Cyclic };
        let profile = BillingProfile::new(load.clone()).unwrap();

        let ours = min_peak_dispatch_with(&profile, &b, terminal).unwrap();
        let oracle = brute_force_min_peak(&load, &b, terminal, PEAK_LEVELS);
        apply_dispatch(&profile, &ours.plan).unwrap();

        // the oracle searches a subset of plans, so it can never beat us by
        // more than the bisection tolerance
        assert!(
            ours.achieved_peak_kw <= oracle + CAP_TOLERANCE_KW + 1e-9,
            "case {case}: ours {} vs oracle {oracle}",
            ours.achieved_peak_kw
        );
        let gap = (ours.achieved_peak_kw - oracle).abs() / oracle;
        worst = worst.max(gap);
        assert!(gap <= 0.01, "case {case}: ours {} vs oracle {oracle}", ours.achieved_peak_kw);
    }
    println!("largest relative gap to brute force: {worst:.2e}");
}

#[test]
fn two_interval_example_shaves_to_half() {
    let load = [100.0, 0.0];
    let b = Battery::new(12.5, 100.0, 100.0, 1.0, 12.5).unwrap();
    let profile = BillingProfile::new(load.to_vec()).unwrap();
    let ours = min_peak_dispatch_with(&profile, &b, TerminalSoc::Cyclic).unwrap();
    let oracle = brute_force_min_peak(&load, &b, TerminalSoc::Cyclic, 100);
    assert!((oracle - 50.0).abs() < 1e-9);
    assert!((ours.achieved_peak_kw - 50.0).abs() <= CAP_TOLERANCE_KW);
    let grid = apply_dispatch(&profile, &ours.plan).unwrap();
    for g in &grid.kw {
        assert!((g - 50.0).abs() <= CAP_TOLERANCE_KW);
    }
}

fn random_schedule(rng: &mut ChaCha8Rng, n: usize) -> TouSchedule {
    let periods: Vec<Period> = (0..n).map(|_| Period::ALL[rng.random_range(0..3)]).collect();
    let energy = EnergyRates {
        peak: rng.random_range(0.05..0.4),
        part_peak: rng.random_range(0.05..0.3),
        off_peak: rng.random_range(0.02..0.2),
    };
    // at most two billed demand categories keeps the oracle enumeration small
    let demand = match rng.random_range(0..3) {
        0 => DemandRates { peak: 0.0, part_peak: 0.0, max: rng.random_range(1.0..20.0) },
        1 => DemandRates { peak: rng.random_range(1.0..20.0), part_peak: 0.0, max: rng.random_range(1.0..20.0) },
        _ => DemandRates { peak: 0.0, part_peak: rng.random_range(1.0..10.0), max: rng.random_range(1.0..20.0) },
    };
    TouSchedule::from_classification("oracle", Season::Summer, periods, energy, demand).unwrap()
}

#[test]
fn min_cost_matches_grid_search_on_small_instances() {
    const LEVELS: usize = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..20 {
        let n = rng.random_range(2..=6);
        let load: Vec<f64> = (0..n).map(|_| rng.random_range(20.0..200.0)).collect();
        let b = random_grid_battery(&mut rng, LEVELS, (2.0, 30.0), (20.0, 150.0));
        let schedule = random_schedule(&mut rng, n);
        let terminal = if case % 4 == 0 { TerminalSoc::Free } else { TerminalSoc::Cyclic };
        let profile = BillingProfile::new(load.clone()).unwrap();
        let opts = CostDispatchOptions { terminal, ..Default::default() };

        let ours = min_cost_dispatch_with(&profile, &b, &schedule, &opts).unwrap();
        apply_dispatch(&profile, &ours.plan).unwrap();
        let oracle = grid_search_min_cost(&load, &b, &schedule, terminal, LEVELS);

        // the LP is never worse than any plan on the grid
        let scale = oracle.abs().max(1.0);
        assert!(ours.cost.total <= oracle + 1e-6 * scale, "case {case}: lp {} vs grid {oracle}", ours.cost.total);

        // and the grid is at most one SoC step per interval away from the LP
        let step = b.capacity_kwh / LEVELS as f64;
        let power_err = step / (b.charge_efficiency * DT);
        let e = &schedule.energy_rates;
        let d = &schedule.demand_rates;
        let bound = power_err * (e.peak.max(e.part_peak).max(e.off_peak) * DT * n as f64 + d.peak + d.part_peak + d.max);
        assert!(
            oracle - ours.cost.total <= 2.0 * bound,
            "case {case}: lp {} vs grid {oracle} (bound {bound})",
            ours.cost.total
        );
    }
}

#[test]
fn tipping_point_matches_bisection() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let hours = SessionHours::default();
    for _ in 0..100 {
        let c0 = rng.random_range(0.0..5e6);
        let c1 = c0 + rng.random_range(-5e5..2e6);
        let arrivals = rng.random_range(1.0..1e5);
        let closed = vot_tipping_point(c0, c1, arrivals, hours).unwrap();
        let oracle = bisect_tipping_point(c0, c1, arrivals);
        assert!((closed - oracle).abs() <= 1e-3, "{closed} vs {oracle}");
    }
}

#[test]
fn tipping_point_hand_example() {
    let v = vot_tipping_point(0.0, 1993.33, 100.0, SessionHours::default()).unwrap();
    assert!((v - 1.0).abs() < 1e-3, "{v}");
    assert!((bisect_tipping_point(0.0, 1993.33, 100.0) - v).abs() < 1e-9);
}
