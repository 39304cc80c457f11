//! Acceptance gate. Each test checks one criterion at its stated tolerance and
//! writes a single `criterion N ...: PASS|FAIL` line to stdout (uncaptured, so
//! the lines show up in a plain `cargo test` run).

mod common;

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{bisect_tipping_point, brute_force_min_peak};
use ufc_core::arrival::default_fixture;
use ufc_core::fleet::{blend_profiles, session_duration, synthesize_profile, DESIGN_SESSION_KWH};
use ufc_core::objectives::{regional_peak_share, vot_tipping_point, GridContext, SessionHours};
use ufc_core::peakshave::{apply_dispatch, min_peak_dispatch, min_peak_dispatch_with, TerminalSoc};
use ufc_core::sweep::{run_sweep, CostBasis, SweepSetup};
use ufc_core::tariff::{demand_charge, energy_charge, station_costs, WEEK_INTERVALS};
use ufc_core::{
    ArrivalProfile, Battery, BillingProfile, ChargerTech, Execution, ScenarioResult, Season,
    StationCostParams, TariffBook, WEEK_SLOTS,
};

fn report(n: u32, name: &str, checks: &[(&str, bool, String)]) {
    let mut out = std::io::stdout().lock();
    let pass = checks.iter().all(|c| c.1);
    let detail: Vec<String> = checks
        .iter()
        .map(|(label, ok, d)| format!("{label} {} [{d}]", if *ok { "ok" } else { "FAILED" }))
        .collect();
    writeln!(out, "criterion {n:>2} {name}: {} ({})", if pass { "PASS" } else { "FAIL" }, detail.join("; ")).unwrap();
    drop(out);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    assert!(failed.is_empty(), "criterion {n} failed checks: {failed:?}");
}

fn random_arrivals(rng: &mut ChaCha8Rng) -> ArrivalProfile {
    let sparse = rng.random_bool(0.3);
    let counts = (0..WEEK_SLOTS)
        .map(|_| if sparse && rng.random_bool(0.9) { 0.0 } else { rng.random_range(0.0..5.0) })
        .collect();
    ArrivalProfile::new(counts, "random").unwrap()
}

fn fixture_sweep(season: Season) -> (SweepSetup, Vec<ScenarioResult>) {
    let setup = SweepSetup::from_book(
        default_fixture(),
        ChargerTech::level2(),
        ChargerTech::ufc(),
        &TariffBook::default_book(),
        season,
    )
    .unwrap();
    let results = run_sweep(&setup, 11, Execution::default()).unwrap();
    (setup, results)
}

#[test]
fn criterion_01_session_duration() {
    let start = Instant::now();
    let l2 = session_duration(&ChargerTech::level2()).unwrap();
    let ufc = session_duration(&ChargerTech::ufc()).unwrap();
    let elapsed = start.elapsed();
    report(
        1,
        "session duration",
        &[
            ("L2 20 h", l2 == 20.0, format!("{l2} h")),
            ("UFC 4 min", ufc * 60.0 == 4.0, format!("{} min", ufc * 60.0)),
            ("runtime < 1 ms", elapsed < Duration::from_millis(1), format!("{elapsed:?}")),
        ],
    );
}

#[test]
fn criterion_02_energy_conservation() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (l2, ufc) = (ChargerTech::level2(), ChargerTech::ufc());
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let a = random_arrivals(&mut rng);
        let want = a.total() * DESIGN_SESSION_KWH;
        for share in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let p = blend_profiles(&a, share, &l2, &ufc).unwrap();
            worst = worst.max((p.total_energy() - want).abs() / want);
        }
    }
    let elapsed = start.elapsed();
    report(
        2,
        "energy conservation",
        &[
            ("1000 profiles x 5 shares within 1e-9", worst <= 1e-9, format!("worst rel err {worst:.2e}")),
            ("runtime < 5 s", elapsed < Duration::from_secs(5), format!("{elapsed:?}")),
        ],
    );
}

#[test]
fn criterion_03_peak_dominance() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (l2, ufc) = (ChargerTech::level2(), ChargerTech::ufc());
    let mut violations = 0;
    for _ in 0..500 {
        let a = random_arrivals(&mut rng);
        let pl = synthesize_profile(&a, &l2).unwrap().peak();
        let pu = synthesize_profile(&a, &ufc).unwrap().peak();
        if pu < pl * (1.0 - 1e-12) {
            violations += 1;
        }
    }
    let uniform = ArrivalProfile::new(vec![1.0; WEEK_SLOTS], "uniform").unwrap();
    let pl = synthesize_profile(&uniform, &l2).unwrap().peak();
    let pu = synthesize_profile(&uniform, &ufc).unwrap().peak();
    report(
        3,
        "peak dominance",
        &[
            ("UFC peak >= L2 peak on 500 profiles", violations == 0, format!("{violations} violations")),
            ("uniform equality within 1e-9", (pu - pl).abs() <= 1e-9 * pu, format!("L2 {pl} kW, UFC {pu} kW")),
        ],
    );
}

fn affine_residual(values: &[f64], shares: &[f64]) -> f64 {
    let (v0, v1) = (values[0], values[values.len() - 1]);
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    shares
        .iter()
        .zip(values)
        .map(|(s, v)| (v - ((1.0 - s) * v0 + s * v1)).abs() / scale)
        .fold(0.0, f64::max)
}

fn min_second_difference(values: &[f64]) -> f64 {
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    values.windows(3).map(|w| (w[0] + w[2] - 2.0 * w[1]) / scale).fold(f64::INFINITY, f64::min)
}

#[test]
fn criterion_04_affinity_and_convexity() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (l2, ufc) = (ChargerTech::level2(), ChargerTech::ufc());
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let a = random_arrivals(&mut rng);
        let p0 = synthesize_profile(&a, &l2).unwrap();
        let p1 = synthesize_profile(&a, &ufc).unwrap();
        let s = rng.random_range(0.0..=1.0);
        let b = blend_profiles(&a, s, &l2, &ufc).unwrap();
        for t in 0..WEEK_SLOTS {
            let want = (1.0 - s) * p0.kw[t] + s * p1.kw[t];
            worst = worst.max((b.kw[t] - want).abs() / want.abs().max(1.0));
        }
    }

    let mut checks = vec![("blend affine within 1e-12", worst <= 1e-12, format!("worst {worst:.2e}"))];
    for season in [Season::Summer, Season::Winter] {
        let (_, r) = fixture_sweep(season);
        let shares: Vec<f64> = r.iter().map(|x| x.ufc_share).collect();
        let col = |f: fn(&ScenarioResult) -> f64| r.iter().map(f).collect::<Vec<f64>>();
        let energy_worst = [
            affine_residual(&col(|x| x.cost.energy_peak), &shares),
            affine_residual(&col(|x| x.cost.energy_part_peak), &shares),
            affine_residual(&col(|x| x.cost.energy_off_peak), &shares),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        let demand = min_second_difference(&col(|x| x.cost.demand));
        let peak = min_second_difference(&col(|x| x.observed_peak_kw));
        checks.push(("energy columns affine < 1e-9", energy_worst < 1e-9, format!("{season} residual {energy_worst:.2e}")));
        checks.push(("demand convex", demand >= -1e-12, format!("{season} min 2nd diff {demand:.2e}")));
        checks.push(("observed peak convex", peak >= -1e-12, format!("{season} min 2nd diff {peak:.2e}")));
    }
    report(4, "affinity and convexity", &checks);
}

#[test]
fn criterion_05_billing_arithmetic() {
    let book = TariffBook::default_book();
    let flat = BillingProfile::new(vec![100.0; WEEK_INTERVALS]).unwrap();
    let e19_summer = demand_charge(&flat, &book.schedule("E-19-secondary", Season::Summer).unwrap()).unwrap();
    let e20_winter = demand_charge(&flat, &book.schedule("E-20-secondary", Season::Winter).unwrap()).unwrap();
    // hand arithmetic on the published demand rates
    let want_e19 = 100.0 * 19.02 + 100.0 * 5.23 + 100.0 * 17.87;
    let want_e20 = 100.0 * 0.12 + 100.0 * 17.74;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut winter_peak_energy = 0.0_f64;
    for name in ["E-19-secondary", "E-20-secondary"] {
        let w = book.schedule(name, Season::Winter).unwrap();
        for _ in 0..100 {
            let p = BillingProfile::new((0..WEEK_INTERVALS).map(|_| rng.random_range(0.0..1e5)).collect()).unwrap();
            winter_peak_energy = winter_peak_energy.max(energy_charge(&p, &w).unwrap().peak.abs());
        }
    }
    let cents = |x: f64| (x * 100.0).round();
    report(
        5,
        "billing arithmetic",
        &[
            ("E-19 summer $4212", cents(e19_summer) == cents(want_e19) && cents(want_e19) == 421_200.0, format!("${e19_summer:.2}")),
            ("E-20 winter $1786", cents(e20_winter) == cents(want_e20) && cents(want_e20) == 178_600.0, format!("${e20_winter:.2}")),
            ("winter peak energy $0", winter_peak_energy == 0.0, format!("max ${winter_peak_energy}")),
        ],
    );
}

#[test]
fn criterion_06_station_costs() {
    let l2 = station_costs(&StationCostParams::level2(), 1.0, 365.0).unwrap();
    let ufc = station_costs(&StationCostParams::ufc(), 1.0, 365.0).unwrap();
    report(
        6,
        "station costs",
        &[
            ("L2 station-year $792", l2 == 792.0, format!("${l2}")),
            ("UFC station-year $7904", ufc == 7904.0, format!("${ufc}")),
        ],
    );
}

#[test]
fn criterion_07_regional_peak_share() {
    let r = regional_peak_share(&GridContext::default(), 60_000.0).unwrap();
    let percent = (r.fraction * 1000.0).round() / 10.0;
    report(
        7,
        "regional peak share",
        &[
            ("fraction rounds to 0.6%", percent == 0.6, format!("{:.4}%", r.fraction * 100.0)),
            (
                "baseline 9834.8 +/- 0.1 MW",
                (r.regional_baseline_mw - 9834.8).abs() <= 0.1,
                format!("{:.4} MW", r.regional_baseline_mw),
            ),
        ],
    );
}

#[test]
fn criterion_08_tipping_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let hours = SessionHours::default();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let c0 = rng.random_range(0.0..5e6);
        let c1 = c0 + rng.random_range(-5e5..2e6);
        let arrivals = rng.random_range(1.0..1e5);
        let closed = vot_tipping_point(c0, c1, arrivals, hours).unwrap();
        worst = worst.max((closed - bisect_tipping_point(c0, c1, arrivals)).abs());
    }
    let mut mismatches = 0;
    for season in [Season::Summer, Season::Winter] {
        let (_, r) = fixture_sweep(season);
        for x in &r {
            let no_vot = x.ev_user_total.iter().find(|v| v.rate == 0.0).unwrap();
            if no_vot.total != x.cost.total {
                mismatches += 1;
            }
        }
    }
    report(
        8,
        "tipping point",
        &[
            ("closed form vs bisection within $0.001/h", worst <= 1e-3, format!("worst {worst:.2e}")),
            ("VOT 0 user total == owner total", mismatches == 0, format!("{mismatches} mismatches over 22 scenarios")),
        ],
    );
}

#[test]
fn criterion_09_peak_shaving() {
    const LEVELS: usize = 800;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut worst, mut invalid) = (0.0_f64, 0);
    for case in 0..200 {
        let n = rng.random_range(1..=12);
        let load: Vec<f64> = (0..n).map(|_| rng.random_range(100.0..400.0)).collect();
        let cap = rng.random_range(1.0..40.0);
        let init = rng.random_range(0..=LEVELS) as f64 * cap / LEVELS as f64;
        let eta = [1.0, 0.9, 0.81][case % 3];
        let b = Battery::new(cap, rng.random_range(10.0..150.0), rng.random_range(10.0..150.0), eta, init).unwrap();
        let terminal = if case % 4 == 0 { TerminalSoc::Free } else { TerminalSoc::Cyclic };
        let profile = BillingProfile::new(load.clone()).unwrap();
        let ours = min_peak_dispatch_with(&profile, &b, terminal).unwrap();
        if apply_dispatch(&profile, &ours.plan).is_err() {
            invalid += 1;
        }
        let oracle = brute_force_min_peak(&load, &b, terminal, LEVELS);
        worst = worst.max((ours.achieved_peak_kw - oracle).abs() / oracle);
    }

    let load = BillingProfile::new((0..WEEK_INTERVALS).map(|_| rng.random_range(0.0..500.0)).collect()).unwrap();
    let empty = Battery::new(0.0, 100.0, 100.0, 0.9, 0.0).unwrap();
    let r = min_peak_dispatch(&load, &empty).unwrap();
    let noop = r.plan.charge_kw.iter().chain(&r.plan.discharge_kw).all(|&x| x == 0.0)
        && r.achieved_peak_kw == r.original_peak_kw
        && apply_dispatch(&load, &r.plan).unwrap() == load;
    report(
        9,
        "peak shaving optimality",
        &[
            ("within 1% of brute force on 200 instances", worst <= 0.01, format!("worst gap {:.3}%", worst * 100.0)),
            ("plans validate", invalid == 0, format!("{invalid} invalid")),
            ("zero capacity is a no-op", noop, format!("peak {} -> {}", r.original_peak_kw, r.achieved_peak_kw)),
        ],
    );
}

// Frozen from the first verified run of the shipped bimodal fixture.
struct Frozen {
    season: Season,
    tipping_point: f64,
    /// (share, total, demand, observed_peak_kw, peak_period_energy_kwh)
    rows: [(f64, f64, f64, f64, f64); 3],
}

const FROZEN: [Frozen; 2] = [
    Frozen {
        season: Season::Summer,
        tipping_point: 1.4071875982633466,
        rows: [
            (0.0, 1377239.2603320796, 960145.194782217, 24086.576323599827, 536849.6082479518),
            (0.5, 2167877.8292447855, 1508419.172420857, 33385.997159730585, 607303.158515173),
            (1.0, 2958516.3981574923, 2056693.1500594972, 48111.16039470229, 677756.708782394),
        ],
    },
    Frozen {
        season: Season::Winter,
        tipping_point: 0.8041604092217898,
        rows: [
            (0.0, 820887.415520525, 431607.466175435, 24086.576323599827, 536849.6082479518),
            (0.5, 1272710.780015801, 645436.395412409, 33385.997159730585, 607303.158515173),
            (1.0, 1724534.144511077, 859265.3246493828, 48111.16039470229, 677756.708782394),
        ],
    },
];

#[test]
fn criterion_10_fixture_directions_and_regression() {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
    let mut checks = Vec::new();

    let start = Instant::now();
    let (_, summer) = fixture_sweep(Season::Summer);
    let elapsed = start.elapsed();
    checks.push(("11-step sweep < 1 s", elapsed < Duration::from_secs(1), format!("{elapsed:?}")));

    let (s0, s1) = (&summer[0], &summer[10]);
    checks.push((
        "peak-period energy rises",
        s1.peak_period_energy_kwh > s0.peak_period_energy_kwh,
        format!("{:+.1}%", 100.0 * (s1.peak_period_energy_kwh / s0.peak_period_energy_kwh - 1.0)),
    ));
    checks.push((
        "observed peak rises",
        s1.observed_peak_kw > s0.observed_peak_kw,
        format!("{:+.1}%", 100.0 * (s1.observed_peak_kw / s0.observed_peak_kw - 1.0)),
    ));
    let d = |f: fn(&ScenarioResult) -> f64| f(s1) - f(s0);
    let d_demand = d(|x| x.cost.demand);
    let others = [
        d(|x| x.cost.energy_peak),
        d(|x| x.cost.energy_part_peak),
        d(|x| x.cost.energy_off_peak),
        d(|x| x.cost.om_and_capital),
    ];
    let d_total = d(|x| x.cost.total);
    checks.push((
        "summer cost growth led by demand",
        others.iter().all(|o| d_demand > o.abs()) && d_demand > 0.5 * d_total,
        format!("demand {:.0}% of +${d_total:.0}", 100.0 * d_demand / d_total),
    ));

    let mut drift = Vec::new();
    for f in &FROZEN {
        let (setup, r) = fixture_sweep(f.season);
        let tp = setup.prepare().unwrap().tipping_point(CostBasis::Total).unwrap().vot_per_hour;
        if !close(tp, f.tipping_point) {
            drift.push(format!("{} tipping point {tp}", f.season));
        }
        for &(share, total, demand, peak, energy) in &f.rows {
            let x = r.iter().find(|x| x.ufc_share == share).unwrap();
            for (name, got, want) in [
                ("total", x.cost.total, total),
                ("demand", x.cost.demand, demand),
                ("observed_peak", x.observed_peak_kw, peak),
                ("peak_energy", x.peak_period_energy_kwh, energy),
            ] {
                if !close(got, want) {
                    drift.push(format!("{} share {share} {name}: {got} vs {want}", f.season));
                }
            }
        }
    }
    checks.push(("frozen regression values", drift.is_empty(), if drift.is_empty() { "26 values".into() } else { drift.join(", ") }));
    report(10, "fixture directions and regression", &checks);
}
