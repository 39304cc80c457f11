use std::path::{Path, PathBuf};

use serde::Serialize;
use ufc_core::arrival::{
    read_arrivals, synthetic_bimodal_profile, FIXTURE_EVENING_PEAK, FIXTURE_MORNING_PEAK,
    FIXTURE_RAW_DAILY_ARRIVALS, FIXTURE_SPREAD, GROWTH_FACTOR, REGION_SHARE,
};
use ufc_core::inventory::{fetch_inventory, rating_distribution, FetchOptions};
use ufc_core::objectives::{regional_peak_share, GridContext, RegionalPeakShare};
use ufc_core::peakshave::{
    min_cost_dispatch_with, min_peak_dispatch_with, Battery, CostDispatchOptions, TerminalSoc,
};
use ufc_core::sweep::{run_sweep, write_sweep_csv, CostBasis, SweepSetup, TippingPoint};
use ufc_core::tariff::TechKind;
use ufc_core::{ArrivalProfile, BillingProfile, ChargerTech, Execution, Season, TariffBook};

use crate::config::{pick, RunConfig};
use crate::output::{ensure_dir, to_json, write_csv, write_json, Provenance};
use crate::{
    Cli, CliError, Command, IngestArgs, PeakShaveArgs, ScenarioArgs, SimulateArgs, SweepArgs,
    TippingArgs,
};

pub const API_KEY_ENV: &str = "UFCSIM_API_KEY";

pub fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let jobs = pick(&cli.jobs, &file.jobs);
    let exec = if jobs == Some(1) {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    Execution::with_jobs(jobs, || match cli.command {
        Command::Simulate(a) => simulate(a, &file),
        Command::Sweep(a) => sweep(a, &file, exec),
        Command::TippingPoint(a) => tipping_point(a, &file),
        Command::PeakShave(a) => peak_shave(a, &file),
        Command::IngestStations(a) => ingest_stations(a, &file),
    })
}

fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn parse_season(s: &str) -> Result<Season, CliError> {
    s.parse().map_err(CliError::Core)
}

fn seasons(flag: &Option<String>, file: &Option<String>) -> Result<Vec<Season>, CliError> {
    match pick(flag, file) {
        Some(s) => Ok(vec![parse_season(&s)?]),
        None => Ok(vec![Season::Summer, Season::Winter]),
    }
}

/// Settings shared by the scenario commands, after merging flags and file.
#[derive(Debug, Clone, Serialize)]
struct Scenario {
    arrivals: String,
    tariffs: String,
    region_share: f64,
    growth_factor: f64,
    demand_proration: f64,
    #[serde(skip)]
    out: PathBuf,
    #[serde(skip)]
    profile: ArrivalProfile,
    #[serde(skip)]
    book: TariffBook,
}

impl Scenario {
    fn resolve(a: &ScenarioArgs, f: &RunConfig, prov: &mut Provenance) -> Result<Self, CliError> {
        let arrivals = pick(&a.arrivals, &f.arrivals).unwrap_or_else(|| "fixture".into());
        let region_share = pick(&a.region_share, &f.region_share).unwrap_or(REGION_SHARE);
        let growth_factor = pick(&a.growth_factor, &f.growth_factor).unwrap_or(GROWTH_FACTOR);
        let demand_proration = pick(&a.demand_proration, &f.demand_proration).unwrap_or(1.0);
        if !(demand_proration >= 0.0) {
            return Err(CliError::Usage(format!(
                "--demand-proration must be nonnegative, got {demand_proration}"
            )));
        }

        let raw = if arrivals == "fixture" {
            synthetic_bimodal_profile(
                FIXTURE_RAW_DAILY_ARRIVALS,
                FIXTURE_MORNING_PEAK,
                FIXTURE_EVENING_PEAK,
                FIXTURE_SPREAD,
            )?
        } else {
            let path = Path::new(&arrivals);
            let bytes = read_input(path)?;
            prov.add_bytes("arrivals", &bytes);
            let label = path.file_stem().map_or("arrivals".into(), |s| s.to_string_lossy().into_owned());
            read_arrivals(bytes.as_slice(), label)?
        };
        let profile = raw.apply_corrections(region_share, growth_factor)?;

        let (tariffs, book) = match pick(&a.tariffs, &f.tariffs) {
            Some(path) => {
                let bytes = read_input(&path)?;
                prov.add_bytes("tariffs", &bytes);
                let text = String::from_utf8(bytes)
                    .map_err(|_| CliError::Usage(format!("{} is not UTF-8", path.display())))?;
                (path.display().to_string(), TariffBook::from_json(&text)?)
            }
            None => ("builtin".into(), TariffBook::default_book()),
        };
        let out = pick(&a.out, &f.out).unwrap_or_else(|| PathBuf::from("out"));
        let s = Self {
            arrivals,
            tariffs,
            region_share,
            growth_factor,
            demand_proration,
            out,
            profile,
            book,
        };
        prov.add_settings(&s)?;
        Ok(s)
    }

    fn setup(&self, season: Season) -> Result<SweepSetup, CliError> {
        let mut s = SweepSetup::from_book(
            self.profile.clone(),
            ChargerTech::level2(),
            ChargerTech::ufc(),
            &self.book,
            season,
        )?;
        s.demand_proration = self.demand_proration;
        Ok(s)
    }
}

fn share_arg(flag: &Option<f64>, file: &Option<f64>, default: Option<f64>) -> Result<f64, CliError> {
    let share = pick(flag, file)
        .or(default)
        .ok_or_else(|| CliError::Usage("--share is required".into()))?;
    if !(0.0..=1.0).contains(&share) {
        return Err(CliError::Usage(format!("--share must lie in [0, 1], got {share}")));
    }
    Ok(share)
}

fn simulate(a: SimulateArgs, f: &RunConfig) -> Result<(), CliError> {
    let mut prov = Provenance::new();
    let share = share_arg(&a.share, &f.share, None)?;
    let season = parse_season(
        &pick(&a.season, &f.season).ok_or_else(|| CliError::Usage("--season is required".into()))?,
    )?;
    let sc = Scenario::resolve(&a.scenario, f, &mut prov)?;
    prov.add_settings(&(share, season))?;
    let hash = prov.finish();

    let setup = sc.setup(season)?;
    let eval = setup.prepare()?;
    let result = eval.evaluate(share)?;
    ensure_dir(&sc.out)?;
    let power = eval.power_profile(share)?;
    write_csv(&sc.out.join("power_profile.csv"), &hash, |w| power.write_csv(w))?;
    let billing = eval.billing_profile(share)?;
    write_csv(&sc.out.join("billing.csv"), &hash, |w| billing.write_csv(w))?;
    write_json(&sc.out.join("scenario.json"), &hash, &result)?;
    println!(
        "share {share} {season}: total ${:.2}, observed peak {:.1} kW -> {}",
        result.cost.total,
        result.observed_peak_kw,
        sc.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    season: Season,
    steps: usize,
    scenario: &'a Scenario,
    results: &'a [ufc_core::ScenarioResult],
    tipping_point: TippingPoint,
    /// Added observed peak (share 1 minus share 0) against the regional baseline.
    regional_peak: RegionalPeakShare,
    peak_window_note: &'static str,
}

fn sweep(a: SweepArgs, f: &RunConfig, exec: Execution) -> Result<(), CliError> {
    let mut prov = Provenance::new();
    let steps = pick(&a.steps, &f.steps).unwrap_or(11);
    if steps < 2 {
        return Err(CliError::Usage(format!("--steps must be at least 2, got {steps}")));
    }
    let seasons = seasons(&a.season, &f.season)?;
    let sc = Scenario::resolve(&a.scenario, f, &mut prov)?;
    prov.add_settings(&(steps, &seasons))?;
    let hash = prov.finish();
    ensure_dir(&sc.out)?;

    for season in seasons {
        let setup = sc.setup(season)?;
        let results = run_sweep(&setup, steps, exec)?;
        let eval = setup.prepare()?;
        let added = results.last().map_or(0.0, |r| r.observed_peak_kw)
            - results.first().map_or(0.0, |r| r.observed_peak_kw);
        let summary = SweepSummary {
            season,
            steps,
            scenario: &sc,
            results: &results,
            tipping_point: eval.tipping_point(CostBasis::Total)?,
            regional_peak: regional_peak_share(&GridContext::default(), added.max(0.0))?,
            peak_window_note: "peak_period_energy uses the summer peak window in both seasons",
        };
        let csv_path = sc.out.join(format!("sweep_{season}.csv"));
        write_csv(&csv_path, &hash, |w| write_sweep_csv(w, &results))?;
        write_json(&sc.out.join(format!("sweep_{season}.json")), &hash, &summary)?;
        println!("{season}: {} scenarios -> {}", results.len(), csv_path.display());
    }
    Ok(())
}

fn tipping_point(a: TippingArgs, f: &RunConfig) -> Result<(), CliError> {
    let mut prov = Provenance::new();
    let seasons = seasons(&a.season, &f.season)?;
    let basis = if a.energy_only || f.energy_only.unwrap_or(false) {
        CostBasis::EnergyOnly
    } else {
        CostBasis::Total
    };
    let sc = Scenario::resolve(&a.scenario, f, &mut prov)?;
    prov.add_settings(&basis)?;
    let hash = prov.finish();
    let mut points = Vec::new();
    for season in seasons {
        let setup = sc.setup(season)?;
        let tp = setup.prepare()?.tipping_point(basis)?;
        println!("{season}: {:.4} $/h", tp.vot_per_hour);
        points.push(tp);
    }
    if a.scenario.out.is_some() || f.out.is_some() {
        ensure_dir(&sc.out)?;
        write_json(&sc.out.join("tipping_point.json"), &hash, &points)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ShaveSummary {
    objective: String,
    load: String,
    share: Option<f64>,
    season: Season,
    tariff: Option<String>,
    battery: Battery,
    terminal: TerminalSoc,
    original_peak_kw: f64,
    achieved_peak_kw: f64,
    cap_kw: Option<f64>,
    cost: Option<ufc_core::CostBreakdown>,
    unshaved_cost: Option<ufc_core::CostBreakdown>,
    energy_charged_kwh: f64,
    energy_discharged_kwh: f64,
}

fn peak_shave(a: PeakShaveArgs, f: &RunConfig) -> Result<(), CliError> {
    let mut prov = Provenance::new();
    let b = &f.battery;
    let kwh = pick(&a.battery_kwh, &b.kwh)
        .ok_or_else(|| CliError::Usage("--battery-kwh is required".into()))?;
    let kw = pick(&a.battery_kw, &b.kw)
        .ok_or_else(|| CliError::Usage("--battery-kw is required".into()))?;
    let efficiency = pick(&a.efficiency, &b.efficiency).unwrap_or(1.0);
    let initial = pick(&a.initial_soc, &b.initial_soc).unwrap_or(0.5 * kwh);
    let battery = Battery::new(kwh, kw, kw, efficiency, initial)?;
    let objective = pick(&a.objective, &b.objective).unwrap_or_else(|| "peak".into());
    let terminal = if a.free_terminal || b.free_terminal.unwrap_or(false) {
        TerminalSoc::Free
    } else {
        TerminalSoc::Cyclic
    };
    let season = parse_season(&pick(&a.season, &f.season).unwrap_or_else(|| "summer".into()))?;
    let sc = Scenario::resolve(&a.scenario, f, &mut prov)?;

    let (profile, load_label, share) = match &a.load {
        Some(path) => {
            let bytes = read_input(path)?;
            prov.add_bytes("load", &bytes);
            (BillingProfile::read_csv(bytes.as_slice())?, path.display().to_string(), None)
        }
        None => {
            let share = share_arg(&a.share, &f.share, Some(1.0))?;
            let setup = sc.setup(season)?;
            let profile = setup.prepare()?.billing_profile(share)?;
            (profile, "fleet".to_string(), Some(share))
        }
    };
    prov.add_settings(&(&battery, &objective, terminal, season, share))?;
    let hash = prov.finish();

    let summary;
    let plan;
    match objective.as_str() {
        "peak" => {
            let r = min_peak_dispatch_with(&profile, &battery, terminal)?;
            summary = ShaveSummary {
                objective,
                load: load_label,
                share,
                season,
                tariff: None,
                battery,
                terminal,
                original_peak_kw: r.original_peak_kw,
                achieved_peak_kw: r.achieved_peak_kw,
                cap_kw: Some(r.cap_kw),
                cost: None,
                unshaved_cost: None,
                energy_charged_kwh: r.plan.energy_charged_kwh(),
                energy_discharged_kwh: r.plan.energy_discharged_kwh(),
            };
            plan = r.plan;
        }
        "cost" => {
            // bill under the tariff of the technology serving most arrivals
            let kind = if share.unwrap_or(1.0) >= 0.5 { TechKind::Ufc } else { TechKind::L2 };
            let schedule = sc.book.schedule_for(kind, season)?;
            let opts = CostDispatchOptions {
                demand_proration: sc.demand_proration,
                terminal,
                ..Default::default()
            };
            let r = min_cost_dispatch_with(&profile, &battery, &schedule, &opts)?;
            summary = ShaveSummary {
                objective,
                load: load_label,
                share,
                season,
                tariff: Some(schedule.tariff_name.clone()),
                battery,
                terminal,
                original_peak_kw: profile.peak(),
                achieved_peak_kw: r.achieved_peak_kw,
                cap_kw: None,
                cost: Some(r.cost),
                unshaved_cost: Some(r.unshaved_cost),
                energy_charged_kwh: r.plan.energy_charged_kwh(),
                energy_discharged_kwh: r.plan.energy_discharged_kwh(),
            };
            plan = r.plan;
        }
        other => {
            return Err(CliError::Usage(format!(
                "--objective must be `peak` or `cost`, got `{other}`"
            )))
        }
    }

    ensure_dir(&sc.out)?;
    write_csv(&sc.out.join("plan.csv"), &hash, |w| plan.write_csv(w, &profile))?;
    write_json(&sc.out.join("peak_shave.json"), &hash, &summary)?;
    println!(
        "{}: peak {:.2} kW -> {:.2} kW",
        summary.objective, summary.original_peak_kw, summary.achieved_peak_kw
    );
    Ok(())
}

#[derive(Serialize)]
struct IngestReport {
    source: String,
    records: usize,
    skipped: ufc_core::inventory::SkipReport,
    distribution: ufc_core::inventory::RatingDistribution,
}

fn ingest_stations(a: IngestArgs, f: &RunConfig) -> Result<(), CliError> {
    let st = &f.stations;
    let source = pick(&a.source, &st.source)
        .ok_or_else(|| CliError::Usage("--source is required".into()))?;
    let mapping = st.mapping.clone().unwrap_or_default();
    let mut opts = FetchOptions {
        api_key: std::env::var(API_KEY_ENV).ok(),
        ..Default::default()
    };
    if let Some(h) = &st.api_key_header {
        opts.api_key_header = h.clone();
    }
    let is_url = source.starts_with("http://") || source.starts_with("https://");
    if !is_url && !Path::new(&source).exists() {
        return Err(CliError::Usage(format!("inventory source {source} does not exist")));
    }
    let inventory = fetch_inventory(&source, &mapping, &opts)?;
    let distribution = rating_distribution(&inventory.records)?;

    let mut prov = Provenance::new();
    prov.add_settings(&(&source, &mapping))?;
    if !is_url {
        prov.add_bytes("inventory", &read_input(Path::new(&source))?);
    }
    let hash = prov.finish();
    let report = IngestReport {
        source,
        records: inventory.records.len(),
        skipped: inventory.skipped,
        distribution,
    };
    // the config's `out` is a directory shared with the other commands
    let target = a.out.clone().or_else(|| f.out.as_ref().map(|d| d.join("stations.json")));
    match target {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                ensure_dir(dir)?;
            }
            write_json(&path, &hash, &report)?;
            eprintln!(
                "modal rating {} kW ({:.1}% of plugs) -> {}",
                report.distribution.modal_rating_kw,
                100.0 * report.distribution.modal_share,
                path.display()
            );
        }
        None => print!("{}", to_json(&hash, &report)?),
    }
    Ok(())
}
