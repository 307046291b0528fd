mod grid;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use dcflex::config::{load_facility_config, FacilityConfig, DEFAULT_CONFIG_TOML};
use dcflex::io::{self, plot, RunManifest};
use dcflex::milp::{backend_by_name, linearize_power_curve, SolverBackend, BACKEND_ENV};
use dcflex::scenario::{self, CostComparison, FlexibilityCell, SearchStrategy};
use dcflex::workload::{
    build_workload_profile, WorkloadProfile, WorkloadTables, DEFERRAL_DISTRIBUTION_CSV, DEFERRAL_DISTRIBUTION_FILE,
    WORKLOAD_RATIOS_CSV, WORKLOAD_RATIOS_FILE,
};
use dcflex::Error;

const EXIT_INPUT: u8 = 3;
const EXIT_SOLVER: u8 = 4;
const EXIT_OTHER: u8 = 5;
const EXIT_ORACLE_MISMATCH: u8 = 6;

const BASELINE_JSON: &str = "optimised_schedule.json";

/// Data-centre day-ahead scheduling and flexibility envelopes.
#[derive(Parser)]
#[command(name = "dcflex", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Base case: all work at arrival, fixed cold aisle, storage idle.
    Base(Common),
    /// Cost-optimal schedule over the extended horizon.
    Optimise(OptimiseArgs),
    /// Flexibility envelope around an optimised baseline.
    Flex(FlexArgs),
}

#[derive(Args)]
struct Common {
    /// Facility config (TOML). Defaults to the bundled reference facility.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding workload_ratios.csv and deferral_distribution.csv.
    #[arg(long)]
    tables: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Solver backend.
    #[arg(long, env = BACKEND_ENV)]
    solver: Option<String>,
}

#[derive(Args)]
struct OptimiseArgs {
    #[command(flatten)]
    common: Common,
    /// Linear segments for the server power curve.
    #[arg(long)]
    segments: Option<usize>,
    /// Solver time limit in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
}

#[derive(Args)]
struct FlexArgs {
    #[command(flatten)]
    common: Common,
    /// Output directory of an earlier `optimise` run.
    #[arg(long)]
    baseline: PathBuf,
    /// Start slots: `a:b:step` (b exclusive), a comma list of slots, or clock times like `00:15,17:30`.
    #[arg(long, default_value = "0:96:4", allow_hyphen_values = true)]
    t0_grid: String,
    /// Deviations in kW: `a:b:step` (b exclusive) or a comma list. Negative reduces grid draw.
    #[arg(long, default_value = "-200:201:25", allow_hyphen_values = true)]
    dp_grid: String,
    /// Cells solved concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Also resolve every cell by an exhaustive upward scan and compare.
    #[arg(long)]
    verify_linear_scan: bool,
    /// Solver time limit in seconds for each feasibility check.
    #[arg(long)]
    time_limit: Option<f64>,
}

struct Inputs {
    cfg: FacilityConfig,
    profile: WorkloadProfile,
    table_bytes: Vec<(String, Vec<u8>)>,
}

fn load_inputs(c: &Common) -> Result<Inputs> {
    let cfg = match &c.config {
        Some(p) => load_facility_config(p)?,
        None => FacilityConfig::from_toml_str(DEFAULT_CONFIG_TOML)?,
    };
    let (tables, table_bytes) = match &c.tables {
        Some(dir) => {
            let t = WorkloadTables::load_dir(dir)?;
            let mut bytes = Vec::new();
            for name in [WORKLOAD_RATIOS_FILE, DEFERRAL_DISTRIBUTION_FILE] {
                let p = dir.join(name);
                bytes.push((name.to_owned(), std::fs::read(&p).map_err(|e| Error::io(&p, e))?));
            }
            (t, bytes)
        }
        None => (
            WorkloadTables::bundled(),
            vec![
                (WORKLOAD_RATIOS_FILE.to_owned(), WORKLOAD_RATIOS_CSV.as_bytes().to_vec()),
                (DEFERRAL_DISTRIBUTION_FILE.to_owned(), DEFERRAL_DISTRIBUTION_CSV.as_bytes().to_vec()),
            ],
        ),
    };
    let profile = build_workload_profile(&tables.ratios, &tables.deferral, &cfg.time)?;
    std::fs::create_dir_all(&c.out).map_err(|e| Error::io(&c.out, e))?;
    Ok(Inputs { cfg, profile, table_bytes })
}

fn manifest_for(command: &str, inputs: &Inputs, solver: &str) -> RunManifest {
    let curve = linearize_power_curve(&inputs.cfg.it, inputs.cfg.model.pwl_segments);
    let mut m = RunManifest::new(command, &inputs.cfg, solver, curve.max_abs_error);
    for (name, bytes) in &inputs.table_bytes {
        m.add_table(name, bytes);
    }
    m
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

fn schedule_files(dir: &Path, stem: &str, s: &scenario::ScheduleSolution, title: &str) -> Result<Vec<String>> {
    let csv = dir.join(format!("{stem}.csv"));
    io::write_schedule_csv(&csv, s)?;
    let text = std::fs::read_to_string(&csv).map_err(|e| Error::io(&csv, e))?;
    write_text(&dir.join(format!("{stem}.svg")), &plot::schedule_svg(&text, title)?)?;
    Ok(vec![format!("{stem}.csv"), format!("{stem}.svg")])
}

fn overhead_check(cfg: &FacilityConfig, base: &scenario::ScheduleSolution, manifest: &mut RunManifest) {
    let od = scenario::compute_overhead_power(base);
    manifest.values.insert("overhead_from_base_kw".into(), od);
    if (od - cfg.economic.p_grid_od_kw).abs() > 0.5 {
        let msg = format!(
            "overhead from the base schedule is {od:.3} kW but the config uses {:.3} kW",
            cfg.economic.p_grid_od_kw
        );
        log::warn!("{msg}");
        manifest.anomalies.push(msg);
    }
}

fn cmd_base(c: &Common) -> Result<()> {
    let inputs = load_inputs(c)?;
    let backend = backend_by_name(c.solver.as_deref())?;
    let base = scenario::run_scenario1(&inputs.cfg, &inputs.profile)?;
    let mut manifest = manifest_for("base", &inputs, backend.name());
    overhead_check(&inputs.cfg, &base, &mut manifest);
    manifest.initial_temperatures_c = base.temps.first().copied();
    manifest.add_scenario("base", &base);
    manifest.files = schedule_files(&c.out, "base_schedule", &base, "Base case grid draw")?;
    manifest.write(&c.out)?;
    println!("total_base_cost_gbp {:.2}", base.total_cost_gbp);
    Ok(())
}

fn cmd_optimise(a: &OptimiseArgs) -> Result<()> {
    let c = &a.common;
    let mut inputs = load_inputs(c)?;
    if let Some(n) = a.segments {
        inputs.cfg.model.pwl_segments = n;
    }
    if let Some(t) = a.time_limit {
        inputs.cfg.model.time_limit_s = t;
    }
    inputs.cfg.validate()?;
    let backend = backend_by_name(c.solver.as_deref())?;
    let base = scenario::run_scenario1(&inputs.cfg, &inputs.profile)?;
    let opt = scenario::run_scenario2(&inputs.cfg, &inputs.profile, backend.as_ref())?;
    let cmp = CostComparison::new(&base, &opt);

    let mut manifest = manifest_for("optimise", &inputs, backend.name());
    overhead_check(&inputs.cfg, &base, &mut manifest);
    manifest.initial_temperatures_c = opt.temps.first().copied();
    manifest.add_scenario("base", &base);
    manifest.add_scenario("optimised", &opt);
    let (lin, exact) = opt.it_energy_kwh();
    manifest.values.insert("it_energy_linear_kwh".into(), lin);
    manifest.values.insert("it_energy_exact_kwh".into(), exact);
    manifest.values.insert("saving_pct".into(), cmp.saving_pct);
    manifest.values.insert("replay_max_residual_c".into(), opt.replay_residual_c(&inputs.cfg));

    let mut files = schedule_files(&c.out, "base_schedule", &base, "Base case grid draw")?;
    files.extend(schedule_files(&c.out, "optimised_schedule", &opt, "Optimised grid draw")?);
    io::write_shift_histogram_csv(&c.out.join("shift_histogram.csv"), &opt.it)?;
    let summary = serde_json::to_string_pretty(&cmp)?;
    write_text(&c.out.join("summary.json"), &(summary + "\n"))?;
    write_text(
        &c.out.join("cost_comparison.svg"),
        &plot::cost_svg(cmp.base_cost_gbp, cmp.optimised_main_day_cost_gbp),
    )?;
    io::write_schedule_json(&c.out.join(BASELINE_JSON), &opt)?;
    files.extend(
        ["shift_histogram.csv", "summary.json", "cost_comparison.svg", BASELINE_JSON].map(String::from),
    );
    manifest.files = files;
    manifest.write(&c.out)?;

    println!("status {}", opt.status.label());
    println!("total_base_cost_gbp {:.2}", cmp.base_cost_gbp);
    println!("optimised_cost_gbp {:.2}", cmp.optimised_main_day_cost_gbp);
    println!("optimised_cost_extended_horizon_gbp {:.2}", cmp.optimised_total_cost_gbp);
    println!("saving_pct {:.2}", cmp.saving_pct);
    Ok(())
}

fn cell_stem(cell: &FlexibilityCell) -> String {
    format!("t0_{:03}_dp_{}", cell.t0, cell.delta_p_kw)
}

fn cmd_flex(a: &FlexArgs) -> Result<ExitCode> {
    let c = &a.common;
    let mut inputs = load_inputs(c)?;
    if let Some(t) = a.time_limit {
        inputs.cfg.model.flex_time_limit_s = t;
    }
    inputs.cfg.validate()?;
    let baseline = io::read_schedule_json(&a.baseline.join(BASELINE_JSON))?;
    let backend: Box<dyn SolverBackend> = backend_by_name(c.solver.as_deref())?;
    let t0_grid = grid::parse_t0_grid(&a.t0_grid, inputs.cfg.time.slots_per_hour(), inputs.cfg.time.main_slots)
        .map_err(|e| Error::invalid("--t0-grid", format!("{e:#}")))?;
    let dp_grid = grid::parse_dp_grid(&a.dp_grid).map_err(|e| Error::invalid("--dp-grid", format!("{e:#}")))?;

    let mut manifest = manifest_for("flex", &inputs, backend.name());
    if let Ok(prev) = RunManifest::read(&a.baseline) {
        if prev.config_sha256 != manifest.config_sha256 {
            let msg = "baseline was produced with a different config".to_owned();
            log::warn!("{msg}");
            manifest.anomalies.push(msg);
        }
    }
    let cells = scenario::flex_sweep(
        &baseline,
        &t0_grid,
        &dp_grid,
        &inputs.cfg,
        &inputs.profile,
        backend.as_ref(),
        a.jobs,
        SearchStrategy::Binary,
    )?;
    let failed = cells.iter().filter(|c| c.error.is_some()).count();
    for cell in &cells {
        for an in &cell.anomalies {
            manifest.anomalies.push(format!("t0 {} dp {}: {an}", cell.t0, cell.delta_p_kw));
        }
        if let Some(e) = &cell.error {
            manifest.anomalies.push(format!("t0 {} dp {}: failed: {e}", cell.t0, cell.delta_p_kw));
        }
    }

    let heat = c.out.join("heatmap.csv");
    io::write_heatmap_csv(&heat, &cells)?;
    let text = std::fs::read_to_string(&heat).map_err(|e| Error::io(&heat, e))?;
    write_text(&c.out.join("heatmap.svg"), &plot::heatmap_svg(&text)?)?;
    let mut files = vec!["heatmap.csv".to_owned(), "heatmap.svg".to_owned()];
    let bdir = c.out.join("breakdown");
    std::fs::create_dir_all(&bdir).map_err(|e| Error::io(&bdir, e))?;
    for cell in &cells {
        let Some(b) = &cell.breakdown else { continue };
        let stem = cell_stem(cell);
        let p = bdir.join(format!("{stem}.csv"));
        io::write_breakdown_csv(&p, b)?;
        let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let title = format!(
            "Deviation {} kW from {:02}:{:02} for {:.2} h",
            cell.delta_p_kw,
            cell.t0 / 4,
            (cell.t0 % 4) * 15,
            cell.tau_hours
        );
        write_text(&bdir.join(format!("{stem}.svg")), &plot::breakdown_svg(&text, &title)?)?;
        files.push(format!("breakdown/{stem}.csv"));
        files.push(format!("breakdown/{stem}.svg"));
    }

    let mut mismatches = 0;
    if a.verify_linear_scan {
        let linear = scenario::flex_sweep(
            &baseline,
            &t0_grid,
            &dp_grid,
            &inputs.cfg,
            &inputs.profile,
            backend.as_ref(),
            a.jobs,
            SearchStrategy::Linear,
        )?;
        for (b, l) in cells.iter().zip(&linear) {
            if b.tau_slots != l.tau_slots {
                mismatches += 1;
                manifest.anomalies.push(format!(
                    "t0 {} dp {}: binary search {} slots, linear scan {} slots",
                    b.t0, b.delta_p_kw, b.tau_slots, l.tau_slots
                ));
            }
        }
        manifest.values.insert("linear_scan_mismatches".into(), mismatches as f64);
        println!("linear_scan_agreement {}/{}", cells.len() - mismatches, cells.len());
    }
    manifest.values.insert("cells".into(), cells.len() as f64);
    manifest.values.insert("failed_cells".into(), failed as f64);
    manifest.files = files;
    manifest.write(&c.out)?;

    for cell in &cells {
        println!(
            "t0 {:>3} ({:02}:{:02}) dp {:>7.1} kW tau {:>5.2} h {}",
            cell.t0,
            cell.t0 / 4,
            (cell.t0 % 4) * 15,
            cell.delta_p_kw,
            cell.tau_hours,
            cell.status.label()
        );
    }
    if failed == cells.len() {
        anyhow::bail!("every cell failed");
    }
    Ok(if mismatches > 0 {
        ExitCode::from(EXIT_ORACLE_MISMATCH)
    } else {
        ExitCode::SUCCESS
    })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Io { .. } | Error::Parse(_) | Error::Validation { .. } | Error::Table { .. } | Error::Csv(_)) => {
            EXIT_INPUT
        }
        Some(Error::Solver(_) | Error::Infeasible(_) | Error::Model(_)) => EXIT_SOLVER,
        _ => EXIT_OTHER,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Base(c) => cmd_base(c).map(|_| ExitCode::SUCCESS),
        Command::Optimise(a) => cmd_optimise(a).map(|_| ExitCode::SUCCESS),
        Command::Flex(a) => cmd_flex(a),
    };
    match result.context("dcflex") {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
