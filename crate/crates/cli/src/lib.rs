//! Command-line front end for the maser simulation: runs scenarios and
//! sweeps, writes CSV traces with digest manifests, and analyzes traces.

pub mod analyze;
pub mod config;
pub mod error;
pub mod io;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use maser_bloch_core::dynamics::Simulation;
use maser_bloch_core::ensemble::{ensemble_cooperativity, to_hz};
use maser_bloch_core::protocol::{
    preset, run, set_path, FitSummary, Preset, Scenario, SweepSpec, SweepTable, PRESET_NAMES,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::analyze::{analyze, AnalysisSpec};
use crate::config::{load_scenario, load_sweep, resolve_jobs, Source};
use crate::error::{io_error, CliError, CliResult};
use crate::io::{digest, fmt_f64, write_json, write_sigma_z, write_timeseries, FileEntry};

#[derive(Debug, Parser)]
#[command(
    name = "maser-bloch",
    version,
    about = "Superradiant maser simulations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write its trace.
    Simulate(RunArgs),
    /// Run a parameter sweep, one sub-directory per point.
    Sweep(SweepArgs),
    /// Analyze a timeseries.csv written by `simulate`.
    Analyze(AnalyzeArgs),
    /// List presets, or print one as TOML.
    Presets { name: Option<String> },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario (or sweep) TOML file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
    /// Override a configuration entry, e.g. `--set initial.p0=0.25`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory; defaults to `runs/<scenario name>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Worker threads; falls back to MASER_BLOCH_JOBS, then all cores.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub timeseries: PathBuf,
    /// Analysis spec TOML; without one only metadata is reported.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Inversion snapshots; defaults to sigma_z.csv next to the trace.
    #[arg(long)]
    pub sigma_z: Option<PathBuf>,
    /// Output JSON file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Sweep(args) => sweep(args),
        Command::Analyze(args) => analyze_cmd(args),
        Command::Presets { name } => presets(name.as_deref()),
    }
}

fn source(args: &RunArgs) -> Source {
    Source {
        config: args.config.clone(),
        preset: args.preset.clone(),
        overrides: args.overrides.clone(),
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| io_error("cannot create", dir, e))
}

#[derive(Debug, Serialize)]
struct RunManifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_paths: Vec<PathBuf>,
    preset: Option<String>,
    overrides: Vec<String>,
    /// Fully resolved scenario; reproduces the run on its own.
    scenario: Scenario,
    params_rad_s: Value,
    derived: Value,
    tolerances: Value,
    noise_seed: Option<u64>,
    integration: Value,
    wall_time_s: f64,
    files: Vec<FileEntry>,
}

/// Writes the trace files of one run into `dir` and returns their digests.
fn write_run(dir: &Path, sim: &Simulation) -> CliResult<Vec<FileEntry>> {
    create_dir(dir)?;
    write_timeseries(&dir.join("timeseries.csv"), &sim.series)?;
    let mut files = vec![digest(dir, "timeseries.csv")?];
    if let Some(snaps) = &sim.series.sigma_z {
        write_sigma_z(&dir.join("sigma_z.csv"), snaps)?;
        files.push(digest(dir, "sigma_z.csv")?);
    }
    Ok(files)
}

fn manifest(
    src: &Source,
    command: &'static str,
    scenario: &Scenario,
    sim: &Simulation,
    wall_time_s: f64,
    files: Vec<FileEntry>,
) -> CliResult<RunManifest> {
    let (params, grid) = scenario
        .params
        .build()
        .map_err(|e| CliError::config(e.to_string()))?;
    let coop = ensemble_cooperativity(&grid, &params);
    Ok(RunManifest {
        tool: "maser-bloch",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config_paths: src.config.iter().cloned().collect(),
        preset: src.preset.clone(),
        overrides: src.overrides.clone(),
        scenario: scenario.clone(),
        params_rad_s: json!(params),
        derived: json!({
            "cooperativity": coop.c,
            "gamma_rad_s": coop.gamma,
            "gamma_hz": to_hz(coop.gamma),
            "packets": grid.len(),
        }),
        tolerances: json!(scenario.solver),
        noise_seed: scenario.noise.as_ref().map(|n| n.seed),
        integration: json!(sim.stats),
        wall_time_s,
        files,
    })
}

fn simulate(args: &RunArgs) -> CliResult<()> {
    let src = source(args);
    let scenario = load_scenario(&src)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| Path::new("runs").join(&scenario.name));
    create_dir(&out)?;
    let started = Instant::now();
    let sim = match run(&scenario) {
        Ok(sim) => sim,
        Err(e) => {
            let err = CliError::from_run(e.clone());
            write_json(
                &out.join("error.json"),
                &json!({
                    "error": e.to_string(),
                    "numerical": e.is_numerical(),
                    "scenario": scenario,
                }),
            )?;
            return Err(err);
        }
    };
    let wall = started.elapsed().as_secs_f64();
    let files = write_run(&out, &sim)?;
    let m = manifest(&src, "simulate", &scenario, &sim, wall, files)?;
    write_json(&out.join("manifest.json"), &m)?;
    eprintln!(
        "wrote {} samples to {} ({wall:.2} s)",
        sim.series.len(),
        out.display()
    );
    Ok(())
}

fn point_dir(out: &Path, index: usize) -> PathBuf {
    out.join(format!("point_{index:04}"))
}

fn write_summary(path: &Path, spec: &SweepSpec, table: &SweepTable) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| io_error("cannot write", path, e))?;
    let fail = |e: csv::Error| io_error("cannot write", path, e);
    let mut header = vec!["index".to_string()];
    header.extend(spec.axes.iter().map(|a| a.path.clone()));
    header.extend([
        table.metric.name().to_string(),
        "status".into(),
        "error".into(),
    ]);
    w.write_record(&header).map_err(fail)?;
    for row in &table.rows {
        let mut rec = vec![row.index.to_string()];
        rec.extend(
            row.values
                .iter()
                .zip(&spec.axes)
                .map(|(v, a)| fmt_f64(v + a.offset)),
        );
        rec.push(row.metric.map(fmt_f64).unwrap_or_default());
        rec.push(
            match (row.failed(), row.numerical_failure) {
                (false, _) => "ok",
                (true, true) => "numerical_failure",
                (true, false) => "analysis_failure",
            }
            .into(),
        );
        rec.push(row.error.clone().unwrap_or_default());
        w.write_record(&rec).map_err(fail)?;
    }
    // Trailing `fit` rows: name, value.
    let fit_rows: Vec<(&str, f64)> = match &table.fit {
        Some(FitSummary::Linear(f)) => vec![
            ("slope", f.slope),
            ("intercept", f.intercept),
            ("r_squared", f.r_squared),
        ],
        Some(FitSummary::Rise(f)) => vec![
            ("T", f.t_rise),
            ("A_inf", f.a_inf),
            ("residual_norm", f.residual_norm),
        ],
        None => Vec::new(),
    };
    for (name, value) in fit_rows {
        w.write_record(["fit", name, &fmt_f64(value)])
            .map_err(fail)?;
    }
    if let Some(e) = &table.fit_error {
        w.write_record(["fit", "error", e]).map_err(fail)?;
    }
    w.flush().map_err(|e| io_error("cannot write", path, e))
}

fn sweep(args: &SweepArgs) -> CliResult<()> {
    let src = source(&args.run);
    let spec = load_sweep(&src)?;
    let jobs = resolve_jobs(args.jobs)?;
    let out = args
        .run
        .out
        .clone()
        .unwrap_or_else(|| Path::new("runs").join(&spec.base.name));
    create_dir(&out)?;
    let points = spec.points().map_err(|e| CliError::config(e.to_string()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::config(format!("cannot start worker pool: {e}")))?;
    let started = Instant::now();
    let rows = pool.install(|| {
        points
            .par_iter()
            .map(|point| {
                let t0 = Instant::now();
                let (row, sim) = spec.evaluate_point(point);
                let dir = point_dir(&out, point.index);
                match &sim {
                    Some(sim) => {
                        let files = write_run(&dir, sim)?;
                        let wall = t0.elapsed().as_secs_f64();
                        let m = manifest(&src, "sweep", &point.scenario, sim, wall, files)?;
                        write_json(&dir.join("manifest.json"), &m)?;
                    }
                    None => {
                        create_dir(&dir)?;
                        write_json(
                            &dir.join("error.json"),
                            &json!({"error": row.error, "scenario": point.scenario}),
                        )?;
                    }
                }
                Ok(row)
            })
            .collect::<CliResult<Vec<_>>>()
    })?;
    let table = spec.summarize(rows);
    write_summary(&out.join("summary.csv"), &spec, &table)?;
    write_json(&out.join("summary.json"), &table)?;
    let files = vec![digest(&out, "summary.csv")?, digest(&out, "summary.json")?];
    write_json(
        &out.join("manifest.json"),
        &json!({
            "tool": "maser-bloch",
            "version": env!("CARGO_PKG_VERSION"),
            "command": "sweep",
            "config_paths": src.config,
            "preset": src.preset,
            "overrides": src.overrides,
            "sweep": spec,
            "jobs": jobs,
            "wall_time_s": started.elapsed().as_secs_f64(),
            "files": files,
        }),
    )?;

    let failed: Vec<_> = table.rows.iter().filter(|r| r.failed()).collect();
    eprintln!(
        "{} points, {} failed, summary in {}",
        table.rows.len(),
        failed.len(),
        out.join("summary.csv").display()
    );
    if failed.iter().any(|r| r.numerical_failure) {
        return Err(CliError::numerical(format!(
            "{} sweep point(s) failed to integrate",
            failed.iter().filter(|r| r.numerical_failure).count()
        )));
    }
    if !failed.is_empty() {
        return Err(CliError::analysis(format!(
            "metric failed on {} sweep point(s)",
            failed.len()
        )));
    }
    if let Some(e) = &table.fit_error {
        return Err(CliError::analysis(format!("sweep fit failed: {e}")));
    }
    Ok(())
}

fn load_analysis_spec(args: &AnalyzeArgs) -> CliResult<AnalysisSpec> {
    let mut doc = match &args.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| io_error("cannot read config", path, e))?;
            toml::from_str::<toml::Value>(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        }
        None => toml::Value::Table(Default::default()),
    };
    for raw in &args.overrides {
        let (key, value) = raw
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("override '{raw}' is not key=value")))?;
        set_path(
            &mut doc,
            key.trim(),
            maser_bloch_core::protocol::parse_override_value(value),
        )
        .map_err(|e| CliError::config(format!("--set {raw}: {e}")))?;
    }
    doc.try_into()
        .map_err(|e: toml::de::Error| CliError::config(format!("analysis spec: {e}")))
}

fn analyze_cmd(args: &AnalyzeArgs) -> CliResult<()> {
    let spec = load_analysis_spec(args)?;
    let series = io::read_timeseries(&args.timeseries)?;
    let sibling = args
        .timeseries
        .parent()
        .map(|d| d.join("sigma_z.csv"))
        .filter(|p| p.exists());
    let snaps = match args.sigma_z.clone().or(sibling) {
        Some(p) => Some(io::read_sigma_z(&p)?),
        None => None,
    };
    let report = analyze(&series, snaps.as_ref(), &spec);
    match &args.out {
        Some(path) => write_json(path, &report.value)?,
        None => println!(
            "{}",
            serde_json::to_string_pretty(&report.value).expect("JSON value")
        ),
    }
    if report.errors.is_empty() {
        Ok(())
    } else {
        Err(CliError::analysis(format!(
            "analysis failed: {}",
            report
                .errors
                .iter()
                .map(|(k, e)| format!("{k}: {e}"))
                .collect::<Vec<_>>()
                .join("; ")
        )))
    }
}

fn presets(name: Option<&str>) -> CliResult<()> {
    match name {
        None => {
            for n in PRESET_NAMES {
                let kind = match preset(n).map_err(|e| CliError::config(e.to_string()))? {
                    Preset::Scenario(_) => "scenario",
                    Preset::Sweep(_) => "sweep",
                };
                println!("{n}\t{kind}");
            }
        }
        Some(n) => {
            let text = match preset(n).map_err(|e| CliError::config(e.to_string()))? {
                Preset::Scenario(s) => s.to_toml(),
                Preset::Sweep(s) => s.to_toml(),
            }
            .map_err(|e| CliError::config(e.to_string()))?;
            print!("{text}");
        }
    }
    Ok(())
}
