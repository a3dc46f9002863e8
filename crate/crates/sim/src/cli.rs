//! Command-line driver.
//!
//! Exit codes: 0 success, 1 configuration or file error, 2 mission failed
//! (for `suite`: a check against the reference outcomes failed).

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use admittance_core::harness::{self, Experiment, SuiteRow};
use admittance_core::mission;
use admittance_core::TraceRecord;
use anyhow::Context;
use clap::{Parser, Subcommand};

use crate::{output, plot, scenario_file};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_MISSION_FAILED: u8 = 2;

/// Default output directory when `--out` is not given.
pub const OUT_DIR_ENV: &str = "ADMITTANCE_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "admittance-sim",
    version,
    about = "Mass-adaptive admittance control simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write trace.csv and report.csv.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, env = OUT_DIR_ENV)]
        out: PathBuf,
        /// Replace the noise seed from the scenario file.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write z_trajectory.svg and mass_estimate.svg.
        #[arg(long)]
        plot: bool,
    },
    /// Run the four canonical experiments and write suite_report.csv.
    Suite {
        #[arg(long, env = OUT_DIR_ENV)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        plot: bool,
        /// Per-experiment overrides merged onto the canonical presets.
        #[arg(long, hide = true)]
        presets: Option<PathBuf>,
    },
    /// Sweep the closed-loop characteristic polynomial and write stability_map.csv.
    Stability {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, env = OUT_DIR_ENV)]
        out: PathBuf,
    },
    /// Print the canonical six-waypoint path as JSON.
    WaypointsDump,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            plot,
        } => cmd_run(&scenario, &out, seed, plot, stdout, stderr),
        Command::Suite {
            out,
            seed,
            plot,
            presets,
        } => cmd_suite(&out, seed, plot, presets.as_deref(), stdout, stderr),
        Command::Stability { scenario, out } => cmd_stability(&scenario, &out, stdout),
        Command::WaypointsDump => cmd_waypoints_dump(stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            EXIT_CONFIG
        }
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn out_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn plots(dir: &Path, prefix: &str, trace: &[TraceRecord], stderr: &mut dyn Write) {
    if let Err(e) = plot::write_plots(dir, prefix, trace) {
        let _ = writeln!(stderr, "warning: plotting failed: {e}");
    }
}

pub fn cmd_run(
    scenario: &Path,
    out: &Path,
    seed: Option<u64>,
    plot: bool,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> anyhow::Result<u8> {
    let mut s = scenario_file::load_scenario(scenario)?;
    if let Some(seed) = seed {
        s.noise.seed = seed;
    }
    let (trace, report) = harness::run_scenario(&s)?;
    out_dir(out)?;
    output::write_trace(create(&out.join("trace.csv"))?, &trace)?;
    output::write_report(create(&out.join("report.csv"))?, &report, s.dt)?;
    if plot {
        plots(out, "", &trace, stderr);
    }
    write!(stdout, "{}", output::report_table(&report))?;
    Ok(if report.completed { EXIT_OK } else { EXIT_MISSION_FAILED })
}

/// Runs the entries concurrently, one thread each; results keep the input order.
pub fn run_suite(entries: &[(Experiment, harness::Scenario)]) -> Vec<(SuiteRow, Vec<TraceRecord>)> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = entries
            .iter()
            .map(|(e, s)| scope.spawn(move || harness::suite_row_traced(*e, s)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("suite worker panicked"))
            .collect()
    })
}

pub fn cmd_suite(
    out: &Path,
    seed: Option<u64>,
    plot: bool,
    presets: Option<&Path>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> anyhow::Result<u8> {
    let mut entries = match presets {
        Some(p) => scenario_file::load_preset_overrides(p)?,
        None => Experiment::ALL.iter().map(|&e| (e, e.scenario())).collect(),
    };
    if let Some(seed) = seed {
        for (_, s) in &mut entries {
            s.noise.seed = seed;
        }
    }
    let results = run_suite(&entries);
    let rows: Vec<SuiteRow> = results.iter().map(|(r, _)| r.clone()).collect();
    out_dir(out)?;
    output::write_suite(create(&out.join("suite_report.csv"))?, &rows)?;
    if plot {
        for (row, trace) in &results {
            if !trace.is_empty() {
                plots(out, &format!("exp{}_", row.exp_id), trace, stderr);
            }
        }
    }
    write!(stdout, "{}", output::suite_table(&rows))?;
    let checks = harness::suite_checks(&rows);
    for (name, ok) in &checks {
        writeln!(stdout, "[{}] {name}", if *ok { "PASS" } else { "FAIL" })?;
    }
    let config_error = rows.iter().any(|r| r.report.is_none());
    Ok(if config_error {
        EXIT_CONFIG
    } else if checks.iter().all(|(_, ok)| *ok) {
        EXIT_OK
    } else {
        EXIT_MISSION_FAILED
    })
}

pub fn cmd_stability(scenario: &Path, out: &Path, stdout: &mut dyn Write) -> anyhow::Result<u8> {
    let grid = scenario_file::load_sweep(scenario)?;
    let rows = grid.run()?;
    out_dir(out)?;
    output::write_stability(create(&out.join("stability_map.csv"))?, &rows)?;
    let stable = rows.iter().filter(|r| r.stable).count();
    let degenerate = rows.iter().filter(|r| r.degenerate).count();
    let disagree = rows.iter().filter(|r| !r.degenerate && !r.method_agreement).count();
    writeln!(
        stdout,
        "{} grid points: {stable} stable, {degenerate} degenerate, {disagree} method disagreements",
        rows.len()
    )?;
    Ok(EXIT_OK)
}

pub fn cmd_waypoints_dump(stdout: &mut dyn Write) -> anyhow::Result<u8> {
    serde_json::to_writer_pretty(&mut *stdout, &mission::default_waypoints())?;
    writeln!(stdout)?;
    Ok(EXIT_OK)
}
