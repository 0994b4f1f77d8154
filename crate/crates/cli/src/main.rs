//! `xlmimo`: run scenarios, sweeps, MUSIC scans and the invariant suite.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use xlmimo_isac::harness::scenario::run_scenario;
use xlmimo_isac::harness::sweep::{self, SweepRow, WORKERS_ENV};
use xlmimo_isac::harness::{validate, Algorithm, ExperimentSpec, RunOptions, ValidateOptions};
use xlmimo_isac::music::{self, Grid, MusicConfig};
use xlmimo_isac::ScenarioConfig;

#[derive(Debug, Parser)]
#[command(
    name = "xlmimo",
    version,
    about = "Hybrid beamforming for modular XL-MIMO ISAC"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario with one optimizer and write a single-row CSV.
    RunScenario {
        #[arg(long)]
        config: PathBuf,
        /// rm-jgd, sdr-rrs or fdb.
        #[arg(long, value_parser = parse_algo)]
        algo: Algorithm,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a parameter sweep described by a TOML spec.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides `output_path` from the spec.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; 0 means one per core.
        #[arg(long, env = WORKERS_ENV, default_value_t = 0)]
        workers: usize,
    },
    /// MUSIC scan of a Cartesian grid around the array.
    Music {
        #[arg(long)]
        config: PathBuf,
        /// `x0:dx:x1,y0:dy:y1` in meters.
        #[arg(long, value_parser = parse_grid)]
        grid: Grid,
        /// Snapshots per block; defaults to the config value.
        #[arg(long)]
        snapshots: Option<usize>,
        /// Signal-subspace dimension; defaults to the object count.
        #[arg(long)]
        sources: Option<usize>,
        /// CSV of `x, y, value`; a `.bin` grid dump is written next to it.
        #[arg(long, default_value = "music.csv")]
        out: PathBuf,
    },
    /// Run the invariant suite; exits non-zero if any check fails.
    Validate {
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value = "validate_report.csv")]
        report: PathBuf,
    },
}

fn parse_algo(s: &str) -> Result<Algorithm, String> {
    Algorithm::parse(s).map_err(|e| e.to_string())
}

fn parse_grid(s: &str) -> Result<Grid, String> {
    Grid::parse(s).map_err(|e| e.to_string())
}

fn load_config(path: &Path) -> Result<ScenarioConfig> {
    ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn run_one(config: &Path, algo: Algorithm, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut config = load_config(config)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let row = run_scenario(&config, algo);
    println!(
        "{} seed {}: {}, SE {:.4} bits/s/Hz, SCNR {:.2} dB, power {:.4} (proxy {:.4}), {} iterations",
        algo.name(),
        row.seed,
        row.status,
        row.se_bits,
        row.scnr_db,
        row.power_exact,
        row.power_proxy,
        row.iterations
    );
    let row = SweepRow {
        value: "-".into(),
        repetition: 0,
        row,
    };
    sweep::write_rows(out, "none", &[row])?;
    Ok(())
}

fn run_sweep(spec: &Path, out: Option<PathBuf>, workers: usize) -> Result<()> {
    let mut spec =
        ExperimentSpec::load(spec).with_context(|| format!("loading {}", spec.display()))?;
    if let Some(out) = out {
        spec.output_path = out;
    }
    let workers = (workers > 0).then_some(workers);
    let outcome = sweep::sweep_with(&spec, &RunOptions::default(), workers)?;
    for c in &outcome.summary {
        println!(
            "{}={:<10} {:<8} {}/{} converged, SE {:.4} ± {:.4}",
            spec.sweep_axis.name(),
            c.value,
            c.algorithm.name(),
            c.converged,
            c.runs,
            c.se_mean,
            c.se_std
        );
    }
    println!(
        "{} rows -> {} (summary {})",
        outcome.rows.len(),
        outcome.output_path.display(),
        outcome.summary_path.display()
    );
    Ok(())
}

fn run_music(
    config: &Path,
    grid: Grid,
    snapshots: Option<usize>,
    sources: Option<usize>,
    out: &Path,
) -> Result<()> {
    let config = load_config(config)?;
    let music_config = MusicConfig {
        grid,
        snapshots: snapshots.unwrap_or(config.snapshots),
        assumed_sources: sources,
    };
    let (result, block) = music::run_music(&config, &music_config)?;
    music::write_csv(&result, BufWriter::new(File::create(out)?))?;
    let bin = out.with_extension("bin");
    music::write_binary(&result, BufWriter::new(File::create(&bin)?))?;
    println!(
        "peak at ({:.3}, {:.3}) m, range width {:.3} m, target SNR {:.1} dB, {} flagged cells",
        result.peak.x,
        result.peak.y,
        result.mainlobe_width,
        block.target_snr_db,
        result.flagged.len()
    );
    println!("{} and {}", out.display(), bin.display());
    Ok(())
}

fn run_validate(quick: bool, report_path: &Path) -> Result<bool> {
    let report = validate(&ValidateOptions { quick, fault: None });
    println!("{report}");
    report.write_csv(BufWriter::new(File::create(report_path)?))?;
    println!("report -> {}", report_path.display());
    Ok(report.all_passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::RunScenario {
            config,
            algo,
            seed,
            out,
        } => run_one(&config, algo, seed, &out).map(|_| true),
        Command::Sweep { spec, out, workers } => run_sweep(&spec, out, workers).map(|_| true),
        Command::Music {
            config,
            grid,
            snapshots,
            sources,
            out,
        } => run_music(&config, grid, snapshots, sources, &out).map(|_| true),
        Command::Validate { quick, report } => run_validate(quick, &report),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
