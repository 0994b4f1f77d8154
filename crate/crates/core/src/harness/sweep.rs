//! Parameter sweeps over one scenario knob.
//!
//! Every repetition `r` gets the seed `mix_seed(master, r)`, shared by all
//! sweep values and algorithms, so comparisons across a row of the sweep
//! are paired. Jobs run on a dedicated rayon pool; rows reach the CSV in
//! job order no matter which worker finishes first.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;

use super::scenario::{evaluate, status_of, Algorithm, Prepared, ResultRow, RunOptions};
use crate::config::{db_to_linear, Layout, ScenarioConfig};
use crate::error::{Error, Result};

/// Worker count for sweeps; unset or `0` means one per core.
pub const WORKERS_ENV: &str = "XLMIMO_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// dB offset applied by scaling the communication noise power down.
    Snr,
    /// Sensing threshold Γ_s in dB.
    ScnrThreshold,
    /// RF chains per subarray, `Q + analog paths`.
    RfChains,
    /// Antennas per subarray at fixed total antenna count and aperture.
    SubarrayScale,
    /// User range in meters.
    UserDistance,
    SubarrayCount,
    Layout,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(
            match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
                "snr" => SweepAxis::Snr,
                "scnr_threshold" => SweepAxis::ScnrThreshold,
                "rf_chains" => SweepAxis::RfChains,
                "subarray_scale" => SweepAxis::SubarrayScale,
                "user_distance" => SweepAxis::UserDistance,
                "subarray_count" => SweepAxis::SubarrayCount,
                "layout" => SweepAxis::Layout,
                other => {
                    return Err(Error::config(
                        "sweep_axis",
                        format!("unknown axis `{other}`"),
                    ))
                }
            },
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Snr => "snr",
            SweepAxis::ScnrThreshold => "scnr_threshold",
            SweepAxis::RfChains => "rf_chains",
            SweepAxis::SubarrayScale => "subarray_scale",
            SweepAxis::UserDistance => "user_distance",
            SweepAxis::SubarrayCount => "subarray_count",
            SweepAxis::Layout => "layout",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepValue {
    Number(f64),
    Layout(Layout),
}

impl SweepValue {
    pub fn label(&self) -> String {
        match self {
            SweepValue::Number(v) => format!("{v}"),
            SweepValue::Layout(l) => l.name().to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub base: ScenarioConfig,
    pub sweep_axis: SweepAxis,
    pub values: Vec<SweepValue>,
    pub algorithms: Vec<Algorithm>,
    pub repetitions: usize,
    /// Master seed; per-repetition seeds are derived from it.
    pub seed: u64,
    pub output_path: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    sweep_axis: String,
    values: Vec<toml::Value>,
    algorithms: Option<Vec<String>>,
    repetitions: usize,
    seed: Option<u64>,
    output_path: String,
    base: Option<toml::Table>,
}

impl ExperimentSpec {
    /// Parses a spec; `[base]` takes the same keys as a scenario file.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawSpec = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let base_text = toml::to_string(&raw.base.unwrap_or_default())
            .map_err(|e| Error::Parse(e.to_string()))?;
        let base = ScenarioConfig::from_toml_str(&base_text)?;
        let sweep_axis = SweepAxis::parse(&raw.sweep_axis)?;
        let values = raw
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| parse_value(sweep_axis, i, v))
            .collect::<Result<Vec<_>>>()?;
        let algorithms = match raw.algorithms {
            Some(names) => names
                .iter()
                .map(|n| Algorithm::parse(n))
                .collect::<Result<_>>()?,
            None => Algorithm::ALL.to_vec(),
        };
        let spec = ExperimentSpec {
            seed: raw.seed.unwrap_or(base.seed),
            base,
            sweep_axis,
            values,
            algorithms,
            repetitions: raw.repetitions,
            output_path: PathBuf::from(raw.output_path),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::config("values", "must not be empty"));
        }
        if self.repetitions == 0 {
            return Err(Error::config("repetitions", "must be at least 1"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::config("algorithms", "must not be empty"));
        }
        self.base.validate()
    }

    /// Scenario for one sweep value and repetition.
    pub fn cell_config(&self, value: &SweepValue, repetition: usize) -> Result<ScenarioConfig> {
        let mut c = apply_axis(&self.base, self.sweep_axis, value)?;
        c.seed = mix_seed(self.seed, repetition as u64);
        c.validate()?;
        Ok(c)
    }

    pub fn expected_rows(&self) -> usize {
        self.values.len() * self.algorithms.len() * self.repetitions
    }
}

fn parse_value(axis: SweepAxis, index: usize, v: &toml::Value) -> Result<SweepValue> {
    let field = format!("values[{index}]");
    if axis == SweepAxis::Layout {
        let s = v
            .as_str()
            .ok_or_else(|| Error::config(&field, "layout values are strings"))?;
        return Ok(SweepValue::Layout(Layout::parse(s)?));
    }
    let x = match v {
        toml::Value::Integer(i) => *i as f64,
        toml::Value::Float(f) => *f,
        _ => return Err(Error::config(&field, "expected a number")),
    };
    if !x.is_finite() {
        return Err(Error::config(&field, "must be finite"));
    }
    let integral = matches!(
        axis,
        SweepAxis::RfChains | SweepAxis::SubarrayScale | SweepAxis::SubarrayCount
    );
    if integral && (x.fract() != 0.0 || x < 1.0) {
        return Err(Error::config(&field, "must be a positive integer"));
    }
    Ok(SweepValue::Number(x))
}

/// SplitMix64 finalizer over the master seed and the repetition index.
pub fn mix_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Applies one sweep value to a copy of `base`.
pub fn apply_axis(
    base: &ScenarioConfig,
    axis: SweepAxis,
    value: &SweepValue,
) -> Result<ScenarioConfig> {
    let mut c = base.clone();
    let x = match value {
        SweepValue::Number(x) => *x,
        SweepValue::Layout(l) => {
            if axis != SweepAxis::Layout {
                return Err(Error::config("values", "layout value on a numeric axis"));
            }
            c.layout = *l;
            return Ok(c);
        }
    };
    match axis {
        SweepAxis::Snr => c.sigma_c_sq = base.sigma_c_sq / db_to_linear(x),
        SweepAxis::ScnrThreshold => c.scnr_threshold = db_to_linear(x),
        SweepAxis::RfChains => {
            let q = base.object_count();
            let chains = x as usize;
            if chains <= q || chains - q > base.paths {
                return Err(Error::config(
                    "values",
                    format!(
                        "{chains} RF chains per subarray needs {} < M_RF <= {}",
                        q,
                        q + base.paths
                    ),
                ));
            }
            c.analog_paths = Some(chains - q);
        }
        SweepAxis::SubarrayScale => {
            let m = x as usize;
            let total = base.total_antennas();
            if !total.is_multiple_of(m) {
                return Err(Error::config(
                    "values",
                    format!("M = {m} does not divide the {total} antennas"),
                ));
            }
            // Aperture in units of d: (K−1)Γ + (M−1), held fixed.
            let aperture = (base.subarrays as f64 - 1.0) * base.spacing_factor
                + (base.antennas_per_subarray as f64 - 1.0);
            let k = total / m;
            c.subarrays = k;
            c.antennas_per_subarray = m;
            c.spacing_factor = if k > 1 {
                (aperture - (m as f64 - 1.0)) / (k as f64 - 1.0)
            } else {
                m as f64
            };
        }
        SweepAxis::UserDistance => c.user.r = x,
        SweepAxis::SubarrayCount => c.subarrays = x as usize,
        SweepAxis::Layout => return Err(Error::config("values", "layout axis needs strings")),
    }
    Ok(c)
}

/// A row plus where it sits in the sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: String,
    pub repetition: usize,
    pub row: ResultRow,
}

/// Runs every algorithm on one cell. The shared preprocessing time is
/// charged to each row.
pub fn run_cell(
    spec: &ExperimentSpec,
    value: &SweepValue,
    repetition: usize,
    options: &RunOptions,
) -> Vec<SweepRow> {
    let start = Instant::now();
    let config = spec.cell_config(value, repetition);
    let prep = match &config {
        Ok(c) => Prepared::new(c).map_err(|e| status_of(&e)),
        Err(e) => Err(status_of(e)),
    };
    let prep_ms = start.elapsed().as_secs_f64() * 1e3;
    let fallback = config.as_ref().cloned().unwrap_or_else(|_| {
        let mut c = spec.base.clone();
        c.seed = mix_seed(spec.seed, repetition as u64);
        c
    });
    spec.algorithms
        .iter()
        .map(|&algo| {
            let t = Instant::now();
            let mut row = match &prep {
                Ok(p) => evaluate(p, algo, options),
                Err(status) => ResultRow::empty(&fallback, algo, status.clone()),
            };
            row.wall_time_ms = prep_ms + t.elapsed().as_secs_f64() * 1e3;
            if let SweepValue::Number(x) = value {
                if spec.sweep_axis == SweepAxis::Snr {
                    row.snr_offset_db = *x;
                }
            }
            SweepRow {
                value: value.label(),
                repetition,
                row,
            }
        })
        .collect()
}

/// Column names of the main CSV. Wall time lives in the timing sidecar so
/// that identical seeds give identical files.
pub const ROW_HEADER: [&str; 24] = [
    "axis",
    "value",
    "repetition",
    "algorithm",
    "seed",
    "subarrays",
    "antennas_per_subarray",
    "spacing_factor",
    "layout",
    "user_antennas",
    "paths",
    "objects",
    "n_rf",
    "streams",
    "user_range_m",
    "snr_offset_db",
    "scnr_threshold_db",
    "se_bits",
    "scnr_db",
    "scnr_fixed_db",
    "power_exact",
    "power_proxy",
    "iterations",
    "status",
];

pub fn row_record(axis: &str, r: &SweepRow) -> Vec<String> {
    let x = &r.row;
    vec![
        axis.to_string(),
        r.value.clone(),
        r.repetition.to_string(),
        x.algorithm.name().to_string(),
        x.seed.to_string(),
        x.subarrays.to_string(),
        x.antennas_per_subarray.to_string(),
        x.spacing_factor.to_string(),
        x.layout.to_string(),
        x.user_antennas.to_string(),
        x.paths.to_string(),
        x.objects.to_string(),
        x.n_rf.to_string(),
        x.streams.to_string(),
        x.user_range_m.to_string(),
        x.snr_offset_db.to_string(),
        x.scnr_threshold_db.to_string(),
        x.se_bits.to_string(),
        x.scnr_db.to_string(),
        x.scnr_fixed_db.to_string(),
        x.power_exact.to_string(),
        x.power_proxy.to_string(),
        x.iterations.to_string(),
        x.status.clone(),
    ]
}

/// `out.csv` → `out.<suffix>.csv`.
pub fn sidecar_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

/// Writes rows plus the timing sidecar. Used for single runs too.
pub fn write_rows(path: &Path, axis: &str, rows: &[SweepRow]) -> Result<()> {
    let mut out = RowSink::create(path)?;
    for r in rows {
        out.push(axis, r)?;
    }
    out.finish()
}

struct RowSink {
    main: csv::Writer<BufWriter<File>>,
    timing: csv::Writer<BufWriter<File>>,
    index: usize,
}

impl RowSink {
    fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut main = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        main.write_record(ROW_HEADER)?;
        let timing_file = File::create(sidecar_path(path, "timing"))?;
        let mut timing = csv::Writer::from_writer(BufWriter::new(timing_file));
        timing.write_record(["row", "algorithm", "seed", "wall_time_ms"])?;
        main.flush()?;
        timing.flush()?;
        Ok(RowSink {
            main,
            timing,
            index: 0,
        })
    }

    fn push(&mut self, axis: &str, r: &SweepRow) -> Result<()> {
        self.main.write_record(row_record(axis, r))?;
        self.timing.write_record([
            self.index.to_string(),
            r.row.algorithm.name().to_string(),
            r.row.seed.to_string(),
            format!("{:.3}", r.row.wall_time_ms),
        ])?;
        self.index += 1;
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        self.main.flush()?;
        self.timing.flush()?;
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.flush()
    }
}

/// Mean and sample standard deviation over the rows of one
/// (value, algorithm) cell that produced a beamformer. Rows stopped at the
/// iteration cap are included; `converged` counts the `ok` ones.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub value: String,
    pub algorithm: Algorithm,
    pub runs: usize,
    pub finite: usize,
    pub converged: usize,
    pub se_mean: f64,
    pub se_std: f64,
    pub scnr_mean: f64,
    pub scnr_std: f64,
    pub power_mean: f64,
    pub iterations_mean: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

pub fn summarize(spec: &ExperimentSpec, rows: &[SweepRow]) -> Vec<CellSummary> {
    let mut out = Vec::new();
    for value in &spec.values {
        let label = value.label();
        for &algo in &spec.algorithms {
            let cell: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.value == label && r.row.algorithm == algo)
                .map(|r| &r.row)
                .collect();
            let ok: Vec<&ResultRow> = cell
                .iter()
                .copied()
                .filter(|r| r.se_bits.is_finite())
                .collect();
            let pick = |f: fn(&ResultRow) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<_>>();
            let (se_mean, se_std) = mean_std(&pick(|r| r.se_bits));
            let (scnr_mean, scnr_std) = mean_std(&pick(|r| r.scnr_db));
            let (power_mean, _) = mean_std(&pick(|r| r.power_exact));
            let (iterations_mean, _) = mean_std(&pick(|r| r.iterations as f64));
            out.push(CellSummary {
                value: label.clone(),
                algorithm: algo,
                runs: cell.len(),
                finite: ok.len(),
                converged: cell.iter().filter(|r| r.is_ok()).count(),
                se_mean,
                se_std,
                scnr_mean,
                scnr_std,
                power_mean,
                iterations_mean,
            });
        }
    }
    out
}

fn write_summary(path: &Path, axis: &str, cells: &[CellSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "axis",
        "value",
        "algorithm",
        "runs",
        "finite",
        "converged",
        "se_mean",
        "se_std",
        "scnr_mean_db",
        "scnr_std_db",
        "power_exact_mean",
        "iterations_mean",
    ])?;
    for c in cells {
        w.write_record([
            axis.to_string(),
            c.value.clone(),
            c.algorithm.name().to_string(),
            c.runs.to_string(),
            c.finite.to_string(),
            c.converged.to_string(),
            c.se_mean.to_string(),
            c.se_std.to_string(),
            c.scnr_mean.to_string(),
            c.scnr_std.to_string(),
            c.power_mean.to_string(),
            c.iterations_mean.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Worker count from [`WORKERS_ENV`].
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(n) => Ok(Some(n)),
            Err(_) => Err(Error::config(WORKERS_ENV, format!("`{s}` is not a count"))),
        },
        Err(_) => Ok(None),
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<CellSummary>,
    pub output_path: PathBuf,
    pub summary_path: PathBuf,
}

/// Runs the sweep with default optimizer settings and the worker count
/// from the environment.
pub fn sweep(spec: &ExperimentSpec) -> Result<SweepOutcome> {
    sweep_with(spec, &RunOptions::default(), workers_from_env()?)
}

/// Writes `output_path`, `<stem>.timing.csv` and `<stem>.summary.csv`.
/// The main file is flushed after every completed cell.
pub fn sweep_with(
    spec: &ExperimentSpec,
    options: &RunOptions,
    workers: Option<usize>,
) -> Result<SweepOutcome> {
    spec.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::config(WORKERS_ENV, e.to_string()))?;
    let jobs: Vec<(usize, &SweepValue, usize)> = spec
        .values
        .iter()
        .flat_map(|v| (0..spec.repetitions).map(move |r| (v, r)))
        .enumerate()
        .map(|(i, (v, r))| (i, v, r))
        .collect();

    let mut sink = RowSink::create(&spec.output_path)?;
    let axis = spec.sweep_axis.name();
    let mut rows = Vec::with_capacity(spec.expected_rows());
    let (tx, rx) = mpsc::channel::<(usize, Vec<SweepRow>)>();
    let write_result = std::thread::scope(|scope| -> Result<()> {
        scope.spawn(|| {
            pool.install(|| {
                jobs.par_iter().for_each_with(tx, |tx, &(i, v, r)| {
                    // The receiver only disappears after a write error,
                    // which is reported below.
                    let _ = tx.send((i, run_cell(spec, v, r, options)));
                });
            });
        });
        let mut pending = BTreeMap::new();
        let mut next = 0;
        for (i, cell) in rx {
            pending.insert(i, cell);
            while let Some(cell) = pending.remove(&next) {
                for r in &cell {
                    sink.push(axis, r)?;
                }
                sink.flush()?;
                rows.extend(cell);
                next += 1;
            }
        }
        Ok(())
    });
    write_result?;
    sink.finish()?;

    let summary = summarize(spec, &rows);
    let summary_path = sidecar_path(&spec.output_path, "summary");
    write_summary(&summary_path, axis, &summary)?;
    Ok(SweepOutcome {
        rows,
        summary,
        output_path: spec.output_path.clone(),
        summary_path,
    })
}
