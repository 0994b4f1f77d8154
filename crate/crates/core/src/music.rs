//! Near-field MUSIC over a Cartesian grid.
//!
//! Spectra are stored row-major with `y` as the slow index, so cell
//! `(ix, iy)` lives at `iy * nx + ix`.

use std::io::{Read, Write};

use rand::Rng;
use rayon::prelude::*;

use crate::beamform::optimal_analog;
use crate::channel::{receive_response, simulate_echoes};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, Point2, PolarPoint};
use crate::harness::scenario::{seeded, solve, stream, Algorithm, Prepared, RunOptions};
use crate::linalg::{self, eigh_desc, real, CMat, CVec};

/// Added to the MUSIC denominator before inversion.
pub const DENOM_FLOOR: f64 = 1e-18;

/// `start, start + step, …` up to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub stop: f64,
}

impl Axis {
    pub fn new(start: f64, step: f64, stop: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::config(
                "grid",
                format!("step must be positive, got {step}"),
            ));
        }
        if !(start.is_finite() && stop.is_finite() && stop >= start) {
            return Err(Error::config(
                "grid",
                format!("empty range {start}..{stop}"),
            ));
        }
        Ok(Axis { start, step, stop })
    }

    pub fn len(&self) -> usize {
        // The relative slack keeps `stop` when it is a multiple of `step`
        // up to rounding.
        ((self.stop - self.start) / self.step * (1.0 + 1e-12) + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').map(str::trim).collect();
        let [a, b, c] = parts[..] else {
            return Err(Error::Parse(format!(
                "expected start:step:stop, got `{text}`"
            )));
        };
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Parse(format!("`{s}` is not a number")))
        };
        Axis::new(num(a)?, num(b)?, num(c)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x: Axis,
    pub y: Axis,
}

impl Grid {
    /// Parses `"x0:dx:x1,y0:dy:y1"` (meters).
    pub fn parse(text: &str) -> Result<Self> {
        let (x, y) = text
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("expected `x0:dx:x1,y0:dy:y1`, got `{text}`")))?;
        Ok(Grid {
            x: Axis::parse(x)?,
            y: Axis::parse(y)?,
        })
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn ny(&self) -> usize {
        self.y.len()
    }

    pub fn cells(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn point(&self, index: usize) -> Point2 {
        let nx = self.nx();
        Point2::new(self.x.value(index % nx), self.y.value(index / nx))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MusicConfig {
    pub grid: Grid,
    pub snapshots: usize,
    /// Signal-subspace dimension; `None` means the object count Q.
    pub assumed_sources: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct MusicResult {
    pub grid: Grid,
    /// Normalized to a maximum of 1.
    pub spectrum: Vec<f64>,
    pub peak_index: usize,
    pub peak: Point2,
    /// −3 dB width along the range cut through the peak, meters. Infinite
    /// when the spectrum never falls that far inside the searched span.
    pub mainlobe_width: f64,
    /// Cells that coincide with an antenna and were set to zero.
    pub flagged: Vec<usize>,
}

/// `(1/L)·Y Y^H`.
pub fn sample_covariance(y: &CMat) -> Result<CMat> {
    if y.ncols() == 0 {
        return Err(Error::Shape("at least one snapshot is required".into()));
    }
    let l = y.ncols() as f64;
    Ok(linalg::hermitian_part(&(y * y.adjoint())) / real(l))
}

/// Eigenvectors of the `N − sources` smallest eigenvalues.
pub fn noise_subspace(cov: &CMat, assumed_sources: usize) -> Result<CMat> {
    let n = cov.nrows();
    if cov.ncols() != n {
        return Err(Error::Shape(format!("covariance is {}x{}", n, cov.ncols())));
    }
    if assumed_sources >= n {
        return Err(Error::config(
            "assumed_sources",
            format!("{assumed_sources} sources leave no noise subspace in {n} dimensions"),
        ));
    }
    let (_, vecs) = eigh_desc(&linalg::hermitian_part(cov));
    Ok(vecs
        .columns(assumed_sources, n - assumed_sources)
        .into_owned())
}

fn pseudo_power(noise_basis: &CMat, g: &CVec) -> f64 {
    let p = noise_basis.adjoint() * g;
    1.0 / (p.norm_squared() + DENOM_FLOOR)
}

fn response_at(geometry: &ArrayGeometry, point: Point2) -> Result<CVec> {
    receive_response(geometry, point.to_polar())
}

/// Evaluates the spectrum on every grid cell, normalizes it and measures
/// the main lobe. Ties for the peak go to the lowest linear index.
pub fn music_spectrum(
    noise_basis: &CMat,
    geometry: &ArrayGeometry,
    grid: &Grid,
) -> Result<MusicResult> {
    if noise_basis.nrows() != geometry.total_antennas() {
        return Err(Error::Shape(format!(
            "noise basis has {} rows for {} antennas",
            noise_basis.nrows(),
            geometry.total_antennas()
        )));
    }
    let raw: Vec<Option<f64>> = (0..grid.cells())
        .into_par_iter()
        .map(|i| match response_at(geometry, grid.point(i)) {
            Ok(g) => Ok(Some(pseudo_power(noise_basis, &g))),
            Err(Error::DegenerateGeometry(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let flagged: Vec<usize> = (0..raw.len()).filter(|&i| raw[i].is_none()).collect();
    let mut peak_index = 0;
    let mut peak_value = f64::NEG_INFINITY;
    for (i, v) in raw.iter().enumerate() {
        if let Some(v) = v {
            if *v > peak_value {
                peak_value = *v;
                peak_index = i;
            }
        }
    }
    if !peak_value.is_finite() || peak_value <= 0.0 {
        return Err(Error::DegenerateGeometry(
            "no grid cell admits a response".into(),
        ));
    }
    let spectrum = raw
        .iter()
        .map(|v| v.map_or(0.0, |v| v / peak_value))
        .collect();
    let peak = grid.point(peak_index);
    let mainlobe_width = range_width(noise_basis, geometry, grid, peak, peak_value)?;
    Ok(MusicResult {
        grid: *grid,
        spectrum,
        peak_index,
        peak,
        mainlobe_width,
        flagged,
    })
}

/// Walks the ray through `peak` in both directions until the spectrum
/// drops to half the peak value, with linear interpolation at the
/// crossing. The ray is sampled at a quarter of the finer grid step and
/// searched over the radial span of the grid.
fn range_width(
    noise_basis: &CMat,
    geometry: &ArrayGeometry,
    grid: &Grid,
    peak: Point2,
    peak_value: f64,
) -> Result<f64> {
    let polar = peak.to_polar();
    let step = 0.25 * grid.x.step.min(grid.y.step);
    let corners = [
        Point2::new(grid.x.start, grid.y.start),
        Point2::new(grid.x.start, grid.y.stop),
        Point2::new(grid.x.stop, grid.y.start),
        Point2::new(grid.x.stop, grid.y.stop),
    ];
    let r_max = corners.iter().map(|c| c.to_polar().r).fold(0.0, f64::max);
    let half = 0.5 * peak_value;
    let edge = |dir: f64| -> Result<Option<f64>> {
        let mut prev = (0.0, peak_value);
        let mut k = 1;
        loop {
            let offset = k as f64 * step;
            let r = polar.r + dir * offset;
            if r <= step || r > r_max {
                return Ok(None);
            }
            let p = PolarPoint {
                r,
                theta: polar.theta,
            }
            .to_cartesian();
            let value = match response_at(geometry, p) {
                Ok(g) => pseudo_power(noise_basis, &g),
                Err(Error::DegenerateGeometry(_)) => 0.0,
                Err(e) => return Err(e),
            };
            if value <= half {
                let frac = (prev.1 - half) / (prev.1 - value);
                return Ok(Some(prev.0 + frac * (offset - prev.0)));
            }
            prev = (offset, value);
            k += 1;
        }
    };
    Ok(match (edge(-1.0)?, edge(1.0)?) {
        (Some(a), Some(b)) => a + b,
        _ => f64::INFINITY,
    })
}

/// Row per cell: `x, y, value`.
pub fn write_csv<W: Write>(result: &MusicResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x_m", "y_m", "value"])?;
    for (i, v) in result.spectrum.iter().enumerate() {
        let p = result.grid.point(i);
        w.write_record([
            format!("{:.6}", p.x),
            format!("{:.6}", p.y),
            format!("{v:.9e}"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Little-endian `u64 nx, u64 ny, f64 x0, y0, dx, dy`, then the row-major
/// values as `f64`.
pub fn write_binary<W: Write>(result: &MusicResult, mut writer: W) -> Result<()> {
    let g = &result.grid;
    writer.write_all(&(g.nx() as u64).to_le_bytes())?;
    writer.write_all(&(g.ny() as u64).to_le_bytes())?;
    for v in [g.x.start, g.y.start, g.x.step, g.y.step] {
        writer.write_all(&v.to_le_bytes())?;
    }
    for v in &result.spectrum {
        writer.write_all(&v.to_le_bytes())?;
    }
    writer.flush()?;
    Ok(())
}

/// Grid dump as read back: `(nx, ny, [x0, y0, dx, dy], values)`.
pub type BinaryGrid = (usize, usize, [f64; 4], Vec<f64>);

pub fn read_binary<R: Read>(mut reader: R) -> Result<BinaryGrid> {
    let mut buf = [0u8; 8];
    let mut next = |r: &mut R| -> Result<[u8; 8]> {
        r.read_exact(&mut buf)?;
        Ok(buf)
    };
    let nx = u64::from_le_bytes(next(&mut reader)?) as usize;
    let ny = u64::from_le_bytes(next(&mut reader)?) as usize;
    let mut header = [0.0; 4];
    for h in header.iter_mut() {
        *h = f64::from_le_bytes(next(&mut reader)?);
    }
    let mut values = Vec::with_capacity(nx * ny);
    for _ in 0..nx * ny {
        values.push(f64::from_le_bytes(next(&mut reader)?));
    }
    Ok((nx, ny, header, values))
}

/// Echo block and the quantities needed to judge it.
#[derive(Debug, Clone)]
pub struct EchoBlock {
    pub y: CMat,
    /// `α_0² ‖g_r0‖² · g_t0^H R_X g_t0 / σ_s²` in dB.
    pub target_snr_db: f64,
}

/// Receive snapshots under the SDR-RRS transmit beamformer. The symbols
/// are drawn first, then the reflection coefficients (fixed over the block)
/// and the noise, all from the echo stream of the scenario seed.
pub fn simulate_block(prep: &Prepared, snapshots: usize) -> Result<EchoBlock> {
    if snapshots == 0 {
        return Err(Error::config("snapshots", "must be at least 1"));
    }
    let solved = solve(prep, Algorithm::SdrRrs, &RunOptions::default())?;
    let w_bb = solved
        .w_bb
        .ok_or_else(|| Error::Infeasible(format!("no transmit beamformer ({})", solved.status)))?;
    let w = optimal_analog(&prep.basis) * &w_bb;
    let mut rng = seeded(prep.config.seed, stream::ECHOES);
    let symbols = linalg::complex_normal_matrix(w.ncols(), snapshots, &mut rng);
    let x = &w * symbols;
    let y = simulate_echoes(
        &prep.responses,
        &prep.scene,
        &x,
        prep.config.sigma_s_sq,
        &mut rng,
    )?;
    let target = &prep.responses.objects[0];
    let r_x = &w * w.adjoint();
    let tx = target.g_t.dotc(&(&r_x * &target.g_t)).re;
    let snr = prep.scene.alpha(0).powi(2) * target.g_r.norm_squared() * tx / prep.config.sigma_s_sq;
    Ok(EchoBlock {
        y,
        target_snr_db: 10.0 * snr.log10(),
    })
}

/// Full pipeline: scenario, SDR-RRS beamformer, echoes, spectrum.
pub fn run_music(config: &ScenarioConfig, music: &MusicConfig) -> Result<(MusicResult, EchoBlock)> {
    let prep = Prepared::new(config)?;
    let block = simulate_block(&prep, music.snapshots)?;
    let cov = sample_covariance(&block.y)?;
    let sources = music.assumed_sources.unwrap_or(prep.scene.len());
    let basis = noise_subspace(&cov, sources)?;
    Ok((music_spectrum(&basis, &prep.geometry, &music.grid)?, block))
}

/// Draws `L` i.i.d. `CN(0, σ²)` snapshots; test helper for the estimator.
pub fn white_snapshots<R: Rng + ?Sized>(n: usize, l: usize, sigma_sq: f64, rng: &mut R) -> CMat {
    linalg::complex_normal_matrix(n, l, rng) * real(sigma_sq.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = Grid::parse("0:0.5:2,10:1:12").unwrap();
        assert_eq!((g.nx(), g.ny()), (5, 3));
        assert_eq!(g.point(6), Point2::new(0.5, 11.0));
        assert!(Grid::parse("0:0:1,0:1:1").is_err());
        assert!(Grid::parse("0:1,0:1:1").is_err());
        assert!(Grid::parse("2:1:1,0:1:1").is_err());
        // Inclusive stop despite rounding in 0.1 steps.
        assert_eq!(Grid::parse("0:0.1:0.3,0:1:0").unwrap().nx(), 4);
    }

    #[test]
    fn single_snapshot_covariance() {
        let y = CMat::from_column_slice(2, 1, &[real(1.0), linalg::cis(0.3)]);
        let c = sample_covariance(&y).unwrap();
        assert!((c - &y * y.adjoint()).norm() < 1e-15);
        assert!(sample_covariance(&CMat::zeros(2, 0)).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let grid = Grid::parse("0:1:2,0:1:1").unwrap();
        let result = MusicResult {
            grid,
            spectrum: vec![0.1, 0.2, 0.3, 0.4, 0.5, 1.0],
            peak_index: 5,
            peak: grid.point(5),
            mainlobe_width: 1.0,
            flagged: vec![],
        };
        let mut buf = Vec::new();
        write_binary(&result, &mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 32 + 48);
        let (nx, ny, header, values) = read_binary(&buf[..]).unwrap();
        assert_eq!((nx, ny), (3, 2));
        assert_eq!(header, [0.0, 0.0, 1.0, 1.0]);
        assert_eq!(values, result.spectrum);
    }
}
