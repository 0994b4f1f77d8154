//! Scenario description and its on-disk TOML form.
//!
//! Keys carry their units (`frequency_ghz`, `noise_comm_dbm`, ...). Anything
//! left out of a file falls back to the full-size defaults, or to the
//! desk-scale preset when `desk_scale = true`.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::PolarPoint;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Placement of the subarray reference antennas along the x-axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Reference antennas `d_s = Γ·d` apart.
    Uniform,
    /// Reference antennas drawn uniformly over the uniform layout's span,
    /// with at least `M·d` between neighbours.
    Random,
    /// Subarrays abutting with half-wavelength pitch (`Γ = M`).
    Collocated,
}

impl Layout {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(Layout::Uniform),
            "random" => Ok(Layout::Random),
            "collocated" => Ok(Layout::Collocated),
            other => Err(Error::config(
                "array.layout",
                format!("unknown layout `{other}`"),
            )),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Layout::Uniform => "uniform",
            Layout::Random => "random",
            Layout::Collocated => "collocated",
        }
    }
}

/// A sensing object: position plus reflection amplitude `α` (`E|β|² = α²`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectSpec {
    pub location: PolarPoint,
    pub alpha: f64,
}

/// Path-gain model standing in for a full propagation model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathModel {
    /// Amplitude gain at 1 m; `|μ| = gain_ref / D`.
    pub gain_ref: f64,
    /// Extra loss applied to every non-line-of-sight path, in dB.
    pub nlos_extra_loss_db: f64,
    pub scatterer_range: (f64, f64),
    /// Radians.
    pub scatterer_angle: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Hz.
    pub carrier_frequency: f64,
    /// K.
    pub subarrays: usize,
    /// M.
    pub antennas_per_subarray: usize,
    /// Γ, so that `d_s = Γ·d`.
    pub spacing_factor: f64,
    /// D0 in meters.
    pub half_separation: f64,
    pub layout: Layout,
    /// N_c.
    pub user_antennas: usize,
    /// N_p, including the line-of-sight path.
    pub paths: usize,
    pub user: PolarPoint,
    pub target: ObjectSpec,
    pub interferers: Vec<ObjectSpec>,
    /// Watts.
    pub sigma_c_sq: f64,
    /// Watts.
    pub sigma_s_sq: f64,
    /// Γ_s, linear.
    pub scnr_threshold: f64,
    /// N_s; `None` means "use the numerical rank of H_c".
    pub streams: Option<usize>,
    /// Number of paths whose departure directions enter the analog
    /// beamformer; `None` means all of them.
    pub analog_paths: Option<usize>,
    pub snapshots: usize,
    pub seed: u64,
    pub path_model: PathModel,
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn polar_deg(r: f64, deg: f64) -> PolarPoint {
    PolarPoint {
        r,
        theta: deg.to_radians(),
    }
}

impl ScenarioConfig {
    /// Full-size scene: K=6, M=32 at 38 GHz, 16-antenna user at (40 m, 15°),
    /// target at (30 m, 30°), interferers at (30 m, 40°) and (30 m, −30°).
    pub fn full_default() -> Self {
        ScenarioConfig {
            carrier_frequency: 38e9,
            subarrays: 6,
            antennas_per_subarray: 32,
            spacing_factor: 64.0,
            half_separation: 0.5,
            layout: Layout::Uniform,
            user_antennas: 16,
            paths: 4,
            user: polar_deg(40.0, 15.0),
            target: ObjectSpec {
                location: polar_deg(30.0, 30.0),
                alpha: 1e-3,
            },
            interferers: vec![
                ObjectSpec {
                    location: polar_deg(30.0, 40.0),
                    alpha: 1e-3,
                },
                ObjectSpec {
                    location: polar_deg(30.0, -30.0),
                    alpha: 1e-3,
                },
            ],
            sigma_c_sq: dbm_to_watts(-30.0),
            sigma_s_sq: dbm_to_watts(-20.0),
            scnr_threshold: db_to_linear(10.0),
            streams: None,
            analog_paths: None,
            snapshots: 256,
            seed: 7,
            path_model: PathModel {
                gain_ref: 10f64.powf(-30.0 / 20.0),
                nlos_extra_loss_db: 10.0,
                scatterer_range: (5.0, 30.0),
                scatterer_angle: ((-60f64).to_radians(), 60f64.to_radians()),
            },
        }
    }

    /// Desk-scale preset: K=4, M=8, N_c=4, N_p=2, Q=2 (target plus the
    /// interferer at −30°).
    pub fn desk_default() -> Self {
        let mut c = Self::full_default();
        c.subarrays = 4;
        c.antennas_per_subarray = 8;
        c.user_antennas = 4;
        c.paths = 2;
        c.interferers = vec![ObjectSpec {
            location: polar_deg(30.0, -30.0),
            alpha: 1e-3,
        }];
        c
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    /// Intra-subarray element spacing `d = λ/2`.
    pub fn element_spacing(&self) -> f64 {
        self.wavelength() / 2.0
    }

    pub fn total_antennas(&self) -> usize {
        self.subarrays * self.antennas_per_subarray
    }

    /// Q: target plus interferers.
    pub fn object_count(&self) -> usize {
        1 + self.interferers.len()
    }

    /// Paths kept in the analog beamformer.
    pub fn analog_path_count(&self) -> usize {
        self.analog_paths.unwrap_or(self.paths).min(self.paths)
    }

    /// RF chains per subarray, `M_RF = Q + N_p`.
    pub fn rf_chains_per_subarray(&self) -> usize {
        self.object_count() + self.analog_path_count()
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.carrier_frequency;
        if !(f.is_finite() && f > 0.0) {
            return Err(Error::config("array.frequency_ghz", "must be positive"));
        }
        if self.subarrays == 0 {
            return Err(Error::config("array.subarrays", "must be at least 1"));
        }
        if self.antennas_per_subarray == 0 {
            return Err(Error::config(
                "array.antennas_per_subarray",
                "must be at least 1",
            ));
        }
        if self.layout != Layout::Collocated
            && !(self.spacing_factor >= self.antennas_per_subarray as f64)
        {
            return Err(Error::config(
                "array.spacing_factor",
                format!(
                    "Γ = {} is smaller than M = {}",
                    self.spacing_factor, self.antennas_per_subarray
                ),
            ));
        }
        if !(self.half_separation.is_finite() && self.half_separation >= 0.0) {
            return Err(Error::config(
                "array.half_separation_m",
                "must be non-negative",
            ));
        }
        if self.user_antennas == 0 {
            return Err(Error::config("user.antennas", "must be at least 1"));
        }
        if self.paths == 0 {
            return Err(Error::config("channel.paths", "must be at least 1"));
        }
        if let Some(a) = self.analog_paths {
            if a == 0 || a > self.paths {
                return Err(Error::config(
                    "channel.analog_paths",
                    "must lie in 1..=paths",
                ));
            }
        }
        check_point("user", &self.user)?;
        check_point("sensing.target", &self.target.location)?;
        check_alpha("sensing.target", self.target.alpha)?;
        for (i, obj) in self.interferers.iter().enumerate() {
            let field = format!("sensing.interferers[{i}]");
            check_point(&field, &obj.location)?;
            check_alpha(&field, obj.alpha)?;
        }
        if !(self.sigma_c_sq.is_finite() && self.sigma_c_sq > 0.0) {
            return Err(Error::config(
                "comm.noise_dbm",
                "noise power must be positive",
            ));
        }
        if !(self.sigma_s_sq.is_finite() && self.sigma_s_sq > 0.0) {
            return Err(Error::config(
                "sensing.noise_dbm",
                "noise power must be positive",
            ));
        }
        if !(self.scnr_threshold.is_finite() && self.scnr_threshold >= 0.0) {
            return Err(Error::config("sensing.scnr_threshold_db", "must be finite"));
        }
        if self.streams == Some(0) {
            return Err(Error::config("comm.streams", "must be at least 1"));
        }
        if self.snapshots == 0 {
            return Err(Error::config("sensing.snapshots", "must be at least 1"));
        }
        let pm = &self.path_model;
        if !(pm.gain_ref > 0.0 && pm.gain_ref.is_finite()) {
            return Err(Error::config("channel.path_gain_ref_db", "must be finite"));
        }
        let (r0, r1) = pm.scatterer_range;
        if !(r0 > 0.0 && r1 >= r0) {
            return Err(Error::config(
                "channel.scatterer_range_m",
                "need 0 < min <= max",
            ));
        }
        let (a0, a1) = pm.scatterer_angle;
        if !(a0 >= -FRAC_PI_2 && a1 <= FRAC_PI_2 && a1 >= a0) {
            return Err(Error::config(
                "channel.scatterer_angle_deg",
                "need -90 <= min <= max <= 90",
            ));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let cfg = raw.resolve()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }
}

fn check_point(field: &str, p: &PolarPoint) -> Result<()> {
    if !(p.r.is_finite() && p.r > 0.0) {
        return Err(Error::config(
            format!("{field}.range_m"),
            "must be positive",
        ));
    }
    if !(p.theta >= -FRAC_PI_2 && p.theta <= FRAC_PI_2) {
        return Err(Error::config(
            format!("{field}.angle_deg"),
            "must lie in [-90, 90]",
        ));
    }
    Ok(())
}

fn check_alpha(field: &str, alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::config(
            format!("{field}.rcs_alpha"),
            "must be non-negative",
        ));
    }
    Ok(())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    desk_scale: Option<bool>,
    seed: Option<u64>,
    array: Option<RawArray>,
    user: Option<RawUser>,
    channel: Option<RawChannel>,
    comm: Option<RawComm>,
    sensing: Option<RawSensing>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArray {
    frequency_ghz: Option<f64>,
    subarrays: Option<usize>,
    antennas_per_subarray: Option<usize>,
    spacing_factor: Option<f64>,
    half_separation_m: Option<f64>,
    layout: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUser {
    antennas: Option<usize>,
    range_m: Option<f64>,
    angle_deg: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    paths: Option<usize>,
    analog_paths: Option<usize>,
    path_gain_ref_db: Option<f64>,
    nlos_extra_loss_db: Option<f64>,
    scatterer_range_m: Option<[f64; 2]>,
    scatterer_angle_deg: Option<[f64; 2]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComm {
    noise_dbm: Option<f64>,
    streams: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSensing {
    noise_dbm: Option<f64>,
    scnr_threshold_db: Option<f64>,
    snapshots: Option<usize>,
    target: Option<RawObject>,
    interferers: Option<Vec<RawObject>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObject {
    range_m: f64,
    angle_deg: f64,
    rcs_alpha: Option<f64>,
}

impl RawObject {
    fn resolve(&self, default_alpha: f64) -> ObjectSpec {
        ObjectSpec {
            location: polar_deg(self.range_m, self.angle_deg),
            alpha: self.rcs_alpha.unwrap_or(default_alpha),
        }
    }
}

impl RawConfig {
    fn resolve(self) -> Result<ScenarioConfig> {
        let mut c = if self.desk_scale.unwrap_or(false) {
            ScenarioConfig::desk_default()
        } else {
            ScenarioConfig::full_default()
        };
        if let Some(seed) = self.seed {
            c.seed = seed;
        }
        if let Some(a) = self.array {
            if let Some(f) = a.frequency_ghz {
                c.carrier_frequency = f * 1e9;
            }
            if let Some(k) = a.subarrays {
                c.subarrays = k;
            }
            if let Some(m) = a.antennas_per_subarray {
                c.antennas_per_subarray = m;
            }
            if let Some(g) = a.spacing_factor {
                c.spacing_factor = g;
            }
            if let Some(d0) = a.half_separation_m {
                c.half_separation = d0;
            }
            if let Some(l) = a.layout {
                c.layout = Layout::parse(&l)?;
            }
        }
        if let Some(u) = self.user {
            if let Some(n) = u.antennas {
                c.user_antennas = n;
            }
            if let Some(r) = u.range_m {
                c.user.r = r;
            }
            if let Some(t) = u.angle_deg {
                c.user.theta = t.to_radians();
            }
        }
        if let Some(ch) = self.channel {
            if let Some(p) = ch.paths {
                c.paths = p;
            }
            c.analog_paths = ch.analog_paths.or(c.analog_paths);
            if let Some(g) = ch.path_gain_ref_db {
                c.path_model.gain_ref = 10f64.powf(g / 20.0);
            }
            if let Some(l) = ch.nlos_extra_loss_db {
                c.path_model.nlos_extra_loss_db = l;
            }
            if let Some([lo, hi]) = ch.scatterer_range_m {
                c.path_model.scatterer_range = (lo, hi);
            }
            if let Some([lo, hi]) = ch.scatterer_angle_deg {
                c.path_model.scatterer_angle = (lo.to_radians(), hi.to_radians());
            }
        }
        if let Some(cm) = self.comm {
            if let Some(n) = cm.noise_dbm {
                c.sigma_c_sq = dbm_to_watts(n);
            }
            c.streams = cm.streams.or(c.streams);
        }
        if let Some(s) = self.sensing {
            if let Some(n) = s.noise_dbm {
                c.sigma_s_sq = dbm_to_watts(n);
            }
            if let Some(g) = s.scnr_threshold_db {
                c.scnr_threshold = db_to_linear(g);
            }
            if let Some(l) = s.snapshots {
                c.snapshots = l;
            }
            if let Some(t) = s.target {
                c.target = t.resolve(c.target.alpha);
            }
            if let Some(list) = s.interferers {
                let alpha = c.interferers.first().map_or(c.target.alpha, |o| o.alpha);
                c.interferers = list.iter().map(|o| o.resolve(alpha)).collect();
            }
        }
        Ok(c)
    }
}
