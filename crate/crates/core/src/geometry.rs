//! Array layout and the piecewise-far-field phase model.
//!
//! The transmit array sits on the positive x-axis starting at `D0`, the
//! receive array is its mirror image. Angles are measured from the positive
//! y-axis, positive toward positive x, so a point at range `r` and angle `θ`
//! is `(r sin θ, r cos θ)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Layout, ScenarioConfig};
use crate::error::{Error, Result};
use crate::linalg::{cis, CVec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPoint {
    pub r: f64,
    pub theta: f64,
}

impl PolarPoint {
    pub fn new(r: f64, theta: f64) -> Self {
        PolarPoint { r, theta }
    }

    pub fn to_cartesian(self) -> Point2 {
        Point2 {
            x: self.r * self.theta.sin(),
            y: self.r * self.theta.cos(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Polar form; points below the x-axis are reported with `|θ| > π/2`.
    pub fn to_polar(self) -> PolarPoint {
        PolarPoint {
            r: self.x.hypot(self.y),
            theta: self.x.atan2(self.y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Tx,
    Rx,
}

#[derive(Debug, Clone)]
pub struct ArrayGeometry {
    /// `tx_positions[k][m]`, 0-based.
    pub tx_positions: Vec<Vec<Point2>>,
    pub rx_positions: Vec<Vec<Point2>>,
    pub lambda: f64,
    pub d: f64,
    /// Nominal reference spacing `Γ·d` (actual offsets differ for the
    /// random layout).
    pub d_s: f64,
}

impl ArrayGeometry {
    pub fn subarrays(&self) -> usize {
        self.tx_positions.len()
    }

    pub fn antennas_per_subarray(&self) -> usize {
        self.tx_positions.first().map_or(0, Vec::len)
    }

    pub fn total_antennas(&self) -> usize {
        self.subarrays() * self.antennas_per_subarray()
    }

    /// Reference (first) antenna of subarray `k`.
    pub fn reference(&self, side: Side, k: usize) -> Point2 {
        match side {
            Side::Tx => self.tx_positions[k][0],
            Side::Rx => self.rx_positions[k][0],
        }
    }

    /// Aperture of one subarray, `(M−1)·d`.
    pub fn subarray_aperture(&self) -> f64 {
        self.antennas_per_subarray().saturating_sub(1) as f64 * self.d
    }

    /// Span from the first to the last transmit antenna.
    pub fn total_aperture(&self) -> f64 {
        let first = self.tx_positions[0][0].x;
        let last = self
            .tx_positions
            .last()
            .and_then(|s| s.last())
            .map_or(first, |p| p.x);
        last - first
    }

    /// Every antenna position on `side`, subarray-major.
    pub fn positions(&self, side: Side) -> impl Iterator<Item = Point2> + '_ {
        let grid = match side {
            Side::Tx => &self.tx_positions,
            Side::Rx => &self.rx_positions,
        };
        grid.iter().flatten().copied()
    }
}

/// Offsets of the subarray reference antennas from `D0`.
fn reference_offsets(config: &ScenarioConfig, d: f64) -> Vec<f64> {
    let k = config.subarrays;
    let m = config.antennas_per_subarray as f64;
    match config.layout {
        Layout::Uniform => (0..k)
            .map(|i| i as f64 * config.spacing_factor * d)
            .collect(),
        Layout::Collocated => (0..k).map(|i| i as f64 * m * d).collect(),
        Layout::Random => {
            let span = (k.saturating_sub(1)) as f64 * config.spacing_factor * d;
            if k < 3 {
                return (0..k).map(|i| i as f64 * span).collect();
            }
            let gap = m * d;
            let slack = span - (k - 1) as f64 * gap;
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x6c61_796f_7574);
            let mut u: Vec<f64> = (0..k - 2).map(|_| rng.random_range(0.0..=slack)).collect();
            u.sort_by(f64::total_cmp);
            let mut out = Vec::with_capacity(k);
            out.push(0.0);
            out.extend(u.iter().enumerate().map(|(i, x)| x + (i + 1) as f64 * gap));
            out.push(span);
            out
        }
    }
}

pub fn build_geometry(config: &ScenarioConfig) -> Result<ArrayGeometry> {
    config.validate()?;
    let lambda = config.wavelength();
    let d = lambda / 2.0;
    let gamma = match config.layout {
        Layout::Collocated => config.antennas_per_subarray as f64,
        _ => config.spacing_factor,
    };
    let offsets = reference_offsets(config, d);
    let tx_positions: Vec<Vec<Point2>> = offsets
        .iter()
        .map(|&o| {
            (0..config.antennas_per_subarray)
                .map(|m| Point2::new(config.half_separation + o + m as f64 * d, 0.0))
                .collect()
        })
        .collect();
    let rx_positions = tx_positions
        .iter()
        .map(|row| row.iter().map(|p| Point2::new(-p.x, -p.y)).collect())
        .collect();
    Ok(ArrayGeometry {
        tx_positions,
        rx_positions,
        lambda,
        d,
        d_s: gamma * d,
    })
}

/// Far-field steering vector; entry `m` is `exp(−j·2π/λ·m·d·sin(angle))`.
pub fn steering_vector(m: usize, angle: f64, d: f64, lambda: f64) -> CVec {
    let step = -2.0 * std::f64::consts::PI / lambda * d * angle.sin();
    CVec::from_iterator(m, (0..m).map(|i| cis(step * i as f64)))
}

/// Distances below this (meters) count as coincident.
pub const COINCIDENCE_TOL: f64 = 1e-9;

/// Direction of `target` seen from an arbitrary reference point.
pub(crate) fn angle_from(reference: Point2, target: Point2) -> Result<f64> {
    let dist = reference.distance(target);
    if !(dist > COINCIDENCE_TOL) {
        return Err(Error::DegenerateGeometry(format!(
            "point ({:.6}, {:.6}) coincides with a reference antenna",
            target.x, target.y
        )));
    }
    Ok(((target.x - reference.x) / dist).clamp(-1.0, 1.0).asin())
}

/// Angle of `location` seen from the reference antenna of subarray `k`.
pub fn subarray_angle(
    geometry: &ArrayGeometry,
    side: Side,
    k: usize,
    location: PolarPoint,
) -> Result<f64> {
    angle_from(geometry.reference(side, k), location.to_cartesian())
}

/// Near-field phase of every subarray reference antenna toward `location`.
pub fn inter_subarray_phase(
    geometry: &ArrayGeometry,
    side: Side,
    location: PolarPoint,
) -> Result<CVec> {
    let p = location.to_cartesian();
    let kappa = -2.0 * std::f64::consts::PI / geometry.lambda;
    let mut out = CVec::zeros(geometry.subarrays());
    for k in 0..geometry.subarrays() {
        let dist = geometry.reference(side, k).distance(p);
        if !(dist > COINCIDENCE_TOL) {
            return Err(Error::DegenerateGeometry(format!(
                "location coincides with reference antenna of subarray {k}"
            )));
        }
        out[k] = cis(kappa * dist);
    }
    Ok(out)
}

/// Conventional near-field boundary `2·S²/λ`.
pub fn rayleigh_distance(aperture: f64, lambda: f64) -> f64 {
    2.0 * aperture * aperture / lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6, PI};

    fn cfg(k: usize, m: usize, gamma: f64, d0: f64) -> ScenarioConfig {
        let mut c = ScenarioConfig::desk_default();
        c.subarrays = k;
        c.antennas_per_subarray = m;
        c.spacing_factor = gamma;
        c.half_separation = d0;
        c
    }

    #[test]
    fn single_element_positions() {
        let g = build_geometry(&cfg(1, 1, 1.0, 1.0)).unwrap();
        assert_eq!(g.tx_positions, vec![vec![Point2::new(1.0, 0.0)]]);
        assert_eq!(g.rx_positions, vec![vec![Point2::new(-1.0, 0.0)]]);
    }

    #[test]
    fn two_by_two_positions() {
        let g = build_geometry(&cfg(2, 2, 2.0, 0.0)).unwrap();
        let d = 299_792_458.0 / 38e9 / 2.0;
        assert!((g.d - 0.003945).abs() < 1e-6);
        let xs: Vec<f64> = g.positions(Side::Tx).map(|p| p.x).collect();
        for (i, x) in xs.iter().enumerate() {
            assert!((x - i as f64 * d).abs() < 1e-15);
        }
    }

    #[test]
    fn full_size_spacing() {
        let g = build_geometry(&ScenarioConfig::full_default()).unwrap();
        // Quoted to three significant figures; c = 3e8 m/s rounds to it exactly.
        assert!((g.d - 0.00395).abs() < 1e-5);
    }

    #[test]
    fn gamma_below_m_is_rejected() {
        assert!(matches!(
            build_geometry(&cfg(2, 8, 4.0, 0.5)),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn steering_examples() {
        let lambda = 0.01;
        let d = lambda / 2.0;
        assert!(steering_vector(5, 0.0, d, lambda)
            .iter()
            .all(|z| (z - 1.0).norm() < 1e-15));
        let a = steering_vector(2, FRAC_PI_2, d, lambda);
        assert!((a[0] - 1.0).norm() < 1e-15 && (a[1] + 1.0).norm() < 1e-12);
        let a = steering_vector(4, FRAC_PI_6, d, lambda);
        for (m, z) in a.iter().enumerate() {
            let expected = cis(-FRAC_PI_2 * m as f64);
            assert!((z - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn subarray_angle_examples() {
        let g = build_geometry(&cfg(2, 2, 2.0, 0.0)).unwrap();
        let a = subarray_angle(&g, Side::Tx, 0, PolarPoint::new(10.0, FRAC_PI_6)).unwrap();
        assert!((a - FRAC_PI_6).abs() < 1e-12);

        let g = build_geometry(&cfg(2, 8, 64.0, 0.5)).unwrap();
        let above = PolarPoint {
            r: 5.0f64.hypot(0.5),
            theta: (0.5f64).atan2(5.0),
        };
        assert!(subarray_angle(&g, Side::Tx, 0, above).unwrap().abs() < 1e-12);
        let far = PolarPoint::new(10.0, FRAC_PI_4);
        let a0 = subarray_angle(&g, Side::Tx, 0, far).unwrap();
        let a1 = subarray_angle(&g, Side::Tx, 1, far).unwrap();
        assert!((a0 - a1).abs() > 1e-6);
    }

    #[test]
    fn coincident_location_is_degenerate() {
        let g = build_geometry(&cfg(1, 1, 1.0, 1.0)).unwrap();
        let on_ref = PolarPoint::new(1.0, FRAC_PI_2);
        assert!(matches!(
            subarray_angle(&g, Side::Tx, 0, on_ref),
            Err(Error::DegenerateGeometry(_))
        ));
        assert!(inter_subarray_phase(&g, Side::Tx, on_ref).is_err());
    }

    #[test]
    fn inter_subarray_phase_examples() {
        let g = build_geometry(&cfg(1, 4, 4.0, 0.5)).unwrap();
        let v = inter_subarray_phase(&g, Side::Tx, PolarPoint::new(3.0, 0.3)).unwrap();
        assert_eq!(v.len(), 1);
        assert!((v[0].norm() - 1.0).abs() < 1e-12);

        let g = build_geometry(&cfg(3, 4, 40.0, 0.2)).unwrap();
        let q = PolarPoint::new(7.0, -0.4);
        let v = inter_subarray_phase(&g, Side::Rx, q).unwrap();
        let (qx, qy) = (7.0 * (-0.4f64).sin(), 7.0 * (-0.4f64).cos());
        for k in 0..3 {
            let rx = &g.rx_positions[k][0];
            let dist = ((qx - rx.x).powi(2) + (qy - rx.y).powi(2)).sqrt();
            let expected = cis(-2.0 * PI / g.lambda * dist);
            assert!((v[k] - expected).norm() < 1e-9);
        }
    }

    #[test]
    fn rayleigh_examples() {
        assert_eq!(rayleigh_distance(0.0, 1.0), 0.0);
        assert_eq!(rayleigh_distance(1.0, 0.5), 4.0);
    }

    #[test]
    fn random_layout_keeps_gap_and_span() {
        let mut c = cfg(6, 8, 64.0, 0.5);
        c.layout = Layout::Random;
        let g = build_geometry(&c).unwrap();
        let refs: Vec<f64> = (0..6).map(|k| g.reference(Side::Tx, k).x).collect();
        for w in refs.windows(2) {
            assert!(w[1] - w[0] >= 8.0 * g.d - 1e-12);
        }
        assert!((refs[5] - refs[0] - 5.0 * 64.0 * g.d).abs() < 1e-12);
    }

    #[test]
    fn collocated_layout_abuts() {
        let mut c = cfg(3, 4, 64.0, 0.5);
        c.layout = Layout::Collocated;
        let g = build_geometry(&c).unwrap();
        let xs: Vec<f64> = g.positions(Side::Tx).map(|p| p.x).collect();
        for w in xs.windows(2) {
            assert!((w[1] - w[0] - g.d).abs() < 1e-12);
        }
    }
}
