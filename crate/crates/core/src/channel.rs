//! Communication channel, sensing responses and echo snapshots.
//!
//! Within a subarray the wavefront is planar, across subarrays it is
//! spherical: each subarray block of `H_c` is a far-field multipath sum at
//! that subarray's own angles, and the exact reference-to-reference
//! distance sets the block's phase.

use std::sync::OnceLock;

use rand::Rng;
use serde_json::{json, Value};

use crate::config::{ObjectSpec, ScenarioConfig};
use crate::error::{Error, Result};
use crate::geometry::{
    angle_from, inter_subarray_phase, steering_vector, subarray_angle, ArrayGeometry, PolarPoint,
    Side,
};
use crate::linalg::{self, cis, complex_normal, real, CMat, CVec, C64};

/// Relative singular-value cutoff used for rank decisions.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    LoS,
    NLoS,
}

/// One propagation path as seen from every transmit subarray.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec {
    pub kind: PathKind,
    pub scatterer: Option<PolarPoint>,
    /// `|μ_p^k|` for each subarray.
    pub gain_magnitude: Vec<f64>,
    /// Reference-to-user path length per subarray (meters).
    pub distances: Vec<f64>,
    /// Departure angle per subarray.
    pub aod: Vec<f64>,
    /// Arrival angle at the user per subarray.
    pub aoa: Vec<f64>,
}

impl PathSpec {
    /// Path from every transmit subarray to `user`, optionally bouncing off
    /// `scatterer`. Gains fall off as `gain_ref / D`, scaled by
    /// `extra_loss_db` for bounced paths.
    pub fn trace(
        geometry: &ArrayGeometry,
        user: PolarPoint,
        scatterer: Option<PolarPoint>,
        gain_ref: f64,
        extra_loss_db: f64,
    ) -> Result<Self> {
        let k_count = geometry.subarrays();
        let u = user.to_cartesian();
        let mut out = PathSpec {
            kind: if scatterer.is_some() {
                PathKind::NLoS
            } else {
                PathKind::LoS
            },
            scatterer,
            gain_magnitude: Vec::with_capacity(k_count),
            distances: Vec::with_capacity(k_count),
            aod: Vec::with_capacity(k_count),
            aoa: Vec::with_capacity(k_count),
        };
        let loss = match scatterer {
            Some(_) => 10f64.powf(-extra_loss_db / 20.0),
            None => 1.0,
        };
        for k in 0..k_count {
            let reference = geometry.reference(Side::Tx, k);
            let (first_hop, last_hop_start) = match scatterer {
                None => (user, reference),
                Some(s) => (s, s.to_cartesian()),
            };
            let aod = subarray_angle(geometry, Side::Tx, k, first_hop)?;
            let dist = match scatterer {
                None => reference.distance(u),
                Some(s) => {
                    let s = s.to_cartesian();
                    let leg = u.distance(s);
                    if !(leg > crate::geometry::COINCIDENCE_TOL) {
                        return Err(Error::DegenerateGeometry(
                            "scatterer coincides with the user".into(),
                        ));
                    }
                    reference.distance(s) + leg
                }
            };
            // Arrival direction at the user, measured like every other angle.
            let aoa = angle_from(u, last_hop_start)?;
            out.gain_magnitude.push(gain_ref * loss / dist);
            out.distances.push(dist);
            out.aod.push(aod);
            out.aoa.push(aoa);
        }
        Ok(out)
    }

    /// Complex gain `μ_p^k = |μ_p^k|·exp(−j2π D_p^k/λ)`.
    pub fn gain(&self, k: usize, lambda: f64) -> C64 {
        self.gain_magnitude[k] * cis(-2.0 * std::f64::consts::PI * self.distances[k] / lambda)
    }
}

/// One line-of-sight path plus `N_p − 1` scatterers drawn uniformly over the
/// configured range/angle sector.
pub fn draw_paths<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    geometry: &ArrayGeometry,
    rng: &mut R,
) -> Result<Vec<PathSpec>> {
    if config.paths == 0 {
        return Err(Error::config("channel.paths", "must be at least 1"));
    }
    let pm = &config.path_model;
    let mut paths = Vec::with_capacity(config.paths);
    paths.push(PathSpec::trace(
        geometry,
        config.user,
        None,
        pm.gain_ref,
        pm.nlos_extra_loss_db,
    )?);
    while paths.len() < config.paths {
        let r = rng.random_range(pm.scatterer_range.0..=pm.scatterer_range.1);
        let theta = rng.random_range(pm.scatterer_angle.0..=pm.scatterer_angle.1);
        let s = PolarPoint::new(r, theta);
        match PathSpec::trace(
            geometry,
            config.user,
            Some(s),
            pm.gain_ref,
            pm.nlos_extra_loss_db,
        ) {
            Ok(p) => paths.push(p),
            // Redraw scatterers that land on the user or an antenna.
            Err(Error::DegenerateGeometry(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(paths)
}

#[derive(Debug, Clone)]
pub struct ChannelSvd {
    pub singular_values: Vec<f64>,
    pub u: CMat,
    /// Right singular vectors as columns, in descending singular-value order.
    pub v: CMat,
}

#[derive(Debug, Clone)]
pub struct CommChannel {
    /// `N_c × N`.
    pub h: CMat,
    pub paths: Vec<PathSpec>,
    svd: OnceLock<ChannelSvd>,
}

impl CommChannel {
    pub fn new(h: CMat, paths: Vec<PathSpec>) -> Self {
        CommChannel {
            h,
            paths,
            svd: OnceLock::new(),
        }
    }

    pub fn svd(&self) -> &ChannelSvd {
        self.svd.get_or_init(|| {
            let svd = self.h.clone().svd(true, true);
            let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
            order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
            let u_full = svd.u.expect("requested");
            let v_full = svd.v_t.expect("requested").adjoint();
            let mut u = CMat::zeros(u_full.nrows(), order.len());
            let mut v = CMat::zeros(v_full.nrows(), order.len());
            for (dst, &src) in order.iter().enumerate() {
                u.set_column(dst, &u_full.column(src));
                v.set_column(dst, &v_full.column(src));
            }
            ChannelSvd {
                singular_values: order.iter().map(|&i| svd.singular_values[i]).collect(),
                u,
                v,
            }
        })
    }

    pub fn rank(&self) -> usize {
        numerical_rank(&self.h, RANK_TOL)
    }

    pub fn to_json(&self) -> Value {
        let paths: Vec<Value> = self
            .paths
            .iter()
            .map(|p| {
                json!({
                    "kind": match p.kind { PathKind::LoS => "los", PathKind::NLoS => "nlos" },
                    "scatterer": p.scatterer.map(|s| json!({"r": s.r, "theta": s.theta})),
                    "gain_magnitude": p.gain_magnitude,
                    "distances": p.distances,
                    "aod": p.aod,
                    "aoa": p.aoa,
                })
            })
            .collect();
        json!({ "h": matrix_to_json(&self.h), "paths": paths })
    }
}

/// `H_c = [H_1, …, H_K]` with `H_k = Σ_p μ_p^k a_c(θ_cp^k) a_t(θ_tp^k)^H`.
pub fn build_comm_channel(
    geometry: &ArrayGeometry,
    paths: Vec<PathSpec>,
    user_antennas: usize,
) -> Result<CommChannel> {
    if paths.is_empty() {
        return Err(Error::config(
            "channel.paths",
            "at least one path is required",
        ));
    }
    let k_count = geometry.subarrays();
    let m = geometry.antennas_per_subarray();
    if let Some(p) = paths
        .iter()
        .find(|p| p.aod.len() != k_count || p.aoa.len() != k_count)
    {
        return Err(Error::Shape(format!(
            "path has {} departure angles for {k_count} subarrays",
            p.aod.len()
        )));
    }
    let (d, lambda) = (geometry.d, geometry.lambda);
    let mut h = CMat::zeros(user_antennas, k_count * m);
    for k in 0..k_count {
        let mut block = h.columns_mut(k * m, m);
        for p in &paths {
            let a_c = steering_vector(user_antennas, p.aoa[k], d, lambda);
            let a_t = steering_vector(m, p.aod[k], d, lambda);
            block += (a_c * a_t.adjoint()) * p.gain(k, lambda);
        }
    }
    Ok(CommChannel::new(h, paths))
}

/// `(min(N_p, N_c), min(K·N_p, N_c))`.
pub fn rank_bounds(paths: usize, user_antennas: usize, subarrays: usize) -> (usize, usize) {
    (
        paths.min(user_antennas),
        (subarrays * paths).min(user_antennas),
    )
}

/// Number of singular values above `rel_tol · σ_max`.
pub fn numerical_rank(matrix: &CMat, rel_tol: f64) -> usize {
    let s = linalg::singular_values(matrix);
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&x| x > rel_tol * smax).count(),
        _ => 0,
    }
}

/// Sensing objects; index 0 is the target.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingScene {
    pub objects: Vec<ObjectSpec>,
}

impl SensingScene {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        let mut objects = vec![config.target];
        objects.extend(config.interferers.iter().copied());
        SensingScene { objects }
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn alpha(&self, q: usize) -> f64 {
        self.objects[q].alpha
    }
}

/// Transmit/receive responses toward a single object.
#[derive(Debug, Clone)]
pub struct ObjectResponse {
    pub g_t: CVec,
    pub g_r: CVec,
    pub nu_t: CVec,
    pub nu_r: CVec,
    pub phi_t: Vec<f64>,
    pub phi_r: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SensingResponses {
    pub objects: Vec<ObjectResponse>,
}

impl SensingResponses {
    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn to_json(&self) -> Value {
        let objects: Vec<Value> = self
            .objects
            .iter()
            .map(|o| {
                json!({
                    "g_t": vector_to_json(&o.g_t),
                    "g_r": vector_to_json(&o.g_r),
                    "phi_t": o.phi_t,
                    "phi_r": o.phi_r,
                })
            })
            .collect();
        json!({ "objects": objects })
    }
}

fn stacked_response(
    geometry: &ArrayGeometry,
    side: Side,
    location: PolarPoint,
) -> Result<(CVec, CVec, Vec<f64>)> {
    let m = geometry.antennas_per_subarray();
    let nu = inter_subarray_phase(geometry, side, location)?;
    let mut g = CVec::zeros(geometry.total_antennas());
    let mut angles = Vec::with_capacity(geometry.subarrays());
    for k in 0..geometry.subarrays() {
        let phi = subarray_angle(geometry, side, k, location)?;
        let a = steering_vector(m, phi, geometry.d, geometry.lambda);
        g.rows_mut(k * m, m).copy_from(&(a * nu[k]));
        angles.push(phi);
    }
    Ok((g, nu, angles))
}

/// `g = (diag(ν) ⊗ I_M)·[a^1; …; a^K]` on both sides.
pub fn sensing_response(geometry: &ArrayGeometry, location: PolarPoint) -> Result<ObjectResponse> {
    let (g_t, nu_t, phi_t) = stacked_response(geometry, Side::Tx, location)?;
    let (g_r, nu_r, phi_r) = stacked_response(geometry, Side::Rx, location)?;
    Ok(ObjectResponse {
        g_t,
        g_r,
        nu_t,
        nu_r,
        phi_t,
        phi_r,
    })
}

/// Receive response alone, used by grid searches.
pub fn receive_response(geometry: &ArrayGeometry, location: PolarPoint) -> Result<CVec> {
    Ok(stacked_response(geometry, Side::Rx, location)?.0)
}

pub fn sensing_responses(
    geometry: &ArrayGeometry,
    scene: &SensingScene,
) -> Result<SensingResponses> {
    let objects = scene
        .objects
        .iter()
        .map(|o| sensing_response(geometry, o.location))
        .collect::<Result<Vec<_>>>()?;
    Ok(SensingResponses { objects })
}

/// `Y_s = Σ_q β_q g_rq g_tq^H X + Z_s` for one coherent block.
///
/// The reflection coefficients are drawn first and the noise second, so
/// two calls from identically seeded generators share `β` and `Z_s`
/// regardless of `X`.
pub fn simulate_echoes<R: Rng + ?Sized>(
    responses: &SensingResponses,
    scene: &SensingScene,
    x: &CMat,
    sigma_s_sq: f64,
    rng: &mut R,
) -> Result<CMat> {
    if scene.is_empty() || responses.len() != scene.len() {
        return Err(Error::Shape(format!(
            "{} responses for {} objects",
            responses.len(),
            scene.len()
        )));
    }
    let n = responses.objects[0].g_t.len();
    if x.nrows() != n {
        return Err(Error::Shape(format!(
            "transmit block has {} rows, expected {n}",
            x.nrows()
        )));
    }
    let betas: Vec<C64> = scene
        .objects
        .iter()
        .map(|o| complex_normal(rng) * o.alpha)
        .collect();
    let mut y = CMat::zeros(n, x.ncols());
    for (resp, beta) in responses.objects.iter().zip(&betas) {
        if *beta == linalg::ZERO {
            continue;
        }
        let proj = resp.g_t.adjoint() * x;
        y += (&resp.g_r * proj) * *beta;
    }
    let sigma = sigma_s_sq.sqrt();
    let noise = linalg::complex_normal_matrix(n, x.ncols(), rng);
    if sigma > 0.0 {
        y += noise * real(sigma);
    }
    Ok(y)
}

/// Row-major `[[re, im], …]` dump.
pub fn matrix_to_json(m: &CMat) -> Value {
    let mut data = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            data.push(json!([z.re, z.im]));
        }
    }
    json!({ "rows": m.nrows(), "cols": m.ncols(), "data": data })
}

pub fn vector_to_json(v: &CVec) -> Value {
    Value::Array(v.iter().map(|z| json!([z.re, z.im])).collect())
}

pub fn matrix_from_json(value: &Value) -> Result<CMat> {
    let bad = |what: &str| Error::Parse(format!("matrix dump: {what}"));
    let rows = value["rows"].as_u64().ok_or_else(|| bad("missing rows"))? as usize;
    let cols = value["cols"].as_u64().ok_or_else(|| bad("missing cols"))? as usize;
    let data = value["data"]
        .as_array()
        .ok_or_else(|| bad("missing data"))?;
    if data.len() != rows * cols {
        return Err(bad("entry count does not match shape"));
    }
    let mut m = CMat::zeros(rows, cols);
    for (idx, entry) in data.iter().enumerate() {
        let re = entry[0].as_f64().ok_or_else(|| bad("non-numeric entry"))?;
        let im = entry[1].as_f64().ok_or_else(|| bad("non-numeric entry"))?;
        m[(idx / cols, idx % cols)] = C64::new(re, im);
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_geometry;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn desk() -> (ScenarioConfig, ArrayGeometry) {
        let c = ScenarioConfig::desk_default();
        let g = build_geometry(&c).unwrap();
        (c, g)
    }

    #[test]
    fn single_path_is_los() {
        let (mut c, g) = desk();
        c.paths = 1;
        let p = draw_paths(&c, &g, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].kind, PathKind::LoS);
        assert!(p[0].scatterer.is_none());
    }

    #[test]
    fn zero_paths_is_config_error() {
        let (mut c, g) = desk();
        c.paths = 0;
        let err = draw_paths(&c, &g, &mut ChaCha8Rng::seed_from_u64(1)).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }

    #[test]
    fn drawn_paths_are_deterministic_and_in_region() {
        let (mut c, g) = desk();
        c.paths = 4;
        let a = draw_paths(&c, &g, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = draw_paths(&c, &g, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        let scat: Vec<PolarPoint> = a.iter().filter_map(|p| p.scatterer).collect();
        assert_eq!(scat.len(), 3);
        for s in scat {
            assert!((5.0..=30.0).contains(&s.r));
            assert!(s.theta.abs() <= 60f64.to_radians() + 1e-15);
        }
    }

    #[test]
    fn unit_gain_single_subarray_outer_product() {
        let (mut c, _) = desk();
        c.subarrays = 1;
        let g = build_geometry(&c).unwrap();
        let mut p = PathSpec::trace(&g, c.user, None, 1.0, 0.0).unwrap();
        p.gain_magnitude = vec![1.0];
        let ch = build_comm_channel(&g, vec![p], 4).unwrap();
        assert_eq!(numerical_rank(&ch.h, RANK_TOL), 1);
        assert!((ch.h.norm() - (4.0f64 * 8.0).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn rank_bound_examples() {
        assert_eq!(rank_bounds(1, 16, 6), (1, 6));
        assert_eq!(rank_bounds(4, 16, 6), (4, 16));
        assert_eq!(rank_bounds(4, 2, 6), (2, 2));
    }

    #[test]
    fn numerical_rank_examples() {
        assert_eq!(numerical_rank(&CMat::identity(3, 3), RANK_TOL), 3);
        assert_eq!(numerical_rank(&CMat::zeros(3, 4), RANK_TOL), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = linalg::complex_normal_matrix(5, 1, &mut rng);
        let v = linalg::complex_normal_matrix(4, 1, &mut rng);
        assert_eq!(numerical_rank(&(u * v.adjoint()), RANK_TOL), 1);
    }

    #[test]
    fn response_matches_elementwise_formula() {
        let (mut c, _) = desk();
        c.subarrays = 3;
        let g = build_geometry(&c).unwrap();
        let q = PolarPoint::new(20.0, FRAC_PI_4);
        let resp = sensing_response(&g, q).unwrap();
        let qp = q.to_cartesian();
        for k in 0..3 {
            let r = g.tx_positions[k][0];
            let dist = ((qp.x - r.x).powi(2) + (qp.y - r.y).powi(2)).sqrt();
            let sin_phi = (qp.x - r.x) / dist;
            for m in 0..8 {
                let phase = -2.0 * PI / g.lambda * (dist + m as f64 * g.d * sin_phi);
                let z = resp.g_t[k * 8 + m];
                assert!((z - cis(phase)).norm() < 1e-8, "k={k} m={m}");
            }
        }
        assert!(resp
            .g_t
            .iter()
            .chain(resp.g_r.iter())
            .all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn single_subarray_response_is_steering_vector() {
        let (mut c, _) = desk();
        c.subarrays = 1;
        let g = build_geometry(&c).unwrap();
        let q = PolarPoint::new(12.0, 0.2);
        let resp = sensing_response(&g, q).unwrap();
        let a = steering_vector(8, resp.phi_t[0], g.d, g.lambda);
        assert!((&resp.g_t - a * resp.nu_t[0]).norm() < 1e-12);
    }

    #[test]
    fn silent_scene_gives_zero_echo() {
        let (mut c, g) = desk();
        c.target.alpha = 0.0;
        for o in &mut c.interferers {
            o.alpha = 0.0;
        }
        let scene = SensingScene::from_config(&c);
        let resp = sensing_responses(&g, &scene).unwrap();
        let x = CMat::identity(32, 5);
        let y = simulate_echoes(&resp, &scene, &x, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(y.norm(), 0.0);
    }

    #[test]
    fn noiseless_single_object_echo_is_rank_one() {
        let (c, g) = desk();
        let scene = SensingScene {
            objects: vec![c.target],
        };
        let resp = sensing_responses(&g, &scene).unwrap();
        let g_t = &resp.objects[0].g_t;
        let x = g_t * CMat::from_element(1, 6, linalg::ONE);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y = simulate_echoes(&resp, &scene, &x, 0.0, &mut rng).unwrap();
        let beta = complex_normal(&mut ChaCha8Rng::seed_from_u64(5)) * c.target.alpha;
        let expected = &resp.objects[0].g_r * CMat::from_element(1, 6, beta * 32.0);
        assert!((&y - &expected).norm() < 1e-12 * expected.norm().max(1.0));
        assert_eq!(numerical_rank(&y, RANK_TOL), 1);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let (c, g) = desk();
        let scene = SensingScene::from_config(&c);
        let resp = sensing_responses(&g, &scene).unwrap();
        let x = CMat::zeros(31, 2);
        let err = simulate_echoes(&resp, &scene, &x, 1.0, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(err, Err(Error::Shape(_))));
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = linalg::complex_normal_matrix(3, 4, &mut rng);
        let back = matrix_from_json(&matrix_to_json(&m)).unwrap();
        assert_eq!(m, back);
    }
}
