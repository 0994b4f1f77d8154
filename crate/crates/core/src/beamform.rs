//! Hybrid beamformer types, performance metrics and the reduced subspace.
//!
//! The analog stage is block diagonal: subarray `k` drives its own
//! `M_RF = Q + N_p` chains whose phase profiles are the steering vectors
//! toward every sensing object and every communication path, seen from
//! that subarray. Everything downstream is expressed in those coordinates.

use crate::channel::{CommChannel, SensingResponses, SensingScene};
use crate::error::{Error, Result};
use crate::geometry::{steering_vector, ArrayGeometry};
use crate::linalg::{self, log_det_hpd, real, trace_re, CMat, CVec, C64};

/// Relative singular-value cutoff for pseudo-inverses on the basis.
pub const PINV_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct HybridBeamformer {
    /// `N × N_RF`, block diagonal.
    pub w_rf: CMat,
    /// `N_RF × N_s`.
    pub w_bb: CMat,
    pub m_rf: usize,
}

impl HybridBeamformer {
    pub fn n_rf(&self) -> usize {
        self.w_rf.ncols()
    }

    /// `R_X = W_RF W_BB W_BB^H W_RF^H`.
    pub fn covariance(&self) -> CMat {
        let f = &self.w_rf * &self.w_bb;
        &f * f.adjoint()
    }

    pub fn power(&self, antennas_per_subarray: usize) -> TransmitPower {
        transmit_power(&self.w_rf, &self.w_bb, antennas_per_subarray)
    }
}

#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    /// `[Ā_t0, …, Ā_t(Q−1), Ã_c]`, `N × K(Q+N_p)`.
    pub u: CMat,
    /// Block-diagonal reordering of `u`.
    pub u_tilde: CMat,
    /// `A_kk`, one `M × (Q+N_p)` block per subarray.
    pub a_blocks: Vec<CMat>,
    /// Column `j` of `u_tilde` is column `permutation[j]` of `u`.
    pub permutation: Vec<usize>,
    pub objects: usize,
    pub paths: usize,
    pub subarrays: usize,
    pub antennas_per_subarray: usize,
}

impl SubspaceBasis {
    pub fn m_rf(&self) -> usize {
        self.objects + self.paths
    }

    pub fn n_rf(&self) -> usize {
        self.subarrays * self.m_rf()
    }

    /// `U·P` computed from the stored permutation.
    pub fn permuted(&self) -> CMat {
        let mut out = CMat::zeros(self.u.nrows(), self.u.ncols());
        for (j, &src) in self.permutation.iter().enumerate() {
            out.set_column(j, &self.u.column(src));
        }
        out
    }

    /// Pairs of columns within one block whose normalized overlap exceeds
    /// `1 − 1e−10`; such blocks make the basis ill-conditioned.
    pub fn near_duplicate_columns(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        let m = self.antennas_per_subarray as f64;
        for (k, a) in self.a_blocks.iter().enumerate() {
            for i in 0..a.ncols() {
                for j in i + 1..a.ncols() {
                    let overlap = a.column(i).dotc(&a.column(j)).norm() / m;
                    if overlap > 1.0 - 1e-10 {
                        out.push((k, i, j));
                    }
                }
            }
        }
        out
    }
}

/// Builds `U` and its block-diagonal permutation `Ũ`. Only the
/// `analog_paths` strongest paths (by mean gain) contribute columns.
pub fn build_subspace(
    geometry: &ArrayGeometry,
    comm: &CommChannel,
    responses: &SensingResponses,
    analog_paths: usize,
) -> Result<SubspaceBasis> {
    let k_count = geometry.subarrays();
    let m = geometry.antennas_per_subarray();
    let n = k_count * m;
    let q_count = responses.len();
    if analog_paths == 0 || analog_paths > comm.paths.len() {
        return Err(Error::config(
            "channel.analog_paths",
            format!("{analog_paths} requested, {} available", comm.paths.len()),
        ));
    }
    let mut order: Vec<usize> = (0..comm.paths.len()).collect();
    let mean_gain = |p: usize| {
        let g = &comm.paths[p].gain_magnitude;
        g.iter().sum::<f64>() / g.len() as f64
    };
    order.sort_by(|&a, &b| mean_gain(b).total_cmp(&mean_gain(a)).then(a.cmp(&b)));
    order.truncate(analog_paths);
    order.sort_unstable();

    let m_rf = q_count + analog_paths;
    let mut u = CMat::zeros(n, k_count * m_rf);
    let mut a_blocks = vec![CMat::zeros(m, m_rf); k_count];
    for (k, block) in a_blocks.iter_mut().enumerate() {
        for (q, obj) in responses.objects.iter().enumerate() {
            let a = steering_vector(m, obj.phi_t[k], geometry.d, geometry.lambda);
            u.view_mut((k * m, q * k_count + k), (m, 1)).copy_from(&a);
            block.set_column(q, &a);
        }
        for (slot, &p) in order.iter().enumerate() {
            let a = steering_vector(m, comm.paths[p].aod[k], geometry.d, geometry.lambda);
            let col = q_count * k_count + slot * k_count + k;
            u.view_mut((k * m, col), (m, 1)).copy_from(&a);
            block.set_column(q_count + slot, &a);
        }
    }
    let mut permutation = Vec::with_capacity(k_count * m_rf);
    for k in 0..k_count {
        for j in 0..m_rf {
            let src = if j < q_count {
                j * k_count + k
            } else {
                q_count * k_count + (j - q_count) * k_count + k
            };
            permutation.push(src);
        }
    }
    let mut u_tilde = CMat::zeros(n, k_count * m_rf);
    for (k, a) in a_blocks.iter().enumerate() {
        u_tilde.view_mut((k * m, k * m_rf), (m, m_rf)).copy_from(a);
    }
    Ok(SubspaceBasis {
        u,
        u_tilde,
        a_blocks,
        permutation,
        objects: q_count,
        paths: analog_paths,
        subarrays: k_count,
        antennas_per_subarray: m,
    })
}

/// The optimal analog beamformer is the block-diagonal basis itself.
pub fn optimal_analog(basis: &SubspaceBasis) -> CMat {
    basis.u_tilde.clone()
}

fn ensure_finite(name: &str, a: &CMat) -> Result<()> {
    if linalg::all_finite(a) {
        Ok(())
    } else {
        Err(Error::NonFinite(name.into()))
    }
}

/// `log₂ det(I + H W_RF W_BB W_BB^H W_RF^H H^H / σ_c²)`, evaluated on the
/// `N_s × N_s` side.
pub fn spectral_efficiency(h: &CMat, w_rf: &CMat, w_bb: &CMat, sigma_c_sq: f64) -> Result<f64> {
    ensure_finite("channel", h)?;
    ensure_finite("analog beamformer", w_rf)?;
    ensure_finite("digital beamformer", w_bb)?;
    if h.ncols() != w_rf.nrows() || w_rf.ncols() != w_bb.nrows() {
        return Err(Error::Shape(format!(
            "H is {}x{}, W_RF is {}x{}, W_BB is {}x{}",
            h.nrows(),
            h.ncols(),
            w_rf.nrows(),
            w_rf.ncols(),
            w_bb.nrows(),
            w_bb.ncols()
        )));
    }
    let f = h * w_rf * w_bb;
    gram_log2_det(&f, sigma_c_sq)
}

/// `log₂ det(I + F^H F / σ²)`.
fn gram_log2_det(f: &CMat, sigma_sq: f64) -> Result<f64> {
    if !(sigma_sq > 0.0) {
        return Err(Error::ZeroDenominator("communication noise power".into()));
    }
    let s = f.ncols();
    let gram = f.adjoint() * f / real(sigma_sq) + CMat::identity(s, s);
    let nats = log_det_hpd(&gram).ok_or_else(|| Error::NonFinite("SE Gram matrix".into()))?;
    Ok((nats / std::f64::consts::LN_2).max(0.0))
}

/// SE of an arbitrary transmit covariance, `log₂ det(I + H R H^H / σ²)`.
pub fn spectral_efficiency_cov(h: &CMat, r: &CMat, sigma_c_sq: f64) -> Result<f64> {
    if !(sigma_c_sq > 0.0) {
        return Err(Error::ZeroDenominator("communication noise power".into()));
    }
    ensure_finite("covariance", r)?;
    let nc = h.nrows();
    let m = CMat::identity(nc, nc) + h * r * h.adjoint() / real(sigma_c_sq);
    let nats = log_det_hpd(&m).ok_or_else(|| Error::NonFinite("covariance SE matrix".into()))?;
    Ok((nats / std::f64::consts::LN_2).max(0.0))
}

/// `w^H G_q R_X G_q^H w = α_q² |w^H g_rq|² g_tq^H R_X g_tq`.
fn echo_power(w: &CVec, g_t: &CVec, g_r: &CVec, alpha: f64, r_x: &CMat) -> f64 {
    let gain = w.dotc(g_r).norm_sqr();
    let tx = g_t.dotc(&(r_x * g_t)).re;
    alpha * alpha * gain * tx
}

fn check_scene(responses: &SensingResponses, scene: &SensingScene, r_x: &CMat) -> Result<usize> {
    if scene.is_empty() || responses.len() != scene.len() {
        return Err(Error::Shape(format!(
            "{} responses for {} objects",
            responses.len(),
            scene.len()
        )));
    }
    let n = responses.objects[0].g_t.len();
    if r_x.nrows() != n || r_x.ncols() != n {
        return Err(Error::Shape(format!("R_X must be {n}x{n}")));
    }
    Ok(n)
}

/// Output SCNR of receive filter `w` for transmit covariance `R_X`.
pub fn scnr(
    w: &CVec,
    responses: &SensingResponses,
    scene: &SensingScene,
    r_x: &CMat,
    sigma_s_sq: f64,
) -> Result<f64> {
    check_scene(responses, scene, r_x)?;
    let o = &responses.objects;
    let num = echo_power(w, &o[0].g_t, &o[0].g_r, scene.alpha(0), r_x);
    let mut den = sigma_s_sq * w.norm_squared();
    for (q, obj) in o.iter().enumerate().skip(1) {
        den += echo_power(w, &obj.g_t, &obj.g_r, scene.alpha(q), r_x);
    }
    if den <= 0.0 {
        if num == 0.0 {
            return Ok(0.0);
        }
        return Err(Error::ZeroDenominator(
            "SCNR clutter-plus-noise power".into(),
        ));
    }
    Ok((num / den).max(0.0))
}

/// Minimum-variance distortionless receive filter.
pub fn mvdr_receive(
    responses: &SensingResponses,
    scene: &SensingScene,
    r_x: &CMat,
    sigma_s_sq: f64,
) -> Result<CVec> {
    let n = check_scene(responses, scene, r_x)?;
    if !(sigma_s_sq > 0.0) {
        return Err(Error::ZeroDenominator(
            "sensing noise power must be positive".into(),
        ));
    }
    let mut c = CMat::identity(n, n) * real(sigma_s_sq);
    for q in 1..responses.len() {
        let o = &responses.objects[q];
        let a2 = scene.alpha(q).powi(2);
        let tx = o.g_t.dotc(&(r_x * &o.g_t)).re;
        c += (&o.g_r * o.g_r.adjoint()) * real(a2 * tx);
    }
    let g0 = &responses.objects[0].g_r;
    let chol = linalg::hermitian_part(&c)
        .cholesky()
        .ok_or_else(|| Error::NonFinite("clutter covariance is not positive definite".into()))?;
    let x = chol.solve(g0);
    let denom = g0.dotc(&x);
    if denom.norm() == 0.0 {
        return Err(Error::ZeroDenominator("MVDR normalization".into()));
    }
    Ok(x / denom)
}

/// Per-object sensing matrices in RF-chain coordinates.
#[derive(Debug, Clone)]
pub struct PhiSet {
    /// `Φ_q = |w^H g_rq|²·(Ũ^H g_tq)(Ũ^H g_tq)^H`.
    pub phi: Vec<CMat>,
    /// `Γ_s σ_s² ‖w‖²`.
    pub gamma_0: f64,
}

/// The SCNR requirement as a linear constraint `tr(W^H Ψ W) ≥ Γ_0`.
#[derive(Debug, Clone)]
pub struct SensingConstraint {
    pub psi: CMat,
    pub gamma_0: f64,
}

impl SensingConstraint {
    /// `Γ_0 = 0` means no sensing requirement at all.
    pub fn is_active(&self) -> bool {
        self.gamma_0 > 0.0
    }
}

impl PhiSet {
    pub fn constraint(&self, scene: &SensingScene, scnr_threshold: f64) -> SensingConstraint {
        SensingConstraint {
            psi: self.sensing_form(scene, scnr_threshold),
            gamma_0: self.gamma_0,
        }
    }

    /// `Ψ = α_0² Φ_0 − Γ_s Σ_{q≥1} α_q² Φ_q`.
    pub fn sensing_form(&self, scene: &SensingScene, scnr_threshold: f64) -> CMat {
        let mut psi = &self.phi[0] * real(scene.alpha(0).powi(2));
        for q in 1..self.phi.len() {
            psi -= &self.phi[q] * real(scnr_threshold * scene.alpha(q).powi(2));
        }
        linalg::hermitian_part(&psi)
    }
}

pub fn phi_matrices(
    basis: &SubspaceBasis,
    responses: &SensingResponses,
    w: &CVec,
    scnr_threshold: f64,
    sigma_s_sq: f64,
) -> PhiSet {
    let phi = responses
        .objects
        .iter()
        .map(|o| {
            let v = basis.u_tilde.adjoint() * &o.g_t;
            let c = w.dotc(&o.g_r).norm_sqr();
            (&v * v.adjoint()) * real(c)
        })
        .collect();
    PhiSet {
        phi,
        gamma_0: scnr_threshold * sigma_s_sq * w.norm_squared(),
    }
}

/// SCNR evaluated with `Φ_q` and the digital beamformer only.
pub fn reduced_scnr(
    w_bb: &CMat,
    phi: &PhiSet,
    scene: &SensingScene,
    w: &CVec,
    sigma_s_sq: f64,
) -> f64 {
    let form = |q: usize| trace_re(&(w_bb.adjoint() * &phi.phi[q] * w_bb)) * scene.alpha(q).powi(2);
    let num = form(0);
    let den: f64 = (1..phi.phi.len()).map(form).sum::<f64>() + sigma_s_sq * w.norm_squared();
    num / den
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmitPower {
    /// `‖W_RF W_BB‖_F²`.
    pub exact: f64,
    /// `M·‖W_BB‖_F²`.
    pub proxy: f64,
}

pub fn transmit_power(w_rf: &CMat, w_bb: &CMat, antennas_per_subarray: usize) -> TransmitPower {
    TransmitPower {
        exact: linalg::frob2(&(w_rf * w_bb)),
        proxy: antennas_per_subarray as f64 * linalg::frob2(w_bb),
    }
}

/// `‖P⊥ R P⊥‖_F / ‖R‖_F` with `P⊥` the projector off `col(Ũ)`.
pub fn verify_covariance_subspace(r_x: &CMat, u_tilde: &CMat) -> f64 {
    let norm = r_x.norm();
    if norm == 0.0 {
        return 0.0;
    }
    let n = r_x.nrows();
    let p_perp = CMat::identity(n, n) - linalg::column_projector(u_tilde, PINV_CUTOFF);
    (&p_perp * r_x * &p_perp).norm() / norm
}

/// Least-squares residual of `v` against `col(a)`, relative to `‖v‖`.
pub fn column_space_residual(a: &CMat, v: &CVec) -> f64 {
    let q = linalg::column_basis(a, PINV_CUTOFF);
    let proj = &q * (q.adjoint() * v);
    (v - proj).norm() / v.norm().max(f64::MIN_POSITIVE)
}

/// Transmit covariance in full coordinates from a reduced one.
pub fn lift_covariance(u_tilde: &CMat, r_bb: &CMat) -> CMat {
    u_tilde * r_bb * u_tilde.adjoint()
}

/// `Σ` of the MVDR filter: clutter covariance at the receiver.
pub fn clutter_covariance(responses: &SensingResponses, scene: &SensingScene, r_x: &CMat) -> CMat {
    let n = responses.objects[0].g_r.len();
    let mut c = CMat::zeros(n, n);
    for q in 1..responses.len() {
        let o = &responses.objects[q];
        let tx: C64 = o.g_t.dotc(&(r_x * &o.g_t));
        c += (&o.g_r * o.g_r.adjoint()) * (tx * scene.alpha(q).powi(2));
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_comm_channel, draw_paths, sensing_responses};
    use crate::config::ScenarioConfig;
    use crate::geometry::build_geometry;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Fixture {
        geometry: ArrayGeometry,
        comm: CommChannel,
        scene: SensingScene,
        responses: SensingResponses,
        basis: SubspaceBasis,
    }

    fn fixture(c: &ScenarioConfig) -> Fixture {
        let geometry = build_geometry(c).unwrap();
        let paths = draw_paths(c, &geometry, &mut ChaCha8Rng::seed_from_u64(c.seed)).unwrap();
        let comm = build_comm_channel(&geometry, paths, c.user_antennas).unwrap();
        let scene = SensingScene::from_config(c);
        let responses = sensing_responses(&geometry, &scene).unwrap();
        let basis = build_subspace(&geometry, &comm, &responses, c.paths).unwrap();
        Fixture {
            geometry,
            comm,
            scene,
            responses,
            basis,
        }
    }

    #[test]
    fn minimal_basis_layout() {
        let mut c = ScenarioConfig::desk_default();
        c.subarrays = 1;
        c.paths = 1;
        c.interferers.clear();
        let f = fixture(&c);
        assert_eq!(f.basis.u_tilde.shape(), (8, 2));
        assert!(f
            .basis
            .u_tilde
            .iter()
            .all(|z| (z.norm() - 1.0).abs() < 1e-12));
        assert_eq!(f.basis.permuted(), f.basis.u_tilde);
    }

    #[test]
    fn basis_contains_responses_and_channel() {
        let c = ScenarioConfig::desk_default();
        let f = fixture(&c);
        assert_eq!(f.basis.permuted(), f.basis.u_tilde);
        for o in &f.responses.objects {
            assert!(column_space_residual(&f.basis.u, &o.g_t) < 1e-10);
        }
        let svd = f.comm.svd();
        for i in 0..f.comm.rank() {
            let v = svd.v.column(i).into_owned();
            assert!(column_space_residual(&f.basis.u, &v) < 1e-8);
        }
    }

    #[test]
    fn analog_is_block_diagonal_unit_modulus() {
        let f = fixture(&ScenarioConfig::desk_default());
        let w = optimal_analog(&f.basis);
        assert_eq!(w, f.basis.u_tilde);
        let (m, m_rf) = (8, f.basis.m_rf());
        for i in 0..w.nrows() {
            for j in 0..w.ncols() {
                let on_block = i / m == j / m_rf;
                if on_block {
                    assert!((w[(i, j)].norm() - 1.0).abs() < 1e-12);
                } else {
                    assert_eq!(w[(i, j)], linalg::ZERO);
                }
            }
        }
        let _ = &f.geometry;
    }

    #[test]
    fn se_examples() {
        let f = fixture(&ScenarioConfig::desk_default());
        let w_rf = optimal_analog(&f.basis);
        let zero = CMat::zeros(w_rf.ncols(), 2);
        assert_eq!(
            spectral_efficiency(&f.comm.h, &w_rf, &zero, 1e-6).unwrap(),
            0.0
        );

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = linalg::complex_normal_matrix(1, 6, &mut rng);
        let w = h.adjoint() / real(h.norm());
        let se = spectral_efficiency(&h, &CMat::identity(6, 6), &w, 0.5).unwrap();
        let expected = (1.0 + (&h * &w).norm_squared() / 0.5).log2();
        assert!((se - expected).abs() < 1e-12);
    }

    #[test]
    fn scnr_examples() {
        let mut c = ScenarioConfig::desk_default();
        c.interferers.clear();
        let f = fixture(&c);
        let n = 32;
        let g_r = &f.responses.objects[0].g_r;
        let w = g_r / real(g_r.norm_squared());
        assert_eq!(
            scnr(&w, &f.responses, &f.scene, &CMat::zeros(n, n), 1e-5).unwrap(),
            0.0
        );

        // Independent arithmetic: numerator α²|w^H g_r|²‖g_t‖² for R = I.
        let s = scnr(&w, &f.responses, &f.scene, &CMat::identity(n, n), 1e-5).unwrap();
        let a = c.target.alpha;
        let expected = a * a * 32.0 / (1e-5 / 32.0);
        assert!((s - expected).abs() < 1e-9 * expected);

        let mut prev = 0.0;
        for scale in [1.0, 2.0, 4.0] {
            let r = CMat::identity(n, n) * real(scale);
            let s = scnr(&w, &f.responses, &f.scene, &r, 1e-5).unwrap();
            assert!(s > prev);
            prev = s;
        }
    }

    #[test]
    fn scnr_without_noise_or_clutter_is_zero_denominator() {
        let mut c = ScenarioConfig::desk_default();
        c.interferers.clear();
        let f = fixture(&c);
        let w = f.responses.objects[0].g_r.clone();
        let err = scnr(&w, &f.responses, &f.scene, &CMat::identity(32, 32), 0.0);
        assert!(matches!(err, Err(Error::ZeroDenominator(_))));
    }

    #[test]
    fn mvdr_without_interferers_is_matched_filter() {
        let mut c = ScenarioConfig::desk_default();
        c.interferers.clear();
        let f = fixture(&c);
        let w = mvdr_receive(&f.responses, &f.scene, &CMat::identity(32, 32), 1e-5).unwrap();
        let g = &f.responses.objects[0].g_r;
        assert!((w - g / real(g.norm_squared())).norm() < 1e-12);
    }

    #[test]
    fn phi_examples() {
        let f = fixture(&ScenarioConfig::desk_default());
        let g_r = &f.responses.objects[0].g_r;
        // A vector orthogonal to g_r0.
        let mut w = f.responses.objects[1].g_r.clone();
        let proj = g_r.dotc(&w) / real(g_r.norm_squared());
        w -= g_r * proj;
        let set = phi_matrices(&f.basis, &f.responses, &w, 10.0, 1e-5);
        assert!(set.phi[0].norm() < 1e-18 * set.phi[1].norm().max(1.0));

        let w = mvdr_receive(&f.responses, &f.scene, &CMat::identity(32, 32), 1e-5).unwrap();
        let set = phi_matrices(&f.basis, &f.responses, &w, 10.0, 1e-5);
        for (q, o) in f.responses.objects.iter().enumerate() {
            let expected =
                w.dotc(&o.g_r).norm_sqr() * (f.basis.u_tilde.adjoint() * &o.g_t).norm_squared();
            assert!((trace_re(&set.phi[q]) - expected).abs() < 1e-9 * expected);
        }
        assert!((set.gamma_0 - 10.0 * 1e-5 * w.norm_squared()).abs() < 1e-20);
    }

    #[test]
    fn power_examples() {
        let f = fixture(&ScenarioConfig::desk_default());
        let w_rf = optimal_analog(&f.basis);
        let zero = CMat::zeros(w_rf.ncols(), 3);
        let p = transmit_power(&w_rf, &zero, 8);
        assert_eq!((p.exact, p.proxy), (0.0, 0.0));

        // DFT columns are orthogonal so the proxy is exact.
        let m = 8;
        let dft = CMat::from_fn(m, m, |i, j| {
            linalg::cis(-2.0 * std::f64::consts::PI * (i * j) as f64 / m as f64)
        });
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w_bb = linalg::complex_normal_matrix(m, 3, &mut rng);
        let p = transmit_power(&dft, &w_bb, m);
        assert!((p.exact - p.proxy).abs() < 1e-9 * p.proxy);

        let w_bb = linalg::complex_normal_matrix(w_rf.ncols(), 3, &mut rng);
        let p = transmit_power(&w_rf, &w_bb, m);
        assert!((p.exact - p.proxy).abs() > 1e-6 * p.proxy);
    }

    #[test]
    fn subspace_residual_examples() {
        let f = fixture(&ScenarioConfig::desk_default());
        let ut = &f.basis.u_tilde;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = linalg::complex_normal_matrix(ut.ncols(), ut.ncols(), &mut rng);
        let r = lift_covariance(ut, &(&g * g.adjoint()));
        assert!(verify_covariance_subspace(&r, ut) < 1e-10);
        assert!(verify_covariance_subspace(&CMat::identity(32, 32), ut) > 0.1);
    }
}
