//! Semidefinite relaxation with Gaussian randomization.
//!
//! The rank constraint on `R_BB = W_BB W_BB^H` is dropped, leaving a
//! max-det problem over Hermitian PSD matrices with a trace budget and one
//! linear SCNR constraint. It is solved with a log-barrier Newton method in
//! real coordinates of Hermitian matrices, then a rank-`N_s` beamformer is
//! recovered by random projection of the optimal covariance.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::beamform::SensingConstraint;
use crate::error::{Error, Result};
use crate::linalg::{self, eigh_desc, log_det_hpd, real, trace_re, CMat, C64};

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone)]
pub struct MaxDetProblem {
    /// `H_c Ũ`, `N_c × N_RF`.
    pub h_eff: CMat,
    pub sigma_c_sq: f64,
    pub power_budget: f64,
    /// Weight `W_p` of the power constraint `tr(W_p R) ≤ budget`; `None`
    /// is the identity (the per-chain proxy).
    pub power_weight: Option<CMat>,
    pub sensing: SensingConstraint,
    pub streams: usize,
}

impl MaxDetProblem {
    pub fn dim(&self) -> usize {
        self.h_eff.ncols()
    }

    fn weight(&self) -> CMat {
        match &self.power_weight {
            Some(w) => linalg::hermitian_part(w),
            None => CMat::identity(self.dim(), self.dim()),
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.sensing.psi.shape() != (n, n) {
            return Err(Error::Shape(format!("Ψ must be {n}x{n}")));
        }
        if let Some(w) = &self.power_weight {
            if w.shape() != (n, n) {
                return Err(Error::Shape(format!("power weight must be {n}x{n}")));
            }
        }
        if !(self.sigma_c_sq > 0.0) {
            return Err(Error::ZeroDenominator("communication noise power".into()));
        }
        if !(self.power_budget >= 0.0 && self.power_budget.is_finite()) {
            return Err(Error::Domain(format!("power budget {}", self.power_budget)));
        }
        if !linalg::all_finite(&self.h_eff) || !linalg::all_finite(&self.sensing.psi) {
            return Err(Error::NonFinite("problem data".into()));
        }
        Ok(())
    }

    /// SE in bits of a covariance in RF-chain coordinates.
    pub fn se_bits(&self, r: &CMat) -> f64 {
        let a = &self.h_eff / real(self.sigma_c_sq.sqrt());
        let nc = a.nrows();
        let m = CMat::identity(nc, nc) + &a * r * a.adjoint();
        log_det_hpd(&m).map_or(f64::NAN, |v| v / std::f64::consts::LN_2)
    }

    /// SE in bits of a beamformer, via the `N_s × N_s` Gram form.
    pub fn se_bits_beamformer(&self, w: &CMat) -> f64 {
        let f = &self.h_eff * w / real(self.sigma_c_sq.sqrt());
        let s = f.ncols();
        let g = f.adjoint() * &f + CMat::identity(s, s);
        log_det_hpd(&g).map_or(f64::NAN, |v| v / std::f64::consts::LN_2)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible { constraint: String },
    MaxIter,
}

impl SdpStatus {
    pub fn name(&self) -> &'static str {
        match self {
            SdpStatus::Optimal => "optimal",
            SdpStatus::Infeasible { .. } => "infeasible",
            SdpStatus::MaxIter => "max_iter",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverDiagnostic {
    pub outer_t: f64,
    pub inner_iter: usize,
    pub objective: f64,
    pub gap_surrogate: f64,
    pub min_eig: f64,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    /// Cleaned optimum: negligible eigenvalues dropped, power made tight.
    pub r_bb: CMat,
    /// Last central-path iterate before cleaning.
    pub r_bb_interior: CMat,
    pub objective_nats: f64,
    pub objective_bits: f64,
    pub kkt_residual: f64,
    pub status: SdpStatus,
    pub diagnostics: Vec<SolverDiagnostic>,
}

/// Real coordinates of a Hermitian matrix: diagonal entries, then
/// `√2·Re`, `√2·Im` of each upper-triangular entry. The map is an isometry
/// for `⟨A, B⟩ = Re tr(A^H B)`.
#[derive(Debug, Clone)]
struct HermCoords {
    n: usize,
    /// `(i, j, kind)`: kind 0 diagonal, 1 real part, 2 imaginary part.
    index: Vec<(usize, usize, u8)>,
    /// Basis matrix `l` as `Σ c·e_a e_bᵀ` over its two `(a, b, c)` terms.
    terms: Vec<[(usize, usize, C64); 2]>,
}

impl HermCoords {
    fn new(n: usize) -> Self {
        let mut index = Vec::with_capacity(n * n);
        for i in 0..n {
            index.push((i, i, 0));
        }
        for i in 0..n {
            for j in i + 1..n {
                index.push((i, j, 1));
                index.push((i, j, 2));
            }
        }
        let h = 1.0 / SQRT2;
        let terms = index
            .iter()
            .map(|&(i, j, kind)| match kind {
                0 => [(i, i, real(1.0)), (i, i, real(0.0))],
                1 => [(i, j, real(h)), (j, i, real(h))],
                _ => [(i, j, C64::new(0.0, h)), (j, i, C64::new(0.0, -h))],
            })
            .collect();
        HermCoords { n, index, terms }
    }

    fn dim(&self) -> usize {
        self.index.len()
    }

    fn to_vec(&self, a: &CMat) -> Vec<f64> {
        self.index
            .iter()
            .map(|&(i, j, kind)| match kind {
                0 => a[(i, i)].re,
                1 => SQRT2 * 0.5 * (a[(i, j)] + a[(j, i)].conj()).re,
                _ => SQRT2 * 0.5 * (a[(i, j)] + a[(j, i)].conj()).im,
            })
            .collect()
    }

    fn to_mat(&self, y: &[f64]) -> CMat {
        let mut a = CMat::zeros(self.n, self.n);
        for (&(i, j, kind), &v) in self.index.iter().zip(y) {
            match kind {
                0 => a[(i, i)] = real(v),
                1 => {
                    a[(i, j)].re = v / SQRT2;
                    a[(j, i)].re = v / SQRT2;
                }
                _ => {
                    a[(i, j)].im = v / SQRT2;
                    a[(j, i)].im = -v / SQRT2;
                }
            }
        }
        a
    }

    /// `X E_l X` for Hermitian `X` and basis element `l`.
    #[cfg(test)]
    fn sandwich(&self, x: &CMat, l: usize) -> CMat {
        let (i, j, kind) = self.index[l];
        let xi = x.column(i);
        match kind {
            0 => xi * xi.adjoint(),
            _ => {
                let xj = x.column(j);
                let outer = xi * xj.adjoint();
                let scale = 1.0 / SQRT2;
                if kind == 1 {
                    (&outer + outer.adjoint()) * real(scale)
                } else {
                    (&outer - outer.adjoint()) * C64::new(0.0, scale)
                }
            }
        }
    }
}

/// Barrier state at one point.
struct Eval {
    value: f64,
    grad: Vec<f64>,
    g_mat: CMat,
    s_mat: CMat,
    slack_power: f64,
    slack_sensing: f64,
}

struct Barrier<'a> {
    coords: HermCoords,
    a: CMat,
    weight: CMat,
    weight_vec: Vec<f64>,
    psi: &'a CMat,
    psi_vec: Vec<f64>,
    gamma_0: f64,
    budget: f64,
    sensing: bool,
}

impl<'a> Barrier<'a> {
    fn new(problem: &'a MaxDetProblem) -> Self {
        let n = problem.dim();
        let coords = HermCoords::new(n);
        let weight = problem.weight();
        let weight_vec = coords.to_vec(&weight);
        let psi_vec = coords.to_vec(&problem.sensing.psi);
        Barrier {
            a: &problem.h_eff / real(problem.sigma_c_sq.sqrt()),
            weight,
            weight_vec,
            psi: &problem.sensing.psi,
            psi_vec,
            gamma_0: problem.sensing.gamma_0,
            budget: problem.power_budget,
            sensing: problem.sensing.is_active(),
            coords,
        }
    }

    /// Number of barrier terms, the `θ` in the gap bound `θ/t`.
    fn theta(&self) -> f64 {
        (self.coords.n + 1 + usize::from(self.sensing)) as f64
    }

    fn rate_nats(&self, r: &CMat) -> Option<f64> {
        let nc = self.a.nrows();
        log_det_hpd(&(CMat::identity(nc, nc) + &self.a * r * self.a.adjoint()))
    }

    fn slacks(&self, r: &CMat) -> (f64, f64) {
        let p = self.budget - linalg::re_inner(&self.weight, r);
        let s = linalg::re_inner(self.psi, r) - self.gamma_0;
        (p, s)
    }

    fn value(&self, r: &CMat, t: f64) -> Option<f64> {
        let (p, s) = self.slacks(r);
        if !(p > 0.0) || (self.sensing && !(s > 0.0)) {
            return None;
        }
        let ld = log_det_hpd(r)?;
        let rate = self.rate_nats(r)?;
        let mut v = -t * rate - ld - p.ln();
        if self.sensing {
            v -= s.ln();
        }
        Some(v)
    }

    fn eval(&self, r: &CMat, t: f64) -> Option<Eval> {
        let value = self.value(r, t)?;
        let (p, s) = self.slacks(r);
        let nc = self.a.nrows();
        let inner = CMat::identity(nc, nc) + &self.a * r * self.a.adjoint();
        let inner_inv = linalg::hermitian_part(&inner).cholesky()?.inverse();
        let g_mat = linalg::hermitian_part(&(self.a.adjoint() * inner_inv * &self.a));
        let s_mat = linalg::hermitian_part(&linalg::hermitian_part(r).cholesky()?.inverse());
        let mut grad_mat = -(&g_mat * real(t)) - &s_mat + &self.weight * real(1.0 / p);
        if self.sensing {
            grad_mat -= self.psi * real(1.0 / s);
        }
        let grad = self.coords.to_vec(&grad_mat);
        Some(Eval {
            value,
            grad,
            g_mat,
            s_mat,
            slack_power: p,
            slack_sensing: s,
        })
    }

    /// Entry `(k, l)` is `Re tr(E_k (tG) E_l G) + Re tr(E_k S E_l S)` plus
    /// the rank-one slack terms; `tr(e_a e_bᵀ X e_c e_dᵀ X) = X_bc X_da`.
    fn hessian(&self, e: &Eval, t: f64) -> Vec<f64> {
        let dim = self.coords.dim();
        let terms = &self.coords.terms;
        let n = self.coords.n;
        // Column-major copies; nalgebra's checked indexing dominates otherwise.
        let g: Vec<C64> = e.g_mat.iter().map(|v| v * t).collect();
        let g1 = e.g_mat.as_slice();
        let s = e.s_mat.as_slice();
        let inv_p2 = 1.0 / (e.slack_power * e.slack_power);
        let inv_s2 = 1.0 / (e.slack_sensing * e.slack_sensing);
        let mut h = vec![0.0; dim * dim];
        for k in 0..dim {
            for l in k..dim {
                let mut acc = C64::new(0.0, 0.0);
                for &(a, b, ck) in &terms[k] {
                    for &(c, d, cl) in &terms[l] {
                        let (bc, da) = (b + c * n, d + a * n);
                        let x = g[bc] * g1[da] + s[bc] * s[da];
                        acc += ck * cl * x;
                    }
                }
                let mut v = acc.re + inv_p2 * self.weight_vec[k] * self.weight_vec[l];
                if self.sensing {
                    v += inv_s2 * self.psi_vec[k] * self.psi_vec[l];
                }
                h[k * dim + l] = v;
                h[l * dim + k] = v;
            }
        }
        h
    }
}

/// Dense Cholesky solve of `H x = b` for exactly symmetric `H`.
fn cholesky_solve(h: Vec<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let chol = nalgebra::DMatrix::from_vec(n, n, h).cholesky()?;
    let x = chol.solve(&nalgebra::DVector::from_column_slice(b));
    Some(x.iter().copied().collect())
}

/// Generalized top eigenpair of `(Ψ, W_p)`: the direction `v` with
/// `v^H W_p v = 1` maximizing `v^H Ψ v`.
fn top_ratio_direction(psi: &CMat, weight: &CMat) -> Option<(f64, linalg::CVec)> {
    let chol = linalg::hermitian_part(weight).cholesky()?;
    let l_inv = chol.l().try_inverse()?;
    let whitened = &l_inv * psi * l_inv.adjoint();
    let (vals, vecs) = eigh_desc(&whitened);
    let v = l_inv.adjoint() * vecs.column(0);
    Some((vals[0], v))
}

/// Maximizes `log det(I + H_eff R H_eff^H / σ_c²)` over `R ⪰ 0` with
/// `tr(W_p R) ≤ budget` and `tr(Ψ R) ≥ Γ_0`.
pub fn solve_maxdet(problem: &MaxDetProblem, tol: f64, max_iter: usize) -> Result<SdpSolution> {
    problem.validate()?;
    if !(tol > 0.0) {
        return Err(Error::Domain("solver tolerance must be positive".into()));
    }
    let n = problem.dim();
    let weight = problem.weight();
    let active = problem.sensing.is_active();
    let infeasible = |constraint: &str| SdpSolution {
        r_bb: CMat::zeros(n, n),
        r_bb_interior: CMat::zeros(n, n),
        objective_nats: f64::NAN,
        objective_bits: f64::NAN,
        kkt_residual: f64::INFINITY,
        status: SdpStatus::Infeasible {
            constraint: constraint.into(),
        },
        diagnostics: Vec::new(),
    };

    if problem.power_budget == 0.0 {
        if active {
            return Ok(infeasible("sensing"));
        }
        return Ok(SdpSolution {
            r_bb: CMat::zeros(n, n),
            r_bb_interior: CMat::zeros(n, n),
            objective_nats: 0.0,
            objective_bits: 0.0,
            kkt_residual: 0.0,
            status: SdpStatus::Optimal,
            diagnostics: Vec::new(),
        });
    }

    // Phase 1: a rank-one spike along the best SCNR-per-power direction
    // plus a small identity component keeps R strictly positive definite.
    let trace_w = trace_re(&weight);
    let mut r = if active {
        let Some((lambda, v)) = top_ratio_direction(&problem.sensing.psi, &weight) else {
            return Err(Error::State("power weight is not positive definite".into()));
        };
        let best = problem.power_budget * lambda;
        if !(best > problem.sensing.gamma_0) {
            return Ok(infeasible("sensing"));
        }
        let fraction = if 0.9 * best > problem.sensing.gamma_0 {
            0.9
        } else {
            0.5 * (problem.sensing.gamma_0 / best + 1.0)
        };
        let spike = (&v * v.adjoint()) * real(fraction * problem.power_budget);
        let mut eps = 0.5 * (1.0 - fraction) * problem.power_budget / trace_w;
        let barrier = Barrier::new(problem);
        let mut found = None;
        for _ in 0..60 {
            let cand = &spike + CMat::identity(n, n) * real(eps);
            if barrier.value(&cand, 1.0).is_some() {
                found = Some(cand);
                break;
            }
            eps *= 0.5;
        }
        match found {
            Some(r) => r,
            None => return Ok(infeasible("sensing")),
        }
    } else {
        CMat::identity(n, n) * real(0.5 * problem.power_budget / trace_w)
    };

    let barrier = Barrier::new(problem);
    let theta = barrier.theta();
    let mut t = 1.0;
    let mut total_iter = 0;
    let mut diagnostics = Vec::new();
    let mut status = SdpStatus::Optimal;
    let mut last_grad_norm: f64;
    'outer: loop {
        let mut inner = 0;
        loop {
            let Some(e) = barrier.eval(&r, t) else {
                return Err(Error::State("central path left the feasible set".into()));
            };
            let h = barrier.hessian(&e, t);
            let neg: Vec<f64> = e.grad.iter().map(|g| -g).collect();
            let Some(step) = cholesky_solve(h, &neg) else {
                return Err(Error::State(
                    "barrier Hessian is not positive definite".into(),
                ));
            };
            let decrement: f64 = -e.grad.iter().zip(&step).map(|(g, s)| g * s).sum::<f64>();
            last_grad_norm = e.grad.iter().map(|g| g * g).sum::<f64>().sqrt() / t;
            // Intermediate rounds only need rough centering.
            let center_tol = if theta / t < tol { 1e-9 } else { 1e-5 };
            if decrement / 2.0 <= center_tol {
                break;
            }
            let dir = barrier.coords.to_mat(&step);
            let mut alpha = 1.0;
            let mut moved = false;
            while alpha > 1e-14 {
                let cand = &r + &dir * real(alpha);
                if let Some(v) = barrier.value(&cand, t) {
                    if v <= e.value - 0.25 * alpha * decrement {
                        r = linalg::hermitian_part(&cand);
                        // Progress below rounding of the objective itself.
                        moved = e.value - v > 1e-14 * e.value.abs();
                        break;
                    }
                }
                alpha *= 0.5;
            }
            inner += 1;
            total_iter += 1;
            if !moved {
                break;
            }
            if total_iter >= max_iter {
                status = SdpStatus::MaxIter;
                break;
            }
        }
        let (vals, _) = eigh_desc(&r);
        diagnostics.push(SolverDiagnostic {
            outer_t: t,
            inner_iter: inner,
            objective: barrier.rate_nats(&r).unwrap_or(f64::NAN),
            gap_surrogate: theta / t,
            min_eig: *vals.last().unwrap_or(&0.0),
        });
        if status == SdpStatus::MaxIter || theta / t < tol {
            break 'outer;
        }
        t *= 10.0;
    }

    let interior = r.clone();
    let polished = polish(&r, &barrier, problem.power_budget);
    let objective_nats = barrier.rate_nats(&polished).unwrap_or(f64::NAN);
    let (p, s) = barrier.slacks(&polished);
    let mut violation = (-p).max(0.0);
    if active {
        violation = violation.max(-s);
    }
    let (vals, _) = eigh_desc(&polished);
    let min_eig = vals.last().copied().unwrap_or(0.0);
    violation = violation.max(-min_eig);
    let kkt_residual = violation.max(last_grad_norm).max(theta / t);
    Ok(SdpSolution {
        r_bb: polished,
        r_bb_interior: interior,
        objective_nats,
        objective_bits: objective_nats / std::f64::consts::LN_2,
        kkt_residual,
        status,
        diagnostics,
    })
}

/// Drops eigenvalues below `1e−6·λ_max` and rescales so the power
/// constraint is tight. Falls back to the input if that breaks the SCNR
/// constraint or lowers the rate.
fn polish(r: &CMat, barrier: &Barrier<'_>, budget: f64) -> CMat {
    let (vals, vecs) = eigh_desc(r);
    let top = vals.first().copied().unwrap_or(0.0);
    if !(top > 0.0) {
        return r.clone();
    }
    let kept: Vec<f64> = vals
        .iter()
        .map(|&v| if v > 1e-6 * top { v } else { 0.0 })
        .collect();
    let cleaned = linalg::hermitian_part(&(&vecs * linalg::diag_real(&kept) * vecs.adjoint()));
    let used = linalg::re_inner(&barrier.weight, &cleaned);
    if !(used > 0.0) {
        return r.clone();
    }
    let scaled = &cleaned * real(budget / used);
    let s = linalg::re_inner(barrier.psi, &scaled) - barrier.gamma_0;
    let ok_sensing = !barrier.sensing || s >= 0.0;
    let better = match (barrier.rate_nats(&scaled), barrier.rate_nats(r)) {
        (Some(a), Some(b)) => a >= b,
        _ => false,
    };
    if ok_sensing && better {
        scaled
    } else {
        r.clone()
    }
}

pub fn write_diagnostics_csv<W: Write>(writer: W, rows: &[SolverDiagnostic]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "outer_t",
        "inner_iter",
        "objective",
        "gap_surrogate",
        "min_eig",
    ])?;
    for r in rows {
        w.write_record([
            format!("{:e}", r.outer_t),
            r.inner_iter.to_string(),
            format!("{:.17e}", r.objective),
            format!("{:.6e}", r.gap_surrogate),
            format!("{:.6e}", r.min_eig),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub w_bb: CMat,
    pub se_bits: f64,
    /// 0 is the deterministic `Z = I` candidate.
    pub trial: usize,
    /// Candidates meeting the SCNR constraint.
    pub feasible: usize,
}

/// Random projections `W = V Z` of the relaxed optimum, `V = U_{N_s} Λ^{1/2}`.
///
/// Trial `i` draws `Z` from its own ChaCha stream keyed by one master seed
/// taken from `rng`, so results do not depend on scheduling. Returns `None`
/// when no candidate meets the SCNR constraint.
pub fn randomize_rank<R: Rng + ?Sized>(
    solution: &SdpSolution,
    problem: &MaxDetProblem,
    trials: usize,
    rng: &mut R,
) -> Result<Option<Candidate>> {
    if solution.status != SdpStatus::Optimal {
        return Err(Error::State(format!(
            "randomization needs an optimal relaxation, got {}",
            solution.status.name()
        )));
    }
    let n = problem.dim();
    let ns = problem.streams.min(n);
    let (vals, vecs) = eigh_desc(&solution.r_bb);
    let roots: Vec<f64> = vals[..ns].iter().map(|v| v.max(0.0).sqrt()).collect();
    let v = vecs.columns(0, ns).into_owned() * linalg::diag_real(&roots);
    let weight = problem.weight();
    let master: u64 = rng.random();
    let active = problem.sensing.is_active();

    let evaluate = |i: usize| -> Option<(usize, f64, CMat)> {
        let z = if i == 0 {
            CMat::identity(ns, ns)
        } else {
            let mut r = ChaCha8Rng::seed_from_u64(master);
            r.set_stream(i as u64);
            linalg::complex_normal_matrix(ns, ns, &mut r)
        };
        let w = &v * z;
        let used = trace_re(&(w.adjoint() * &weight * &w));
        if !(used > 0.0) {
            return None;
        }
        let w = w * real((problem.power_budget / used).sqrt());
        if active {
            let s = trace_re(&(w.adjoint() * &problem.sensing.psi * &w));
            if s < problem.sensing.gamma_0 {
                return None;
            }
        }
        let se = problem.se_bits_beamformer(&w);
        se.is_finite().then_some((i, se, w))
    };
    let found: Vec<(usize, f64, CMat)> =
        (0..=trials).into_par_iter().filter_map(evaluate).collect();
    let feasible = found.len();
    // Highest SE wins, ties go to the lowest trial index.
    let best = found.into_iter().reduce(|a, b| {
        if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
            b
        } else {
            a
        }
    });
    Ok(best.map(|(trial, se_bits, w_bb)| Candidate {
        w_bb,
        se_bits,
        trial,
        feasible,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdrConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Defaults to `10·N_s`.
    pub trials: Option<usize>,
}

impl Default for SdrConfig {
    fn default() -> Self {
        SdrConfig {
            tol: 1e-7,
            max_iter: 500,
            trials: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdrStatus {
    Ok,
    /// No candidate met the SCNR constraint, even after the retry.
    RandomizationFailed,
    SolverMaxIter,
}

impl SdrStatus {
    pub fn name(self) -> &'static str {
        match self {
            SdrStatus::Ok => "ok",
            SdrStatus::RandomizationFailed => "randomization_failed",
            SdrStatus::SolverMaxIter => "solver_max_iter",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdrOutcome {
    pub w_bb: Option<CMat>,
    pub se_bits: f64,
    /// `tr(W^H Ψ W)` of the returned beamformer.
    pub sensing_value: f64,
    pub solution: SdpSolution,
    pub trials_used: usize,
    pub status: SdrStatus,
}

fn infeasible_error(solution: &SdpSolution) -> Option<Error> {
    match &solution.status {
        SdpStatus::Infeasible { constraint } => Some(Error::Infeasible(format!(
            "no strictly feasible point for the {constraint} constraint"
        ))),
        _ => None,
    }
}

/// Relaxation, then randomization; one retry with `100·N_s` trials.
pub fn sdr_rrs<R: Rng + ?Sized>(
    problem: &MaxDetProblem,
    config: &SdrConfig,
    rng: &mut R,
) -> Result<SdrOutcome> {
    let solution = solve_maxdet(problem, config.tol, config.max_iter)?;
    if let Some(e) = infeasible_error(&solution) {
        return Err(e);
    }
    if solution.status == SdpStatus::MaxIter {
        return Ok(SdrOutcome {
            w_bb: None,
            se_bits: f64::NAN,
            sensing_value: f64::NAN,
            solution,
            trials_used: 0,
            status: SdrStatus::SolverMaxIter,
        });
    }
    let ns = problem.streams.max(1);
    let first = config.trials.unwrap_or(10 * ns);
    let mut trials_used = first;
    let mut pick = randomize_rank(&solution, problem, first, rng)?;
    if pick.is_none() {
        trials_used = 100 * ns;
        pick = randomize_rank(&solution, problem, trials_used, rng)?;
    }
    Ok(match pick {
        Some(c) => {
            let sensing_value = trace_re(&(c.w_bb.adjoint() * &problem.sensing.psi * &c.w_bb));
            SdrOutcome {
                se_bits: c.se_bits,
                w_bb: Some(c.w_bb),
                sensing_value,
                solution,
                trials_used,
                status: SdrStatus::Ok,
            }
        }
        None => SdrOutcome {
            w_bb: None,
            se_bits: f64::NAN,
            sensing_value: f64::NAN,
            solution,
            trials_used,
            status: SdrStatus::RandomizationFailed,
        },
    })
}

/// SE of the unconstrained-rank optimum, the fully digital benchmark.
pub fn fdb_upper_bound(problem: &MaxDetProblem, config: &SdrConfig) -> Result<f64> {
    let solution = solve_maxdet(problem, config.tol, config.max_iter)?;
    if let Some(e) = infeasible_error(&solution) {
        return Err(e);
    }
    Ok(solution.objective_bits)
}
