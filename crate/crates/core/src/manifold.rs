//! Joint gradient descent over a unitary factor and a real gain vector,
//! with a logarithmic barrier for the power and SCNR constraints.
//!
//! The digital beamformer is parameterized as
//! `W_BB = U_B Σ_B^{−1/2} · V · diag(b) + N · Z`, where `U_B Σ_B U_B^H` is
//! the truncated eigendecomposition of the noise-normalized Gram matrix
//! `B = Ũ^H H^H H Ũ / σ_c²`, `V` is an `N_s × N_s` unitary matrix and `N` is
//! an orthonormal basis of the null space of `B`. Because `B N = 0`,
//! `W^H B W = diag(b²)` for every `V` and `Z`, so the rate term is
//! `Σ ln(1 + b_i²)` and only the constraints see `V` and `Z`.
//!
//! The `Z` block carries energy the user cannot receive. Without an SCNR
//! requirement it is optimal at zero; with one it is often the only way to
//! illuminate the target. [`EigB::without_null_space`] drops it.

use std::io::Write;

use rand::Rng;

use crate::beamform::SensingConstraint;
use crate::channel::RANK_TOL;
use crate::error::{Error, Result};
use crate::linalg::{
    self, diag_real, eigh_desc, polar_factor, re_inner, real, skew_part, unitarity_error, CMat,
    CVec,
};

/// Relative eigenvalue cutoff when truncating an explicitly formed `B`.
pub const EIG_CUTOFF: f64 = 1e-10;
/// Allowed `‖V^H V − I‖_F` before a state is rejected.
pub const UNITARY_DRIFT: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct EigB {
    /// `N_RF × N_RF`.
    pub b: CMat,
    /// Top `N_s` eigenvectors, `N_RF × N_s`.
    pub u_b: CMat,
    pub sigma_b: Vec<f64>,
    /// `U_B Σ_B^{−1/2}`, mapping the unitary coordinates to RF chains.
    pub coord: CMat,
    /// Orthonormal basis of the numerical null space of `B`, `N_RF × n_z`;
    /// `n_z = 0` when the null-space block is disabled.
    pub null_basis: CMat,
    /// Power form in unitary coordinates (`Σ_B^{−1}` for the proxy power).
    pub b_tilde: CMat,
    /// SCNR form in unitary coordinates.
    pub phi_tilde: CMat,
    /// SCNR form on the stacked coordinates `[V diag(b); Z]`.
    psi_ext: CMat,
    /// Power form on the stacked coordinates, `diag(Σ_B^{−1}, I)`.
    power_ext: CMat,
    pub gamma_0: f64,
    /// `N_s / M`.
    pub budget: f64,
}

impl EigB {
    /// Truncates `b` to its top `streams` eigenpairs and maps the SCNR
    /// form into the resulting coordinates.
    pub fn from_b(
        b: CMat,
        streams: usize,
        budget: f64,
        sensing: &SensingConstraint,
    ) -> Result<Self> {
        let (vals, vecs) = eigh_desc(&b);
        Self::from_eigenpairs(b, vals, vecs, EIG_CUTOFF, streams, budget, sensing)
    }

    fn from_eigenpairs(
        b: CMat,
        vals: Vec<f64>,
        vecs: CMat,
        cutoff: f64,
        streams: usize,
        budget: f64,
        sensing: &SensingConstraint,
    ) -> Result<Self> {
        let n = b.nrows();
        if sensing.psi.nrows() != n || vecs.nrows() != n {
            return Err(Error::Shape(format!(
                "Ψ is {}x{}, B is {n}x{n}",
                sensing.psi.nrows(),
                sensing.psi.ncols()
            )));
        }
        let top = vals.first().copied().unwrap_or(0.0);
        let achievable = if top > 0.0 {
            vals.iter().filter(|&&v| v > cutoff * top).count()
        } else {
            0
        };
        if streams == 0 || streams > achievable {
            return Err(Error::RankDeficient {
                requested: streams,
                achievable,
            });
        }
        let u_b = vecs.columns(0, streams).into_owned();
        let sigma_b: Vec<f64> = vals[..streams].to_vec();
        let inv_sqrt: Vec<f64> = sigma_b.iter().map(|s| 1.0 / s.sqrt()).collect();
        let coord = &u_b * diag_real(&inv_sqrt);
        let b_tilde = linalg::hermitian_part(&(coord.adjoint() * &coord));
        let phi_tilde = linalg::hermitian_part(&(coord.adjoint() * &sensing.psi * &coord));
        let null_basis = vecs.columns(achievable, n - achievable).into_owned();
        let mut eig = EigB {
            b,
            u_b,
            sigma_b,
            coord,
            null_basis,
            b_tilde,
            phi_tilde,
            psi_ext: CMat::zeros(0, 0),
            power_ext: CMat::zeros(0, 0),
            gamma_0: sensing.gamma_0,
            budget,
        };
        eig.psi_ext = eig.extended(&sensing.psi);
        eig.power_ext = linalg::hermitian_part(&(eig.ext_basis().adjoint() * eig.ext_basis()));
        Ok(eig)
    }

    /// Same reduction restricted to `col(U_B)`, so that `Z` is empty.
    pub fn without_null_space(&self) -> Self {
        let mut eig = self.clone();
        let ns = self.streams();
        eig.null_basis = CMat::zeros(self.b.nrows(), 0);
        eig.psi_ext = self.psi_ext.view((0, 0), (ns, ns)).into_owned();
        eig.power_ext = self.power_ext.view((0, 0), (ns, ns)).into_owned();
        eig
    }

    fn ext_basis(&self) -> CMat {
        let (n, ns, nz) = (self.b.nrows(), self.streams(), self.null_dim());
        let mut e = CMat::zeros(n, ns + nz);
        e.columns_mut(0, ns).copy_from(&self.coord);
        e.columns_mut(ns, nz).copy_from(&self.null_basis);
        e
    }

    fn extended(&self, form: &CMat) -> CMat {
        let e = self.ext_basis();
        linalg::hermitian_part(&(e.adjoint() * form * &e))
    }

    pub fn streams(&self) -> usize {
        self.sigma_b.len()
    }

    /// Rows of `Z`.
    pub fn null_dim(&self) -> usize {
        self.null_basis.ncols()
    }

    pub fn sensing_active(&self) -> bool {
        self.gamma_0 > 0.0
    }
}

/// Builds `B = Ũ^H H^H H Ũ / σ_c²` and truncates it. The eigenpairs come
/// from the SVD of `H Ũ`, which keeps weak streams accurate.
pub fn reduce_b(
    u_tilde: &CMat,
    h: &CMat,
    sigma_c_sq: f64,
    streams: usize,
    budget: f64,
    sensing: &SensingConstraint,
) -> Result<EigB> {
    if !(sigma_c_sq > 0.0) {
        return Err(Error::ZeroDenominator("communication noise power".into()));
    }
    let a = h * u_tilde;
    let b = linalg::hermitian_part(&(a.adjoint() * &a)) / real(sigma_c_sq);
    let n = b.nrows();
    let svd = a.clone().svd(false, true);
    let vt = svd
        .v_t
        .ok_or_else(|| Error::State("SVD did not return vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let mut vals: Vec<f64> = order
        .iter()
        .map(|&i| svd.singular_values[i].powi(2) / sigma_c_sq)
        .collect();
    let mut vecs = CMat::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &vt.row(i).adjoint());
    }
    // Pad to a full basis; the padding only matters through its span.
    if order.len() < n {
        let lead = vecs.columns(0, order.len()).into_owned();
        let complement = CMat::identity(n, n) - &lead * lead.adjoint();
        let (_, cvecs) = eigh_desc(&linalg::hermitian_part(&complement));
        vecs.columns_mut(order.len(), n - order.len())
            .copy_from(&cvecs.columns(0, n - order.len()));
        vals.resize(n, 0.0);
    }
    // Squared singular values, so the rank test matches `numerical_rank`.
    EigB::from_eigenpairs(b, vals, vecs, RANK_TOL * RANK_TOL, streams, budget, sensing)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldState {
    /// `N_s × N_s` unitary.
    pub v: CMat,
    pub b: Vec<f64>,
    /// `n_z × N_s` null-space block.
    pub z: CMat,
}

impl ManifoldState {
    /// State with an all-zero null-space block.
    pub fn new(v: CMat, b: Vec<f64>, null_dim: usize) -> Self {
        let ns = b.len();
        ManifoldState {
            v,
            b,
            z: CMat::zeros(null_dim, ns),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.b.iter().all(|x| x.is_finite())
            && linalg::all_finite(&self.z)
            && unitarity_error(&self.v) <= UNITARY_DRIFT
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Armijo {
    pub shrink: f64,
    pub slope: f64,
    pub initial_step: f64,
    /// Steps below this count as a stalled line search.
    pub min_step: f64,
    /// After a first-trial acceptance the next trial step is multiplied
    /// by this, up to `max_step`. `1.0` restarts every search at
    /// `initial_step`.
    pub grow: f64,
    pub max_step: f64,
}

impl Default for Armijo {
    fn default() -> Self {
        Armijo {
            shrink: 0.5,
            slope: 1e-4,
            initial_step: 1.0,
            min_step: 1e-12,
            grow: 2.0,
            max_step: 1e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Continuation {
    pub mu: f64,
    pub rounds: usize,
}

impl Default for Continuation {
    fn default() -> Self {
        Continuation {
            mu: 10.0,
            rounds: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldConfig {
    pub barrier_t: f64,
    pub eps_v: f64,
    /// Also used for the `Z` block.
    pub eps_b: f64,
    pub max_iter: usize,
    pub armijo: Armijo,
    /// Scale the joint gradient by the barrier preconditioner; when false
    /// every block takes the plain negative gradient.
    pub precondition: bool,
    pub continuation: Option<Continuation>,
    /// Optimize the null-space block `Z`; when false the beamformer stays
    /// inside `col(U_B)`.
    pub null_space: bool,
}

impl Default for ManifoldConfig {
    fn default() -> Self {
        ManifoldConfig {
            barrier_t: 100.0,
            eps_v: 1e-6,
            eps_b: 1e-6,
            max_iter: 500,
            armijo: Armijo::default(),
            precondition: true,
            continuation: None,
            null_space: true,
        }
    }
}

/// Quantities shared by the objective and the gradients.
struct Parts {
    /// Power form applied to the stacked coordinates `X = [V diag(b); Z]`.
    px: CMat,
    /// SCNR form applied to `X`.
    sx: CMat,
    power_slack: f64,
    sensing_slack: f64,
}

fn stacked(state: &ManifoldState) -> CMat {
    let ns = state.b.len();
    let nz = state.z.nrows();
    let mut x = CMat::zeros(ns + nz, ns);
    x.rows_mut(0, ns)
        .copy_from(&(&state.v * diag_real(&state.b)));
    x.rows_mut(ns, nz).copy_from(&state.z);
    x
}

fn parts(state: &ManifoldState, eig: &EigB) -> Parts {
    let x = stacked(state);
    let px = &eig.power_ext * &x;
    let sx = &eig.psi_ext * &x;
    let p = re_inner(&x, &px);
    let s = re_inner(&x, &sx);
    Parts {
        px,
        sx,
        power_slack: eig.budget - p,
        sensing_slack: s - eig.gamma_0,
    }
}

fn feasible(p: &Parts, eig: &EigB) -> bool {
    p.power_slack > 0.0 && (!eig.sensing_active() || p.sensing_slack > 0.0)
}

fn domain_check(p: &Parts, eig: &EigB) -> Result<()> {
    if !(p.power_slack > 0.0) {
        return Err(Error::Domain(format!("power slack {:.3e}", p.power_slack)));
    }
    if eig.sensing_active() && !(p.sensing_slack > 0.0) {
        return Err(Error::Domain(format!("SCNR slack {:.3e}", p.sensing_slack)));
    }
    Ok(())
}

fn check_shapes(state: &ManifoldState, eig: &EigB) -> Result<()> {
    let n = eig.streams();
    if state.v.shape() != (n, n) || state.b.len() != n || state.z.shape() != (eig.null_dim(), n) {
        return Err(Error::Shape(format!(
            "state is {}x{} with {} gains and a {}x{} null block, expected {n} streams and {} null rows",
            state.v.nrows(),
            state.v.ncols(),
            state.b.len(),
            state.z.nrows(),
            state.z.ncols(),
            eig.null_dim()
        )));
    }
    Ok(())
}

/// `W_BB = U_B Σ_B^{−1/2} V diag(b) + N Z`.
pub fn assemble_wbb(eig: &EigB, state: &ManifoldState) -> CMat {
    &eig.coord * &state.v * diag_real(&state.b) + &eig.null_basis * &state.z
}

/// Barrier objective; `+∞` outside the strictly feasible set.
pub fn barrier_value(state: &ManifoldState, eig: &EigB, t: f64) -> f64 {
    if check_shapes(state, eig).is_err() {
        return f64::INFINITY;
    }
    let p = parts(state, eig);
    if !feasible(&p, eig) {
        return f64::INFINITY;
    }
    let rate: f64 = state.b.iter().map(|b| (b * b).ln_1p()).sum();
    let mut f = -rate - p.power_slack.ln() / t;
    if eig.sensing_active() {
        f -= p.sensing_slack.ln() / t;
    }
    f
}

/// Gradient of the barrier terms with respect to the stacked coordinates,
/// `(2/t)·[P X / u_1 − S X / u_2]`.
fn barrier_grad_x(p: &Parts, eig: &EigB, t: f64) -> CMat {
    let mut g = &p.px * real(2.0 / (t * p.power_slack));
    if eig.sensing_active() {
        g -= &p.sx * real(2.0 / (t * p.sensing_slack));
    }
    g
}

/// `∂f/∂b_i = −2b_i/(1+b_i²) + Re(v_i^H G_i)`, `G` the top block of the
/// barrier gradient in the stacked coordinates. With `Z = 0` this is
/// `(2b_i/t)·[(V^H B̃ V)_ii/u_1 − (V^H Φ̃ V)_ii/u_2]` on top of the rate term.
pub fn grad_b(state: &ManifoldState, eig: &EigB, t: f64) -> Result<Vec<f64>> {
    check_shapes(state, eig)?;
    let p = parts(state, eig);
    domain_check(&p, eig)?;
    let g = barrier_grad_x(&p, eig, t);
    let top = g.rows(0, eig.streams());
    Ok((0..state.b.len())
        .map(|i| {
            let b = state.b[i];
            -2.0 * b / (1.0 + b * b) + state.v.column(i).dotc(&top.column(i)).re
        })
        .collect())
}

/// Euclidean gradient in `V` under `⟨X, Y⟩ = Re tr(X^H Y)`. With `Z = 0`:
/// `(2/t)·[B̃ V S / u_1 − Φ̃ V S / u_2]`, `S = diag(b²)`.
pub fn grad_v(state: &ManifoldState, eig: &EigB, t: f64) -> Result<CMat> {
    check_shapes(state, eig)?;
    let p = parts(state, eig);
    domain_check(&p, eig)?;
    let ns = eig.streams();
    let g = barrier_grad_x(&p, eig, t);
    Ok(g.rows(0, ns) * diag_real(&state.b))
}

/// Euclidean gradient in the null-space block `Z`.
pub fn grad_z(state: &ManifoldState, eig: &EigB, t: f64) -> Result<CMat> {
    check_shapes(state, eig)?;
    let p = parts(state, eig);
    domain_check(&p, eig)?;
    let ns = eig.streams();
    let g = barrier_grad_x(&p, eig, t);
    Ok(g.rows(ns, eig.null_dim()).into_owned())
}

/// A point in the joint tangent coordinates: a skew-Hermitian generator
/// `Ω` (the `V` direction is `V Ω`), the gains and the null-space block.
#[derive(Debug, Clone)]
struct Blocks {
    omega: CMat,
    b: Vec<f64>,
    z: CMat,
}

impl Blocks {
    fn dot(&self, other: &Blocks) -> f64 {
        re_inner(&self.omega, &other.omega)
            + self.b.iter().zip(&other.b).map(|(x, y)| x * y).sum::<f64>()
            + re_inner(&self.z, &other.z)
    }

    fn negated(mut self) -> Blocks {
        self.omega = -self.omega;
        self.b.iter_mut().for_each(|x| *x = -*x);
        self.z = -self.z;
        self
    }

    fn axpy(&mut self, a: f64, x: &Blocks) {
        self.omega += &x.omega * real(a);
        for (s, v) in self.b.iter_mut().zip(&x.b) {
            *s += a * v;
        }
        self.z += &x.z * real(a);
    }

    /// Entrywise division by a positive diagonal of the same layout.
    fn divide(&self, d: &Blocks) -> Blocks {
        Blocks {
            omega: self.omega.zip_map(&d.omega, |x, h| x / h.re),
            b: self.b.iter().zip(&d.b).map(|(x, h)| x / h).collect(),
            z: self.z.zip_map(&d.z, |x, h| x / h.re),
        }
    }
}

/// Derivative of the quadratic form with `form_x = F·X` in the joint
/// coordinates.
fn form_gradient(state: &ManifoldState, form_x: &CMat) -> Blocks {
    let ns = state.b.len();
    let top = form_x.rows(0, ns);
    let dv = top * diag_real(&state.b) * real(2.0);
    Blocks {
        omega: skew_part(&(state.v.adjoint() * dv)),
        b: (0..ns)
            .map(|i| 2.0 * state.v.column(i).dotc(&top.column(i)).re)
            .collect(),
        z: form_x.rows(ns, form_x.nrows() - ns) * real(2.0),
    }
}

/// Search direction at one iterate.
struct Direction {
    step: Blocks,
    /// `⟨∇f, P^{−1}∇f⟩`, the predicted decrease per unit step.
    decrement: f64,
    grad_norm_v: f64,
    grad_norm_b: f64,
}

/// `−P^{−1}∇f` with `P` a positive diagonal plus the Gauss-Newton terms of
/// both barriers, `∇P∇P^T/(t u_1²)` and `∇S∇S^T/(t u_2²)`.
///
/// The diagonal holds, per rotation `(i, j)` of `Ω`, the curvature
/// `(2/t)·|b_i² − b_j²|·(|a_jj − a_ii|/u_1 + |s_jj − s_ii|/u_2)` with `a`,
/// `s` the power and SCNR forms in the current basis (Jacobi-like angles);
/// per gain, `|∂²f/∂b_i²|` summed term by term; per entry of `Z`,
/// `2/(t u_1)`. The rank-one terms carry the stiffness the barriers add
/// along their own gradients, which a diagonal cannot. The inverse uses the
/// Woodbury identity. Without preconditioning `P = I`.
fn direction(state: &ManifoldState, eig: &EigB, t: f64, precondition: bool) -> Result<Direction> {
    check_shapes(state, eig)?;
    let p = parts(state, eig);
    domain_check(&p, eig)?;
    let ns = eig.streams();
    let active = eig.sensing_active();
    let g_power = form_gradient(state, &p.px);
    let g_sense = form_gradient(state, &p.sx);

    let mut grad = Blocks {
        omega: CMat::zeros(ns, ns),
        b: vec![0.0; ns],
        z: CMat::zeros(state.z.nrows(), ns),
    };
    grad.axpy(1.0 / (t * p.power_slack), &g_power);
    if active {
        grad.axpy(-1.0 / (t * p.sensing_slack), &g_sense);
    }
    for (g, b) in grad.b.iter_mut().zip(&state.b) {
        *g -= 2.0 * b / (1.0 + b * b);
    }
    let grad_norm_v = linalg::frob2(&grad.omega).sqrt();
    let grad_norm_b = grad.b.iter().map(|g| g * g).sum::<f64>().sqrt();

    if !precondition {
        let decrement = grad.dot(&grad);
        return Ok(Direction {
            step: grad.negated(),
            decrement,
            grad_norm_v,
            grad_norm_b,
        });
    }

    let a = state.v.adjoint() * eig.power_ext.view((0, 0), (ns, ns)) * &state.v;
    let s = state.v.adjoint() * eig.psi_ext.view((0, 0), (ns, ns)) * &state.v;
    let mut d = Blocks {
        omega: CMat::zeros(ns, ns),
        b: vec![0.0; ns],
        z: CMat::from_element(state.z.nrows(), ns, real(2.0 / (t * p.power_slack))),
    };
    for i in 0..ns {
        for j in 0..ns {
            if i == j {
                continue;
            }
            let spread = (state.b[i].powi(2) - state.b[j].powi(2)).abs();
            let mut c = (a[(j, j)].re - a[(i, i)].re).abs() / p.power_slack;
            if active {
                c += (s[(j, j)].re - s[(i, i)].re).abs() / p.sensing_slack;
            }
            d.omega[(i, j)] = real(2.0 * spread * c / t);
        }
        let b = state.b[i];
        let mut h = (2.0 * (1.0 - b * b) / (1.0 + b * b).powi(2)).abs();
        h += 2.0 * a[(i, i)].re / (t * p.power_slack);
        if active {
            h += 2.0 * s[(i, i)].re.abs() / (t * p.sensing_slack);
        }
        d.b[i] = h;
    }
    let hmax = d
        .omega
        .iter()
        .map(|x| x.re)
        .chain(d.b.iter().copied())
        .chain(d.z.iter().map(|x| x.re))
        .fold(0.0_f64, f64::max);
    let floor = if hmax > 0.0 { 1e-12 * hmax } else { 1.0 };
    for i in 0..ns {
        // The diagonal of Ω only rotates phases, which leaves f unchanged.
        d.omega[(i, i)] = real(1.0);
    }
    d.omega.apply(|x| *x = real(x.re.max(floor)));
    d.b.iter_mut().for_each(|x| *x = x.max(floor));

    let mut terms = vec![(g_power, 1.0 / (t * p.power_slack.powi(2)))];
    if active {
        terms.push((g_sense, 1.0 / (t * p.sensing_slack.powi(2))));
    }
    let y = grad.divide(&d);
    let dinv_g: Vec<Blocks> = terms.iter().map(|(g, _)| g.divide(&d)).collect();
    let k = terms.len();
    let mut m = nalgebra::DMatrix::<f64>::zeros(k, k);
    let mut rhs = nalgebra::DVector::<f64>::zeros(k);
    for i in 0..k {
        for j in 0..k {
            m[(i, j)] = terms[i].0.dot(&dinv_g[j]);
        }
        m[(i, i)] += 1.0 / terms[i].1;
        rhs[i] = terms[i].0.dot(&y);
    }
    let coef = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::State("singular barrier preconditioner".into()))?;
    let mut step = y;
    for (i, g) in dinv_g.iter().enumerate() {
        step.axpy(-coef[i], g);
    }
    let decrement = grad.dot(&step);
    Ok(Direction {
        step: step.negated(),
        decrement,
        grad_norm_v,
        grad_norm_b,
    })
}

/// Descent direction on the unitary group, `ξ = −V·skew(V^H G)`.
pub fn tangent_project(v: &CMat, g: &CMat) -> Result<CMat> {
    let drift = unitarity_error(v);
    if !(drift <= UNITARY_DRIFT) {
        return Err(Error::State(format!(
            "V drifted from unitarity by {drift:.3e}"
        )));
    }
    Ok(-(v * skew_part(&(v.adjoint() * g))))
}

/// Closest unitary matrix to `z` (SVD polar factor). A nearly singular `z`
/// gets one retry with a small diagonal jitter.
pub fn stiefel_retract(z: &CMat) -> Result<CMat> {
    if z.nrows() != z.ncols() {
        return Err(Error::Shape(format!(
            "retraction needs a square matrix, got {:?}",
            z.shape()
        )));
    }
    if !linalg::all_finite(z) {
        return Err(Error::Retraction("non-finite input".into()));
    }
    if let Some(q) = polar_factor(z, 1e-12) {
        return Ok(q);
    }
    let n = z.nrows();
    let jitter = 1e-8 * z.norm().max(1.0);
    polar_factor(&(z + CMat::identity(n, n) * real(jitter)), 1e-12)
        .ok_or_else(|| Error::Retraction("matrix is rank deficient".into()))
}

#[derive(Debug, Clone)]
pub struct Phase1 {
    pub state: ManifoldState,
    /// Halvings of the secondary gains needed to keep the SCNR slack.
    pub bisections: usize,
}

/// Builds a strictly feasible starting point.
///
/// The preferred start keeps `V` near the identity (a small random
/// rotation, so different generators give different starts), waterfills
/// the gains over a fraction `ρ` of 90% of the budget, and spends the rest
/// on the strongest SCNR direction of the null-space block. `ρ` starts at
/// 0.9 and halves until the SCNR slack is positive.
///
/// When there is no null-space block, or it cannot reach the threshold,
/// the fallback puts the first stream on the direction maximizing the ratio
/// of SCNR form to power form over all coordinates and gives the remaining
/// streams small gains, halved until the SCNR slack stays positive.
pub fn phase1_feasible<R: Rng + ?Sized>(eig: &EigB, rng: &mut R) -> Result<Phase1> {
    if !(eig.budget > 0.0) {
        return Err(Error::Infeasible("power budget is zero".into()));
    }
    if let Some(p) = comm_first(eig, rng)? {
        return Ok(p);
    }
    sensing_first(eig, rng)
}

fn comm_first<R: Rng + ?Sized>(eig: &EigB, rng: &mut R) -> Result<Option<Phase1>> {
    let n = eig.streams();
    let nz = eig.null_dim();
    // Mixing streams i and j costs power in proportion to σ_i/σ_j, so the
    // random rotation is damped accordingly.
    let g = linalg::complex_normal_matrix(n, n, rng);
    let mut omega = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let (lo, hi) = (
                eig.sigma_b[i].min(eig.sigma_b[j]),
                eig.sigma_b[i].max(eig.sigma_b[j]),
            );
            omega[(i, j)] = g[(i, j)] * real(0.05 * (lo / hi).sqrt());
        }
    }
    let v = stiefel_retract(&(CMat::identity(n, n) + skew_part(&omega)))?;
    let bv = &eig.b_tilde * &v;
    let bdiag: Vec<f64> = (0..n).map(|i| v.column(i).dotc(&bv.column(i)).re).collect();
    let gains: Vec<f64> = bdiag.iter().map(|d| 1.0 / d).collect();
    let gains_for = |power: f64| -> Vec<f64> {
        let x = waterfill(&gains, power);
        // A zero gain is stationary, so every stream keeps a trace of power.
        x.iter()
            .zip(&bdiag)
            .map(|(x, d)| (x.max(1e-6 * power) / d).sqrt())
            .collect()
    };
    let total = 0.9 * eig.budget;
    if !eig.sensing_active() {
        let b = gains_for(total * (1.0 - 1e-6 * n as f64));
        return Ok(Some(Phase1 {
            state: ManifoldState::new(v, b, nz),
            bisections: 0,
        }));
    }
    if nz == 0 {
        return Ok(None);
    }
    let psi_nn = eig.psi_ext.view((n, n), (nz, nz)).into_owned();
    let (vals, vecs) = eigh_desc(&linalg::hermitian_part(&psi_nn));
    if !(vals[0] > 0.0) {
        return Ok(None);
    }
    let lead: CVec = vecs.column(0).into_owned();
    let psi_nt = eig.psi_ext.view((n, 0), (nz, n)).into_owned();
    let mut rho = 0.9;
    for bisections in 0..=50 {
        let b = gains_for(total * rho * (1.0 - 1e-6 * n as f64));
        let top = &v * diag_real(&b);
        // Rotate the lead so its cross term with the first stream is
        // nonnegative.
        let cross = lead.dotc(&(&psi_nt * top.column(0)));
        let phase = if cross.norm() > 0.0 {
            cross / real(cross.norm())
        } else {
            real(1.0)
        };
        let mut z = CMat::zeros(nz, n);
        z.set_column(0, &(&lead * phase * real((total * (1.0 - rho)).sqrt())));
        let state = ManifoldState { v: v.clone(), b, z };
        if feasible(&parts(&state, eig), eig) {
            return Ok(Some(Phase1 { state, bisections }));
        }
        rho *= 0.5;
    }
    Ok(None)
}

fn sensing_first<R: Rng + ?Sized>(eig: &EigB, rng: &mut R) -> Result<Phase1> {
    let n = eig.streams();
    let nz = eig.null_dim();
    // Cholesky whitening of the power form turns the ratio into a plain
    // Hermitian eigenproblem.
    let chol = eig
        .power_ext
        .clone()
        .cholesky()
        .ok_or_else(|| Error::State("power form is not positive definite".into()))?;
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::State("power form is singular".into()))?;
    let whitened = linalg::hermitian_part(&(&l_inv * &eig.psi_ext * l_inv.adjoint()));
    let (vals, vecs) = eigh_desc(&whitened);
    let lambda = vals[0];
    let x: CVec = l_inv.adjoint() * vecs.column(0);

    let active = eig.sensing_active();
    let best = eig.budget * lambda;
    if active && !(best > eig.gamma_0) {
        return Err(Error::Infeasible(format!(
            "largest SCNR form at full power {best:.3e} does not exceed Γ_0 = {:.3e}",
            eig.gamma_0
        )));
    }
    let fraction = if !active || 0.9 * best > eig.gamma_0 {
        0.9
    } else {
        0.5 * (eig.gamma_0 / best + 1.0)
    };
    let x_power = x.dotc(&(&eig.power_ext * &x)).re;
    let x = x * real((fraction * eig.budget / x_power).sqrt());
    let top: CVec = x.rows(0, n).into_owned();
    let top_norm = top.norm();
    let lead = if top_norm > 1e-300 {
        top.clone() / real(top_norm)
    } else {
        let mut e = CVec::zeros(n);
        e[0] = real(1.0);
        e
    };
    let fill = linalg::random_unitary(n, rng);
    let v = linalg::complete_unitary(&lead, &fill);
    let mut b = vec![0.0; n];
    b[0] = top_norm;
    let mut z = CMat::zeros(nz, n);
    if nz > 0 {
        z.set_column(0, &x.rows(n, nz));
    }

    let mut state = ManifoldState { v, b, z };
    if n == 1 {
        return Ok(Phase1 {
            state,
            bisections: 0,
        });
    }
    let bv = &eig.b_tilde * &state.v;
    let bdiag: Vec<f64> = (0..n)
        .map(|i| state.v.column(i).dotc(&bv.column(i)).re)
        .collect();
    let spare = eig.budget * (1.0 - fraction);
    let mut rho = 0.5;
    for bisections in 0..=50 {
        for (b, d) in state.b.iter_mut().zip(&bdiag).skip(1) {
            *b = (rho * spare / ((n - 1) as f64 * d)).sqrt();
        }
        if feasible(&parts(&state, eig), eig) {
            return Ok(Phase1 { state, bisections });
        }
        rho *= 0.5;
    }
    Err(Error::Infeasible(
        "no strictly feasible secondary gains after 50 bisections".into(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub t: f64,
    pub f: f64,
    pub grad_norm_v: f64,
    pub grad_norm_b: f64,
    pub step_v: f64,
    pub step_b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldStatus {
    Converged,
    MaxIter,
    /// No decrease above the minimum step; the last iterate is kept.
    LineSearchStalled,
}

impl ManifoldStatus {
    pub fn name(self) -> &'static str {
        match self {
            ManifoldStatus::Converged => "converged",
            ManifoldStatus::MaxIter => "max_iter",
            ManifoldStatus::LineSearchStalled => "stalled",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ManifoldOutcome {
    pub state: ManifoldState,
    pub w_bb: CMat,
    /// One row per accepted iterate, starting with the initial point.
    pub trace: Vec<TraceRow>,
    pub iterations: usize,
    pub status: ManifoldStatus,
}

/// Runs the descent at every barrier parameter of the schedule.
pub fn rm_jgd(eig: &EigB, config: &ManifoldConfig, init: ManifoldState) -> Result<ManifoldOutcome> {
    let mut schedule = vec![config.barrier_t];
    if let Some(c) = config.continuation {
        for _ in 0..c.rounds {
            let last = *schedule.last().expect("nonempty");
            schedule.push(last * c.mu);
        }
    }
    let restricted;
    let (eig, mut state) = if !config.null_space && eig.null_dim() > 0 {
        if init.z.norm() > 0.0 {
            return Err(Error::State(
                "null-space block is disabled but Z is nonzero".into(),
            ));
        }
        restricted = eig.without_null_space();
        let z = CMat::zeros(0, init.b.len());
        (&restricted, ManifoldState { z, ..init })
    } else {
        (eig, init)
    };
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut status = ManifoldStatus::Converged;
    for t in schedule {
        let (next, round_status, used) = descend(eig, config, t, state, &mut trace, iterations)?;
        state = next;
        iterations += used;
        status = round_status;
    }
    let w_bb = assemble_wbb(eig, &state);
    Ok(ManifoldOutcome {
        state,
        w_bb,
        trace,
        iterations,
        status,
    })
}

fn descend(
    eig: &EigB,
    config: &ManifoldConfig,
    t: f64,
    init: ManifoldState,
    trace: &mut Vec<TraceRow>,
    offset: usize,
) -> Result<(ManifoldState, ManifoldStatus, usize)> {
    check_shapes(&init, eig)?;
    if !init.is_valid() {
        return Err(Error::State(
            "initial state is not unitary or has non-finite gains".into(),
        ));
    }
    let mut f = barrier_value(&init, eig, t);
    if !f.is_finite() {
        return Err(Error::Domain(
            "initial state is not strictly feasible".into(),
        ));
    }
    let mut state = init;
    let mut d = direction(&state, eig, t, config.precondition)?;
    trace.push(TraceRow {
        iter: offset,
        t,
        f,
        grad_norm_v: d.grad_norm_v,
        grad_norm_b: d.grad_norm_b,
        step_v: 0.0,
        step_b: 0.0,
    });
    let tol = config.eps_v.min(config.eps_b);
    let mut trial = config.armijo.initial_step;
    for iter in 0..config.max_iter {
        if d.decrement < tol {
            return Ok((state, ManifoldStatus::Converged, iter));
        }
        let xi = &state.v * &d.step.omega;
        let mut step = trial;
        let accepted = loop {
            if step < config.armijo.min_step {
                break None;
            }
            let v = match stiefel_retract(&(&state.v + &xi * real(step))) {
                Ok(v) => v,
                Err(_) => {
                    step *= config.armijo.shrink;
                    continue;
                }
            };
            let b = state
                .b
                .iter()
                .zip(&d.step.b)
                .map(|(b, x)| b + step * x)
                .collect();
            let z = &state.z + &d.step.z * real(step);
            let cand = ManifoldState { v, b, z };
            let fc = barrier_value(&cand, eig, t);
            if fc.is_finite() && fc < f && fc <= f - config.armijo.slope * step * d.decrement {
                break Some((cand, fc));
            }
            step *= config.armijo.shrink;
        };
        let Some((cand, fc)) = accepted else {
            return Ok((state, ManifoldStatus::LineSearchStalled, iter));
        };
        trial = if step == trial {
            (step * config.armijo.grow).min(config.armijo.max_step)
        } else {
            step
        };
        state = cand;
        f = fc;
        d = direction(&state, eig, t, config.precondition)?;
        trace.push(TraceRow {
            iter: offset + iter + 1,
            t,
            f,
            grad_norm_v: d.grad_norm_v,
            grad_norm_b: d.grad_norm_b,
            step_v: step,
            step_b: step,
        });
    }
    let status = if d.decrement < tol {
        ManifoldStatus::Converged
    } else {
        ManifoldStatus::MaxIter
    };
    Ok((state, status, config.max_iter))
}

pub fn write_trace_csv<W: Write>(writer: W, trace: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "iter",
        "t",
        "f",
        "grad_norm_V",
        "grad_norm_b",
        "step_V",
        "step_b",
    ])?;
    for r in trace {
        w.write_record([
            r.iter.to_string(),
            format!("{:e}", r.t),
            format!("{:.17e}", r.f),
            format!("{:.6e}", r.grad_norm_v),
            format!("{:.6e}", r.grad_norm_b),
            format!("{:.6e}", r.step_v),
            format!("{:.6e}", r.step_b),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Waterfilling over parallel channels with gains `g_i` (rate
/// `Σ ln(1 + g_i x_i)`, `Σ x_i ≤ budget`). Returns the per-channel powers.
pub fn waterfill(gains: &[f64], budget: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..gains.len()).filter(|&i| gains[i] > 0.0).collect();
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]));
    let mut out = vec![0.0; gains.len()];
    if budget <= 0.0 {
        return out;
    }
    for active in (1..=order.len()).rev() {
        let inv_sum: f64 = order[..active].iter().map(|&i| 1.0 / gains[i]).sum();
        let level = (budget + inv_sum) / active as f64;
        if level > 1.0 / gains[order[active - 1]] {
            for &i in &order[..active] {
                out[i] = level - 1.0 / gains[i];
            }
            return out;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn no_sensing(n: usize) -> SensingConstraint {
        SensingConstraint {
            psi: CMat::zeros(n, n),
            gamma_0: 0.0,
        }
    }

    fn synthetic(seed: u64, n: usize, streams: usize) -> EigB {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Rank `streams`, so the null-space block has `n − streams` rows.
        let g = linalg::complex_normal_matrix(n, streams, &mut rng);
        let b = &g * g.adjoint();
        let h = linalg::complex_normal_matrix(n, 1, &mut rng);
        let i = linalg::complex_normal_matrix(n, 1, &mut rng);
        let psi = &h * h.adjoint() - (&i * i.adjoint()) * real(0.3);
        EigB::from_b(b, streams, 1.0, &SensingConstraint { psi, gamma_0: 0.05 }).unwrap()
    }

    #[test]
    fn identity_b_reduces_trivially() {
        let eig = EigB::from_b(CMat::identity(4, 4), 4, 1.0, &no_sensing(4)).unwrap();
        assert!(eig.sigma_b.iter().all(|s| (s - 1.0).abs() < 1e-12));
        assert!(unitarity_error(&eig.u_b) < 1e-12);
        assert!((&eig.b_tilde - CMat::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn too_many_streams_names_achievable() {
        let mut b = CMat::zeros(3, 3);
        b[(0, 0)] = real(2.0);
        b[(1, 1)] = real(1.0);
        match EigB::from_b(b, 3, 1.0, &no_sensing(3)) {
            Err(Error::RankDeficient {
                requested: 3,
                achievable: 2,
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_gains_give_zero_beamformer() {
        let eig = synthetic(1, 5, 3);
        let state = ManifoldState::new(CMat::identity(3, 3), vec![0.0; 3], 2);
        assert_eq!(assemble_wbb(&eig, &state).norm(), 0.0);
        let open = EigB::from_b(eig.b.clone(), 3, 1.0, &no_sensing(5)).unwrap();
        assert_eq!(grad_v(&state, &open, 100.0).unwrap().norm(), 0.0);
        assert!(grad_b(&state, &open, 100.0)
            .unwrap()
            .iter()
            .all(|g| *g == 0.0));
    }

    #[test]
    fn identity_everything_puts_gains_on_diagonal() {
        let eig = EigB::from_b(CMat::identity(4, 4), 4, 10.0, &no_sensing(4)).unwrap();
        let state = ManifoldState::new(CMat::identity(4, 4), vec![0.5, 0.4, 0.3, 0.2], 0);
        let w = assemble_wbb(&eig, &state);
        let expected = &eig.u_b * diag_real(&state.b);
        assert!((w - expected).norm() < 1e-12);
    }

    #[test]
    fn beamformer_diagonalizes_b() {
        let eig = synthetic(2, 6, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let state = ManifoldState {
            v: linalg::random_unitary(4, &mut rng),
            b: vec![0.7, 0.2, 1.1, 0.4],
            z: linalg::complex_normal_matrix(2, 4, &mut rng),
        };
        let w = assemble_wbb(&eig, &state);
        let d = w.adjoint() * &eig.b * &w;
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { state.b[i] * state.b[i] } else { 0.0 };
                assert!((d[(i, j)] - real(expected)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn infeasible_state_is_infinite() {
        let eig = synthetic(4, 5, 2);
        let state = ManifoldState::new(CMat::identity(2, 2), vec![100.0, 100.0], 3);
        assert_eq!(barrier_value(&state, &eig, 100.0), f64::INFINITY);
        assert!(matches!(grad_b(&state, &eig, 100.0), Err(Error::Domain(_))));
        assert!(matches!(grad_v(&state, &eig, 100.0), Err(Error::Domain(_))));
    }

    #[test]
    fn tangent_projection_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = linalg::random_unitary(4, &mut rng);
        let g = linalg::complex_normal_matrix(4, 4, &mut rng);
        let herm = linalg::hermitian_part(&g);
        assert!(tangent_project(&v, &(&v * &herm)).unwrap().norm() < 1e-12);
        let skew = skew_part(&g);
        let xi = tangent_project(&v, &(&v * &skew)).unwrap();
        assert!((xi + &v * &skew).norm() < 1e-12);
        let xi = tangent_project(&v, &g).unwrap();
        assert!((xi.adjoint() * &v + v.adjoint() * &xi).norm() < 1e-10);
        assert!(re_inner(&g, &xi) <= 0.0);
        let bad = &v * real(1.1);
        assert!(matches!(tangent_project(&bad, &g), Err(Error::State(_))));
    }

    #[test]
    fn retraction_examples() {
        let two = CMat::identity(3, 3) * real(2.0);
        assert!((stiefel_retract(&two).unwrap() - CMat::identity(3, 3)).norm() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let q = linalg::random_unitary(3, &mut rng);
        assert!((stiefel_retract(&q).unwrap() - &q).norm() < 1e-12);
    }

    #[test]
    fn waterfill_matches_hand_solution() {
        // Gains 4 and 1 with budget 1: level ν solves (ν−1/4)+(ν−1)=1 only if
        // ν > 1, which it is not (ν = 1.125 > 1 holds): powers 0.875, 0.125.
        let x = waterfill(&[4.0, 1.0], 1.0);
        assert!((x[0] - 0.875).abs() < 1e-12 && (x[1] - 0.125).abs() < 1e-12);
        let x = waterfill(&[4.0, 1.0], 0.5);
        assert!((x[0] - 0.5).abs() < 1e-12 && x[1] == 0.0);
    }
}
