//! Dense complex linear-algebra helpers shared by the channel, beamforming
//! and optimizer modules.
//!
//! Everything is built on `nalgebra` dynamic matrices over `Complex64`.
//! Hermitian eigendecompositions are returned in descending eigenvalue order,
//! which is the order every caller in this crate wants.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[inline]
pub fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `exp(j·phase)`.
#[inline]
pub fn cis(phase: f64) -> C64 {
    C64::from_polar(1.0, phase)
}

/// `(A + A^H) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// `(A - A^H) / 2`.
pub fn skew_part(a: &CMat) -> CMat {
    (a - a.adjoint()).scale(0.5)
}

/// Real part of the Frobenius inner product `Re tr(A^H B)`.
pub fn re_inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Squared Frobenius norm.
pub fn frob2(a: &CMat) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Real trace of a (nominally Hermitian) matrix.
pub fn trace_re(a: &CMat) -> f64 {
    a.diagonal().iter().map(|x| x.re).sum()
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. The input is symmetrized first.
pub fn eigh_desc(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let eig = hermitian_part(a).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Singular values in descending order.
pub fn singular_values(a: &CMat) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Orthonormal basis of the column space of `a`, keeping singular directions
/// above `rel_cut · σ_max`.
pub fn column_basis(a: &CMat, rel_cut: f64) -> CMat {
    let n = a.nrows();
    if a.ncols() == 0 || n == 0 {
        return CMat::zeros(n, 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return CMat::zeros(n, 0);
    }
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > rel_cut * smax)
        .collect();
    let mut basis = CMat::zeros(n, keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        basis.set_column(dst, &u.column(src));
    }
    basis
}

/// Orthogonal projector onto the column space of `a` (pseudo-inverse
/// semantics with relative cutoff `rel_cut`).
pub fn column_projector(a: &CMat, rel_cut: f64) -> CMat {
    let q = column_basis(a, rel_cut);
    &q * q.adjoint()
}

/// Polar factor `U_Z V_Z^H` of a square matrix. Returns `None` when the
/// smallest singular value is below `rel_tol · σ_max`.
pub fn polar_factor(z: &CMat, rel_tol: f64) -> Option<CMat> {
    let svd = z.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let smin = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if !(smax > 0.0) || smin <= rel_tol * smax {
        return None;
    }
    let u = svd.u?;
    let v_t = svd.v_t?;
    Some(u * v_t)
}

/// `ln det(A)` for a Hermitian positive-definite matrix, via Cholesky.
pub fn log_det_hpd(a: &CMat) -> Option<f64> {
    let chol = hermitian_part(a).cholesky()?;
    Some(chol.l().diagonal().iter().map(|d| 2.0 * d.re.ln()).sum())
}

/// Circularly-symmetric complex Gaussian sample with unit variance
/// (real and imaginary parts each `N(0, 1/2)`).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix with i.i.d. `CN(0, 1)` entries, filled column by column.
pub fn complex_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    let mut m = CMat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = complex_normal(rng);
        }
    }
    m
}

/// Haar-distributed unitary matrix (QR of a Gaussian matrix with the
/// phase ambiguity of `R` removed).
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let g = complex_normal_matrix(n, n, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

/// Completes the unit vector `v` to a unitary matrix whose first column is
/// `v`. The remaining columns come from Gram-Schmidt against `fill`.
pub fn complete_unitary(v: &CVec, fill: &CMat) -> CMat {
    let n = v.len();
    let mut q = CMat::zeros(n, n);
    q.set_column(0, &v.normalize());
    let mut filled = 1;
    for j in 0..fill.ncols() {
        if filled == n {
            break;
        }
        let mut c: CVec = fill.column(j).into_owned();
        for _ in 0..2 {
            for i in 0..filled {
                let qi = q.column(i);
                let proj = qi.dotc(&c);
                c -= qi * proj;
            }
        }
        let nrm = c.norm();
        if nrm > 1e-8 {
            q.set_column(filled, &(c / real(nrm)));
            filled += 1;
        }
    }
    assert_eq!(filled, n, "fill matrix does not span the complement");
    q
}

/// Squared distance from unitarity `‖Q^H Q − I‖_F`.
pub fn unitarity_error(q: &CMat) -> f64 {
    let n = q.ncols();
    (q.adjoint() * q - CMat::identity(n, n)).norm()
}

/// Diagonal complex matrix from real entries.
pub fn diag_real(d: &[f64]) -> CMat {
    let n = d.len();
    let mut m = CMat::zeros(n, n);
    for (i, &x) in d.iter().enumerate() {
        m[(i, i)] = real(x);
    }
    m
}

pub fn all_finite(a: &CMat) -> bool {
    a.iter().all(|x| x.re.is_finite() && x.im.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eigh_is_descending_and_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = complex_normal_matrix(5, 5, &mut rng);
        let a = &g * g.adjoint();
        let (vals, vecs) = eigh_desc(&a);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let rebuilt = &vecs * diag_real(&vals) * vecs.adjoint();
        assert!((rebuilt - a).norm() < 1e-10);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = random_unitary(6, &mut rng);
        assert!(unitarity_error(&q) < 1e-12);
    }

    #[test]
    fn polar_factor_rejects_singular() {
        let z = CMat::from_diagonal(&CVec::from_vec(vec![ONE, ZERO]));
        assert!(polar_factor(&z, 1e-12).is_none());
    }

    #[test]
    fn completion_keeps_first_column() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = complex_normal_matrix(4, 1, &mut rng).column(0).normalize();
        let q = complete_unitary(&v, &random_unitary(4, &mut rng));
        assert!(unitarity_error(&q) < 1e-12);
        assert!((q.column(0) - &v).norm() < 1e-12);
    }

    #[test]
    fn log_det_matches_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = complex_normal_matrix(4, 4, &mut rng);
        let a = &g * g.adjoint() + CMat::identity(4, 4);
        let (vals, _) = eigh_desc(&a);
        let expected: f64 = vals.iter().map(|v| v.ln()).sum();
        assert!((log_det_hpd(&a).unwrap() - expected).abs() < 1e-10);
    }
}
