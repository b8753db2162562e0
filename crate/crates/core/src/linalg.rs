//! Small dense complex matrix helpers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<Complex64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn zeros(d: usize) -> CMat {
    CMat::zeros(d, d)
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn dagger(a: &CMat) -> CMat {
    a.adjoint()
}

pub fn trace(a: &CMat) -> C64 {
    a.trace()
}

/// `Tr[a b]` without forming the product.
pub fn trace_of_product(a: &CMat, b: &CMat) -> C64 {
    let d = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for k in 0..d {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn anticommutator(a: &CMat, b: &CMat) -> CMat {
    a * b + b * a
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Largest absolute entry.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn distance(a: &CMat, b: &CMat) -> f64 {
    max_abs(&(a - b))
}

pub fn is_hermitian(a: &CMat, tol: f64) -> bool {
    a.is_square() && distance(a, &a.adjoint()) <= tol
}

pub fn is_unitary(a: &CMat, tol: f64) -> bool {
    a.is_square() && distance(&(a.adjoint() * a), &identity(a.nrows())) <= tol
}

/// Eigenvalues of the Hermitian part of `a`, ascending.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    if a.nrows() == 2 && a.ncols() == 2 {
        let (p, q) = (a[(0, 0)].re, a[(1, 1)].re);
        let b = (a[(0, 1)] + a[(1, 0)].conj()) * 0.5;
        let mid = 0.5 * (p + q);
        let r = (0.25 * (p - q) * (p - q) + b.norm_sqr()).sqrt();
        return vec![mid - r, mid + r];
    }
    let mut v: Vec<f64> = SymmetricEigen::new(hermitian_part(a))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(|x, y| x.total_cmp(y));
    v
}

pub fn min_eigenvalue(a: &CMat) -> f64 {
    hermitian_eigenvalues(a).first().copied().unwrap_or(0.0)
}

/// Spectral norm of a Hermitian positive matrix such as `L†L`.
pub fn max_eigenvalue(a: &CMat) -> f64 {
    hermitian_eigenvalues(a).last().copied().unwrap_or(0.0)
}

pub fn trace_distance(a: &CMat, b: &CMat) -> f64 {
    0.5 * hermitian_eigenvalues(&(a - b))
        .iter()
        .map(|x| x.abs())
        .sum::<f64>()
}

pub fn purity(rho: &CMat) -> f64 {
    trace_of_product(rho, rho).re
}

/// Column-major vectorization: `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.
pub fn vectorize(a: &CMat) -> DVector<C64> {
    DVector::from_column_slice(a.as_slice())
}

pub fn unvectorize(v: &DVector<C64>, d: usize) -> CMat {
    CMat::from_column_slice(d, d, v.as_slice())
}

/// Superoperator matrix of `X ↦ A X B`.
pub fn superop(a: &CMat, b: &CMat) -> CMat {
    b.transpose().kronecker(a)
}

/// Eigen-decomposition of a Hermitian positive matrix as weighted pure states,
/// dropping components below `cutoff`.
pub fn pure_components(rho: &CMat, cutoff: f64) -> Vec<(f64, DVector<C64>)> {
    let eig = SymmetricEigen::new(hermitian_part(rho));
    (0..rho.nrows())
        .filter(|&k| eig.eigenvalues[k] > cutoff)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned()))
        .collect()
}

pub fn projector(psi: &DVector<C64>) -> CMat {
    psi * psi.adjoint()
}

/// Checks Hermitian, positive semidefinite and unit trace.
pub fn check_density_matrix(rho: &CMat, tol: f64) -> Result<(), String> {
    if !rho.is_square() {
        return Err(format!("matrix is {}x{}, not square", rho.nrows(), rho.ncols()));
    }
    if !is_hermitian(rho, tol) {
        return Err("matrix is not Hermitian".into());
    }
    let tr = trace(rho);
    if (tr.re - 1.0).abs() > tol {
        return Err(format!("trace is {} instead of 1", tr.re));
    }
    let lo = min_eigenvalue(rho);
    if lo < -tol {
        return Err(format!("minimum eigenvalue {lo} is negative"));
    }
    Ok(())
}

/// Builds a matrix from rows of complex entries.
pub fn from_rows(rows: &[Vec<C64>]) -> CMat {
    let r = rows.len();
    let cols = rows.first().map_or(0, |x| x.len());
    CMat::from_fn(r, cols, |i, j| rows[i][j])
}

pub fn real_matrix(d: usize, entries: &[f64]) -> CMat {
    CMat::from_fn(d, d, |i, j| c(entries[i * d + j], 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_of_product_matches_full_product() {
        let a = CMat::from_fn(3, 3, |i, j| c(i as f64 + 0.5, j as f64 - 1.0));
        let b = CMat::from_fn(3, 3, |i, j| c((i * j) as f64, 0.25 * i as f64));
        let direct = (&a * &b).trace();
        assert!((trace_of_product(&a, &b) - direct).norm() < 1e-12);
    }

    #[test]
    fn superop_vectorization_identity() {
        let a = CMat::from_fn(2, 2, |i, j| c(i as f64 + 1.0, j as f64));
        let b = CMat::from_fn(2, 2, |i, j| c(j as f64 - 0.5, i as f64 + 2.0));
        let x = CMat::from_fn(2, 2, |i, j| c((i + 2 * j) as f64, -1.0));
        let lhs = vectorize(&(&a * &x * &b));
        let rhs = superop(&a, &b) * vectorize(&x);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn trace_distance_of_orthogonal_pure_states_is_one() {
        let g = real_matrix(2, &[1.0, 0.0, 0.0, 0.0]);
        let e = real_matrix(2, &[0.0, 0.0, 0.0, 1.0]);
        assert!((trace_distance(&g, &e) - 1.0).abs() < 1e-12);
        assert!((purity(&(g.scale(0.5) + e.scale(0.5))) - 0.5).abs() < 1e-12);
    }
}
