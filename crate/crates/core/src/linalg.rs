//! Small dense complex matrix helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

pub type CMat = DMatrix<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);
pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn zeros(n: usize) -> CMat {
    CMat::zeros(n, n)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn anticommutator(a: &CMat, b: &CMat) -> CMat {
    a * b + b * a
}

/// Frobenius norm of `m - m†`.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    frobenius(&(m - m.adjoint()))
}

pub fn trace(m: &CMat) -> Complex64 {
    m.diagonal().iter().sum()
}

/// |u⟩⟨v| for basis indices of an n-dimensional space.
pub fn matrix_unit(n: usize, row: usize, col: usize) -> CMat {
    let mut m = zeros(n);
    m[(row, col)] = ONE;
    m
}

/// Eigenvalues of a Hermitian matrix (the anti-Hermitian part is discarded).
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let sym = (m + m.adjoint()).scale(0.5);
    let mut vals: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

pub fn min_hermitian_eigenvalue(m: &CMat) -> f64 {
    hermitian_eigenvalues(m)
        .first()
        .copied()
        .unwrap_or(0.0)
}

/// Operator 2-norm via the largest singular value.
pub fn operator_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

pub fn random_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    CMat::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let a = random_matrix(n, rng);
    (&a + a.adjoint()).scale(0.5)
}

/// Random full-rank density matrix A A† / Tr(A A†).
pub fn random_density<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let a = random_matrix(n, rng);
    let rho = &a * a.adjoint();
    let tr = trace(&rho);
    rho.map(|z| z / tr)
}

/// Column-major vectorization, matching nalgebra's storage order.
pub fn vec_of(m: &CMat) -> nalgebra::DVector<Complex64> {
    nalgebra::DVector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &nalgebra::DVector<Complex64>, n: usize) -> CMat {
    CMat::from_column_slice(n, n, v.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn vec_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_matrix(3, &mut rng);
        assert_eq!(unvec(&vec_of(&m), 3), m);
    }

    #[test]
    fn random_density_is_a_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = random_density(4, &mut rng);
        assert!((trace(&rho) - ONE).norm() < 1e-14);
        assert!(hermiticity_defect(&rho) < 1e-14);
        assert!(min_hermitian_eigenvalue(&rho) > 0.0);
    }

    #[test]
    fn operator_norm_of_unitary_is_one() {
        let u = CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        assert!((operator_norm(&u) - 1.0).abs() < 1e-14);
    }
}
