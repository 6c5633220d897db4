//! Hermitian matrices, their J-invariant real symmetric images, and the
//! small dense spectral primitives the angle operators are built on.
//!
//! Real coordinates on `C^n = R^{2n}` are ordered `(x_1..x_n, y_1..y_n)` and
//! the complex structure is `J = [[0, -I], [I, 0]]` in that basis. A Hermitian
//! `H = A1 + i A2` embeds as `iota(H) = [[A1, A2], [-A2, A1]]`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::linalg::{Schur, SymmetricEigen};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest matrix dimension accepted anywhere in the crate.
pub const MAX_DIM: usize = 8;

/// Absolute floor for relative tolerances on O(1) matrices.
pub const TOL_FLOOR: f64 = 1e-12;

const EIGEN_MAX_ITER: usize = 10_000;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn check_dim(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Shape("empty matrix".into()));
    }
    if n > MAX_DIM {
        return Err(Error::DimensionTooLarge(n));
    }
    Ok(())
}

/// Complex self-adjoint `n x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(DMatrix<Complex64>);

impl HermitianMatrix {
    /// Validates self-adjointness to `1e-12 * max(1, |H|_F)` and symmetrizes
    /// away the round-off.
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Shape(format!("{}x{} is not square", m.nrows(), m.ncols())));
        }
        check_dim(m.nrows())?;
        let tolerance = TOL_FLOOR * m.norm().max(1.0);
        let deviation = (&m - m.adjoint()).camax();
        if !deviation.is_finite() || deviation > tolerance {
            return Err(Error::NotSelfAdjoint { deviation, tolerance });
        }
        Ok(Self::symmetrized(m))
    }

    /// Builds from a matrix already known to be Hermitian up to round-off.
    pub(crate) fn symmetrized(m: DMatrix<Complex64>) -> Self {
        let h = (&m + m.adjoint()).scale(0.5);
        HermitianMatrix(h)
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> Complex64) -> Result<Self> {
        check_dim(n)?;
        Self::new(DMatrix::from_fn(n, n, f))
    }

    pub fn zeros(n: usize) -> Self {
        HermitianMatrix(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        HermitianMatrix(DMatrix::identity(n, n))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        HermitianMatrix(DMatrix::from_fn(n, n, |j, k| {
            if j == k {
                Complex64::new(d[j], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.0[(j, k)]
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        HermitianMatrix(self.0.scale(s))
    }

    /// Trailing block with the first row and column removed.
    pub fn trailing(&self) -> Result<Self> {
        let n = self.dim();
        if n < 2 {
            return Err(Error::Shape("no trailing block of a 1x1 matrix".into()));
        }
        Ok(HermitianMatrix(self.0.view((1, 1), (n - 1, n - 1)).into_owned()))
    }

    /// First row tail `(h_01, .., h_0n)`.
    pub fn first_row_tail(&self) -> Vec<Complex64> {
        (1..self.dim()).map(|k| self.0[(0, k)]).collect()
    }

    /// Embeds an `n x n` block as the trailing block of an `(n+1) x (n+1)`
    /// matrix with zero first row and column.
    pub fn embed_trailing(&self) -> Result<Self> {
        let n = self.dim();
        check_dim(n + 1)?;
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m.view_mut((1, 1), (n, n)).copy_from(&self.0);
        Ok(HermitianMatrix(m))
    }

    /// Assembles `[[a11, a1], [a1^*, plus]]`.
    pub fn bordered(a11: f64, a1: &[Complex64], plus: &HermitianMatrix) -> Result<Self> {
        let n = plus.dim();
        if a1.len() != n {
            return Err(Error::Shape(format!("border length {} vs block {}", a1.len(), n)));
        }
        check_dim(n + 1)?;
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m[(0, 0)] = Complex64::new(a11, 0.0);
        for k in 0..n {
            m[(0, k + 1)] = a1[k];
            m[(k + 1, 0)] = a1[k].conj();
        }
        m.view_mut((1, 1), (n, n)).copy_from(&plus.0);
        Ok(HermitianMatrix(m))
    }

    /// Congruence by `diag(d_0, .., d_{n-1})` with real entries.
    pub fn congruence_diag(&self, d: &[f64]) -> Self {
        let n = self.dim();
        HermitianMatrix(DMatrix::from_fn(n, n, |j, k| self.0[(j, k)] * (d[j] * d[k])))
    }
}

impl Add for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix(&self.0 - &rhs.0)
    }
}

impl Neg for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn neg(self) -> HermitianMatrix {
        HermitianMatrix(-&self.0)
    }
}

impl Mul<f64> for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn mul(self, s: f64) -> HermitianMatrix {
        self.scale(s)
    }
}

/// Real symmetric `2n x 2n` matrix commuting with `J`.
#[derive(Debug, Clone, PartialEq)]
pub struct JInvariantSymmetric(DMatrix<f64>);

impl JInvariantSymmetric {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_real_symmetric(&m)?;
        let tol = TOL_FLOOR * m.norm().max(1.0);
        let j = j_matrix(m.nrows() / 2);
        let deviation = (j.transpose() * &m * &j - &m).amax();
        if deviation > tol {
            return Err(Error::NotJInvariant { deviation });
        }
        Ok(JInvariantSymmetric(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

/// General complex square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<Complex64>);

impl ComplexMatrix {
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Shape(format!("{}x{} is not square", m.nrows(), m.ncols())));
        }
        check_dim(m.nrows())?;
        Ok(ComplexMatrix(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn determinant(&self) -> Complex64 {
        self.0.clone().lu().determinant()
    }

    /// `I^eta + i H` where `I^eta = diag(eta, 1, .., 1)`.
    pub fn shifted_i(h: &HermitianMatrix, eta: f64) -> Self {
        let n = h.dim();
        let mut m = h.as_matrix().map(|z| z * I);
        for k in 0..n {
            m[(k, k)] += if k == 0 { eta } else { 1.0 };
        }
        ComplexMatrix(m)
    }
}

fn check_real_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!("{}x{} is not square", m.nrows(), m.ncols())));
    }
    if !m.nrows().is_multiple_of(2) || m.nrows() == 0 {
        return Err(Error::Shape(format!("real dimension {} is not a positive even number", m.nrows())));
    }
    check_dim(m.nrows() / 2)?;
    let deviation = (m - m.transpose()).amax();
    if !deviation.is_finite() || deviation > TOL_FLOOR * m.norm().max(1.0) {
        return Err(Error::NotSymmetric { deviation });
    }
    Ok(())
}

/// The complex structure `[[0, -I], [I, 0]]` on `R^{2n}`.
pub fn j_matrix(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        j[(k, n + k)] = -1.0;
        j[(n + k, k)] = 1.0;
    }
    j
}

pub fn iota(h: &HermitianMatrix) -> JInvariantSymmetric {
    let n = h.dim();
    let m = h.as_matrix();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        for k in 0..n {
            let z = m[(j, k)];
            out[(j, k)] = z.re;
            out[(n + j, n + k)] = z.re;
            out[(j, n + k)] = z.im;
            out[(n + j, k)] = -z.im;
        }
    }
    JInvariantSymmetric(out)
}

/// Projection `(N + J^T N J) / 2` onto the J-invariant part.
pub fn jproject(m: &DMatrix<f64>) -> Result<JInvariantSymmetric> {
    check_real_symmetric(m)?;
    let j = j_matrix(m.nrows() / 2);
    let p = (m + j.transpose() * m * &j).scale(0.5);
    // exact symmetry for downstream eigen solvers
    let p = (&p + p.transpose()).scale(0.5);
    Ok(JInvariantSymmetric(p))
}

/// Inverse of [`iota`] on its image.
pub fn hermitian_of(n: &JInvariantSymmetric) -> HermitianMatrix {
    let half = n.dim() / 2;
    let m = n.as_matrix();
    HermitianMatrix::symmetrized(DMatrix::from_fn(half, half, |j, k| {
        Complex64::new(m[(j, k)], m[(j, half + k)])
    }))
}

/// Real eigenvalues in ascending order.
pub fn eig_hermitian(h: &HermitianMatrix) -> Result<Vec<f64>> {
    let mut vals = match h.dim() {
        1 => vec![h.get(0, 0).re],
        2 => {
            let (lo, hi) = eig_hermitian_2x2(h.get(0, 0).re, h.get(0, 1), h.get(1, 1).re);
            vec![lo, hi]
        }
        _ => {
            let eig = SymmetricEigen::try_new(h.as_matrix().clone(), f64::EPSILON, EIGEN_MAX_ITER)
                .ok_or(Error::EigenNonConvergence)?;
            eig.eigenvalues.iter().copied().collect()
        }
    };
    vals.sort_by(|a, b| a.total_cmp(b));
    Ok(vals)
}

/// Eigen-decomposition `H = U diag(lambda) U^*`, eigenvalues unsorted.
pub fn eigh(h: &HermitianMatrix) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let eig = SymmetricEigen::try_new(h.as_matrix().clone(), f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(Error::EigenNonConvergence)?;
    Ok((eig.eigenvalues.iter().copied().collect(), eig.eigenvectors))
}

/// Eigenvalues of `[[p, q], [conj q, r]]` as `(lower, upper)`.
pub fn eig_hermitian_2x2(p: f64, q: Complex64, r: f64) -> (f64, f64) {
    let mean = 0.5 * (p + r);
    let half_gap = (0.5 * (p - r)).hypot(q.norm());
    let upper = mean + half_gap;
    // the smaller-magnitude root via the product avoids cancellation
    let det = p * r - q.norm_sqr();
    if upper.abs() > 0.0 && mean >= 0.0 {
        (det / upper, upper)
    } else {
        let lower = mean - half_gap;
        if lower.abs() > 0.0 {
            (lower, det / lower)
        } else {
            (lower, upper)
        }
    }
}

/// Real eigenvalues of a real symmetric matrix, ascending.
pub fn eig_symmetric(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(Error::EigenNonConvergence)?;
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    Ok(vals)
}

/// Complex eigenvalues of a general matrix, in no particular order.
pub fn eig_complex(b: &ComplexMatrix) -> Result<Vec<Complex64>> {
    let schur = Schur::try_new(b.as_matrix().clone(), f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(Error::EigenNonConvergence)?;
    let vals = schur.eigenvalues().ok_or(Error::EigenNonConvergence)?;
    Ok(vals.iter().copied().collect())
}

/// `det(B+) * (eta + i a11 + a1 B+^{-1} a1^*)`, the determinant of the
/// bordered matrix `[[eta + i a11, i a1], [i a1^*, B+]]` expanded along its
/// Schur complement.
pub fn bordered_det(b_plus: &ComplexMatrix, a11: Complex64, a1: &[Complex64], eta: f64) -> Result<Complex64> {
    let n = b_plus.dim();
    if a1.len() != n {
        return Err(Error::Shape(format!("border length {} vs block {}", a1.len(), n)));
    }
    let lu = b_plus.as_matrix().clone().lu();
    let det_plus = lu.determinant();
    let scale = b_plus.as_matrix().norm().max(1.0).powi(n as i32);
    if !(det_plus.norm() > TOL_FLOOR * scale) {
        return Err(Error::Singular("B+ is not invertible".into()));
    }
    let rhs = DMatrix::from_fn(n, 1, |k, _| a1[k].conj());
    let x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("B+ solve failed".into()))?;
    let quad: Complex64 = (0..n).map(|k| a1[k] * x[(k, 0)]).sum();
    Ok(det_plus * (Complex64::new(eta, 0.0) + I * a11 + quad))
}

/// The full bordered matrix whose determinant [`bordered_det`] expands.
pub fn bordered_matrix(b_plus: &ComplexMatrix, a11: Complex64, a1: &[Complex64], eta: f64) -> Result<ComplexMatrix> {
    let n = b_plus.dim();
    if a1.len() != n {
        return Err(Error::Shape(format!("border length {} vs block {}", a1.len(), n)));
    }
    check_dim(n + 1)?;
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m[(0, 0)] = Complex64::new(eta, 0.0) + I * a11;
    for k in 0..n {
        m[(0, k + 1)] = I * a1[k];
        m[(k + 1, 0)] = I * a1[k].conj();
    }
    m.view_mut((1, 1), (n, n)).copy_from(b_plus.as_matrix());
    ComplexMatrix::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample() -> HermitianMatrix {
        HermitianMatrix::new(DMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(1.0, 1.0), c(1.0, -1.0), c(3.0, 0.0)])).unwrap()
    }

    #[test]
    fn iota_scalar_and_zero() {
        let one = iota(&HermitianMatrix::identity(1));
        assert_eq!(one.as_matrix(), &DMatrix::<f64>::identity(2, 2));
        let zero = iota(&HermitianMatrix::zeros(1));
        assert_eq!(zero.as_matrix(), &DMatrix::<f64>::zeros(2, 2));
    }

    #[test]
    fn iota_two_by_two_blocks() {
        // A1 = [[2,1],[1,3]], A2 = [[0,1],[-1,0]] expanded by hand
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                2.0, 1.0, 0.0, 1.0, //
                1.0, 3.0, -1.0, 0.0, //
                0.0, -1.0, 2.0, 1.0, //
                1.0, 0.0, 1.0, 3.0,
            ],
        );
        assert_eq!(iota(&sample()).as_matrix(), &expected);
    }

    #[test]
    fn rejects_non_self_adjoint() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(HermitianMatrix::new(m), Err(Error::NotSelfAdjoint { .. })));
    }

    #[test]
    fn dimension_cap() {
        assert!(matches!(HermitianMatrix::from_fn(9, |_, _| c(0.0, 0.0)), Err(Error::DimensionTooLarge(9))));
    }

    #[test]
    fn jproject_examples() {
        let h = sample();
        let n = iota(&h);
        assert_eq!(jproject(n.as_matrix()).unwrap(), n);
        let mut e = DMatrix::zeros(4, 4);
        e[(0, 0)] = 1.0;
        let expected = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, 0.0, 0.5, 0.0]));
        assert_eq!(jproject(&e).unwrap().as_matrix(), &expected);
        assert_eq!(jproject(&DMatrix::zeros(4, 4)).unwrap().as_matrix(), &DMatrix::<f64>::zeros(4, 4));
        assert!(matches!(jproject(&DMatrix::zeros(3, 3)), Err(Error::Shape(_))));
    }

    #[test]
    fn hermitian_of_examples() {
        let id = JInvariantSymmetric::new(DMatrix::identity(4, 4)).unwrap();
        assert_eq!(hermitian_of(&id), HermitianMatrix::identity(2));
        let h = HermitianMatrix::new(DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.0)])).unwrap();
        assert_eq!(hermitian_of(&iota(&h)), h);
        let mut bad = DMatrix::zeros(4, 4);
        bad[(0, 0)] = 1.0;
        assert!(matches!(JInvariantSymmetric::new(bad), Err(Error::NotJInvariant { .. })));
    }

    #[test]
    fn eig_hermitian_examples() {
        assert_eq!(eig_hermitian(&HermitianMatrix::identity(3)).unwrap(), vec![1.0; 3]);
        assert_eq!(eig_hermitian(&HermitianMatrix::from_real_diagonal(&[5.0, -2.0])).unwrap(), vec![-2.0, 5.0]);
        // characteristic polynomial of the sample: l^2 - 5l + 4
        let v = eig_hermitian(&sample()).unwrap();
        assert_relative_eq!(v[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(v[1], 4.0, epsilon = 1e-14);
    }

    #[test]
    fn eig_complex_examples() {
        let id = ComplexMatrix::new(DMatrix::identity(3, 3)).unwrap();
        for mu in eig_complex(&id).unwrap() {
            assert!((mu - c(1.0, 0.0)).norm() < 1e-14);
        }
        let d = ComplexMatrix::new(DMatrix::from_row_slice(2, 2, &[c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)])).unwrap();
        let mut mus = eig_complex(&d).unwrap();
        mus.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((mus[0] - c(0.0, 1.0)).norm() < 1e-14);
        assert!((mus[1] - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn bordered_det_examples() {
        let one = ComplexMatrix::new(DMatrix::identity(1, 1)).unwrap();
        let d = bordered_det(&one, c(1.0, 0.0), &[c(0.0, 0.0)], 0.0).unwrap();
        assert!((d - I).norm() < 1e-15);
        let bp = ComplexMatrix::new(DMatrix::from_row_slice(2, 2, &[c(1.0, 2.0), c(0.5, 0.0), c(0.0, 1.0), c(3.0, -1.0)])).unwrap();
        let d = bordered_det(&bp, c(0.0, 0.0), &[c(0.0, 0.0); 2], 1.0).unwrap();
        assert!((d - bp.determinant()).norm() < 1e-13);
        let zero = ComplexMatrix::new(DMatrix::zeros(2, 2)).unwrap();
        assert!(matches!(bordered_det(&zero, c(0.0, 0.0), &[c(1.0, 0.0); 2], 0.0), Err(Error::Singular(_))));
    }

    #[test]
    fn two_by_two_closed_form_matches_nalgebra() {
        let h = sample();
        let (vals, _) = eigh(&h).unwrap();
        let mut vals = vals;
        vals.sort_by(|a, b| a.total_cmp(b));
        let (lo, hi) = eig_hermitian_2x2(2.0, c(1.0, 1.0), 3.0);
        assert_relative_eq!(lo, vals[0], epsilon = 1e-13);
        assert_relative_eq!(hi, vals[1], epsilon = 1e-13);
        let (lo, hi) = eig_hermitian_2x2(-1e-9, c(0.0, 0.0), -3.0);
        assert_eq!((lo, hi), (-3.0, -1e-9));
    }
}
