//! Lagrangian angle `Θ` and the space-time angle `Φ` with its upper and
//! lower semicontinuous lifts across the singular set `S`.
//!
//! Space-time matrices are carried in Hermitian `(n+1) x (n+1)` form
//! `[[a11, a1], [a1^*, A+]]`; the degenerate identity is `I0 = diag(0, 1, .., 1)`.
//! `S` is the set where the first row and column vanish.
//!
//! Two routes compute `Φ` off `S`:
//! - [`phi_regular`] sums the principal arguments of the eigenvalues of
//!   `I0 + iA` (all in the closed right half-plane);
//! - [`phi_bordered`] uses the Schur-complement factorisation
//!   `det(I0 + iA) = det(I + iA+) * w` with `w = i a11 + a1 (I + iA+)^{-1} a1^*`,
//!   so `Φ = Θ(A+) + arg w` where `Re w >= 0` holds term by term.
//!
//! The lifts use the bordered route; the two routes agree off `S`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, HermitianMatrix};

/// Default half-width of the numerical band around `S`, relative to `1 + |A|_F`.
pub const DEFAULT_SINGULAR_EPS: f64 = 1e-10;

/// Eigenvalues with `|Re mu|` below this are treated as lying on the imaginary axis.
pub const AXIS_TOL: f64 = 1e-12;

/// `|mu|` (or `|w|`) below this defers the regular formula to the singular one.
pub const ZERO_EIGEN_TOL: f64 = 1e-14;

/// Real parts below `-NEGATIVE_RE_TOL * (1 + |A|_F)` are reported as corrupt input.
pub const NEGATIVE_RE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngleTag {
    Regular,
    SingularUpper,
    SingularLower,
}

impl AngleTag {
    pub fn as_str(self) -> &'static str {
        match self {
            AngleTag::Regular => "regular",
            AngleTag::SingularUpper => "singular-upper",
            AngleTag::SingularLower => "singular-lower",
        }
    }

    pub fn is_regular(self) -> bool {
        self == AngleTag::Regular
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftedAngle {
    pub value: f64,
    pub tag: AngleTag,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularityReport {
    pub in_s: bool,
    pub a11: f64,
    pub a1_norm: f64,
    pub threshold: f64,
}

/// `Σ arctan λ_k` over the eigenvalues of `H`.
pub fn theta(h: &HermitianMatrix) -> Result<f64> {
    Ok(linalg::eig_hermitian(h)?.into_iter().map(f64::atan).sum())
}

/// Angle of a real symmetric `2n x 2n` matrix through its J-invariant part.
pub fn theta_symmetric(a: &DMatrix<f64>) -> Result<f64> {
    let p = linalg::jproject(a)?;
    theta(&linalg::hermitian_of(&p))
}

/// `sqrt(Π (1 + λ_k^2)) = |det(I + iH)|`.
pub fn modulus_r(h: &HermitianMatrix) -> Result<f64> {
    let prod: f64 = linalg::eig_hermitian(h)?.into_iter().map(|l| 1.0 + l * l).product();
    Ok(prod.sqrt())
}

pub fn classify_singular(a: &HermitianMatrix, eps: f64) -> SingularityReport {
    let a11 = a.get(0, 0).re;
    let a1_norm = a.first_row_tail().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let threshold = eps * (1.0 + a.norm());
    SingularityReport {
        in_s: a11.abs() <= threshold && a1_norm <= threshold,
        a11,
        a1_norm,
        threshold,
    }
}

fn require_space_time(a: &HermitianMatrix) -> Result<()> {
    if a.dim() < 2 {
        return Err(Error::Shape("space-time matrix needs dimension n+1 >= 2".into()));
    }
    Ok(())
}

/// Principal argument of an eigenvalue known to satisfy `Re mu >= 0`.
fn half_plane_arg(mu: Complex64) -> f64 {
    if mu.re < AXIS_TOL {
        FRAC_PI_2.copysign(mu.im)
    } else {
        mu.im.atan2(mu.re)
    }
}

/// `Σ arg μ_i` over the eigenvalues of `I0 + iA`.
pub fn phi_regular(a: &HermitianMatrix) -> Result<f64> {
    require_space_time(a)?;
    let b = ComplexMatrix::shifted_i(a, 0.0);
    let mus = linalg::eig_complex(&b)?;
    let scale = 1.0 + a.norm();
    let mut sum = 0.0;
    for mu in mus {
        if mu.re < -NEGATIVE_RE_TOL * scale {
            return Err(Error::NegativeRealPart { re: mu.re });
        }
        if mu.norm() < ZERO_EIGEN_TOL {
            return Err(Error::OnSingularSet);
        }
        sum += half_plane_arg(mu);
    }
    Ok(sum)
}

/// The factors of `det(I^eta + iA) = det(I + iA+) * w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BorderedFactors {
    /// `Θ(A+)`, the lifted argument of `det(I + iA+)`.
    pub theta_plus: f64,
    /// `eta + i a11 + a1 (I + iA+)^{-1} a1^*`, with `Re w >= eta >= 0`.
    pub w: Complex64,
}

impl BorderedFactors {
    pub fn angle(&self) -> f64 {
        self.theta_plus + self.w.im.atan2(self.w.re)
    }
}

/// Schur-complement factors of `I^eta + iA`, computed in the eigenbasis of
/// `A+` so the real part of `w` is a sum of non-negative terms.
pub fn bordered_factors(a: &HermitianMatrix, eta: f64) -> Result<BorderedFactors> {
    require_space_time(a)?;
    let plus = a.trailing()?;
    let a1 = a.first_row_tail();
    let (lambdas, u) = linalg::eigh(&plus)?;
    let mut re = eta;
    let mut im = a.get(0, 0).re;
    for (k, &l) in lambdas.iter().enumerate() {
        // c_k = (U^* a1^*)_k
        let ck: Complex64 = (0..a1.len()).map(|j| u[(j, k)].conj() * a1[j].conj()).sum();
        let weight = ck.norm_sqr() / (1.0 + l * l);
        re += weight;
        im -= weight * l;
    }
    Ok(BorderedFactors {
        theta_plus: lambdas.iter().map(|l| l.atan()).sum(),
        w: Complex64::new(re, im),
    })
}

/// `Θ(A+) + arg w`; errors on `w = 0`, which happens exactly on `S`.
pub fn phi_bordered(a: &HermitianMatrix) -> Result<f64> {
    let f = bordered_factors(a, 0.0)?;
    if f.w.norm() < ZERO_EIGEN_TOL {
        return Err(Error::OnSingularSet);
    }
    Ok(f.angle())
}

fn phi_lifted(a: &HermitianMatrix, eps: f64, upper: bool) -> Result<LiftedAngle> {
    require_space_time(a)?;
    let report = classify_singular(a, eps);
    let singular = |theta_plus: f64| {
        if upper {
            LiftedAngle { value: FRAC_PI_2 + theta_plus, tag: AngleTag::SingularUpper }
        } else {
            LiftedAngle { value: -FRAC_PI_2 + theta_plus, tag: AngleTag::SingularLower }
        }
    };
    if report.in_s {
        return Ok(singular(theta(&a.trailing()?)?));
    }
    let f = bordered_factors(a, 0.0)?;
    if f.w.norm() < ZERO_EIGEN_TOL {
        // numerical boundary of S: the semicontinuous extension decides
        return Ok(singular(f.theta_plus));
    }
    Ok(LiftedAngle { value: f.angle(), tag: AngleTag::Regular })
}

/// Upper semicontinuous lift `Φ~`.
pub fn phi_lifted_usc(a: &HermitianMatrix, eps: f64) -> Result<LiftedAngle> {
    phi_lifted(a, eps, true)
}

/// Lower semicontinuous lift.
pub fn phi_lifted_lsc(a: &HermitianMatrix, eps: f64) -> Result<LiftedAngle> {
    phi_lifted(a, eps, false)
}

/// `Θ~(A_eta)` with `A_eta = I^eta A I^eta`, evaluated on the real symmetric
/// form; as `eta -> ∞` this tends to `Φ(A)` off `S`.
pub fn eta_squeeze(a: &HermitianMatrix, eta: f64) -> Result<f64> {
    require_space_time(a)?;
    let mut d = vec![1.0; a.dim()];
    d[0] = eta;
    let squeezed = a.congruence_diag(&d);
    theta_symmetric(linalg::iota(&squeezed).as_matrix())
}

/// Smallest real part among the eigenvalues of `I^eta + iA`.
pub fn realpart_spectrum_check(a: &HermitianMatrix, eta: f64) -> Result<f64> {
    let b = ComplexMatrix::shifted_i(a, eta);
    Ok(linalg::eig_complex(&b)?.into_iter().map(|mu| mu.re).fold(f64::INFINITY, f64::min))
}

/// `Φ~(A) - Θ(A+)`, always within `[-π/2, π/2]`.
pub fn slice_angle_gap(a: &HermitianMatrix, eps: f64) -> Result<f64> {
    Ok(phi_lifted_usc(a, eps)?.value - theta(&a.trailing()?)?)
}

/// `Im(e^{-ic} det(I0 + iA))`, the determinant form of the space-time equation.
pub fn det_residual(a: &HermitianMatrix, c: f64) -> f64 {
    let det = ComplexMatrix::shifted_i(a, 0.0).determinant();
    (Complex64::from_polar(1.0, -c) * det).im
}
