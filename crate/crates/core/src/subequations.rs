//! Angle subequations on Hermitian 2-jets: the spatial sets `Θ(Λ + A) >= c`,
//! the space-time sets `Φ~(Λ + A) >= c`, and their Dirichlet duals.
//!
//! Only purely second-order data is represented. The dual of a spec flips the
//! sign of both the branch and the twist, and membership in every kind is
//! "lifted angle of `twist + A` is at least `c`".

use std::f64::consts::FRAC_PI_2;

use crate::angles;
use crate::error::{Error, Result};
use crate::linalg::HermitianMatrix;

/// Upper end of the doubling search in [`strict_margin`].
const MARGIN_CAP: f64 = 1e12;

/// A real lift `c` of the phase, tied to the spatial complex dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub c: f64,
    pub n: usize,
}

impl Branch {
    /// Rejects `|c| >= (n+1) π/2`, beyond which no space-time angle reaches.
    pub fn new(c: f64, n: usize) -> Result<Self> {
        if n == 0 || !c.is_finite() {
            return Err(Error::Precondition(format!("invalid branch c={c}, n={n}")));
        }
        if c.abs() >= (n as f64 + 1.0) * FRAC_PI_2 {
            return Err(Error::Precondition(format!("|c| = {} is not below (n+1)π/2", c.abs())));
        }
        Ok(Branch { c, n })
    }

    /// `|c| < nπ/2`, needed for the spatial sets.
    pub fn is_spatial(&self) -> bool {
        self.c.abs() < self.n as f64 * FRAC_PI_2
    }

    /// `(n-1)π/2 < c < nπ/2`, where the space-time level sets are convex.
    pub fn in_regime(&self) -> bool {
        let n = self.n as f64;
        (n - 1.0) * FRAC_PI_2 < self.c && self.c < n * FRAC_PI_2
    }

    pub fn require_regime(&self) -> Result<()> {
        if self.in_regime() {
            Ok(())
        } else {
            let n = self.n as f64;
            Err(Error::Precondition(format!(
                "branch c = {} outside the regime ({}, {}) for n = {}",
                self.c,
                (n - 1.0) * FRAC_PI_2,
                n * FRAC_PI_2,
                self.n
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Spatial,
    SpatialDual,
    SpaceTime,
    SpaceTimeDual,
}

impl Kind {
    pub fn is_space_time(self) -> bool {
        matches!(self, Kind::SpaceTime | Kind::SpaceTimeDual)
    }

    fn dual(self) -> Kind {
        match self {
            Kind::Spatial => Kind::SpatialDual,
            Kind::SpatialDual => Kind::Spatial,
            Kind::SpaceTime => Kind::SpaceTimeDual,
            Kind::SpaceTimeDual => Kind::SpaceTime,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubeqSpec {
    pub kind: Kind,
    pub branch: Branch,
    /// `n x n` offset added to the spatial block before evaluating the angle.
    pub twist: HermitianMatrix,
    /// Singular-set band passed to the lifted angles.
    pub eps: f64,
}

impl SubeqSpec {
    pub fn new(kind: Kind, branch: Branch, twist: HermitianMatrix) -> Result<Self> {
        if twist.dim() != branch.n {
            return Err(Error::Shape(format!("twist is {0}x{0}, branch has n = {1}", twist.dim(), branch.n)));
        }
        if !kind.is_space_time() && !branch.is_spatial() {
            return Err(Error::Precondition(format!("spatial set needs |c| < nπ/2, got c = {}", branch.c)));
        }
        Ok(SubeqSpec { kind, branch, twist, eps: angles::DEFAULT_SINGULAR_EPS })
    }

    /// Spec with zero twist.
    pub fn untwisted(kind: Kind, branch: Branch) -> Result<Self> {
        Self::new(kind, branch, HermitianMatrix::zeros(branch.n))
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    /// Dimension of the jets this spec accepts.
    pub fn jet_dim(&self) -> usize {
        if self.kind.is_space_time() {
            self.branch.n + 1
        } else {
            self.branch.n
        }
    }

    fn shifted(&self, a: &HermitianMatrix) -> Result<HermitianMatrix> {
        if a.dim() != self.jet_dim() {
            return Err(Error::Shape(format!("jet is {0}x{0}, spec expects {1}", a.dim(), self.jet_dim())));
        }
        if self.kind.is_space_time() {
            Ok(a + &self.twist.embed_trailing()?)
        } else {
            Ok(a + &self.twist)
        }
    }

    /// The lifted angle of `twist + A` compared against `c` by [`member`].
    pub fn angle(&self, a: &HermitianMatrix) -> Result<f64> {
        let shifted = self.shifted(a)?;
        if self.kind.is_space_time() {
            Ok(angles::phi_lifted_usc(&shifted, self.eps)?.value)
        } else {
            angles::theta(&shifted)
        }
    }
}

pub fn member(spec: &SubeqSpec, a: &HermitianMatrix) -> Result<bool> {
    Ok(spec.angle(a)? >= spec.branch.c)
}

/// Certified lower bound on the Frobenius distance from `A` to the
/// complement: the largest `t` (to bisection accuracy) with `A - tI` still a
/// member. Every `B` with `|B - A|_op <= t` dominates `A - tI`, hence is a
/// member, and `|.|_op <= |.|_F`. `None` for non-members.
pub fn strict_margin(spec: &SubeqSpec, a: &HermitianMatrix) -> Result<Option<f64>> {
    if !member(spec, a)? {
        return Ok(None);
    }
    let id = HermitianMatrix::identity(a.dim());
    let inside = |t: f64| -> Result<bool> { member(spec, &(a - &(&id * t))) };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while inside(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > MARGIN_CAP {
            return Err(Error::Precondition("membership does not terminate along A - tI".into()));
        }
    }
    let tol = 1e-13 * (1.0 + a.norm());
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if inside(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// Dirichlet dual: negates branch and twist, flips the kind. Involutive.
pub fn dual_of(spec: &SubeqSpec) -> SubeqSpec {
    SubeqSpec {
        kind: spec.kind.dual(),
        branch: Branch { c: -spec.branch.c, n: spec.branch.n },
        twist: -&spec.twist,
        eps: spec.eps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;
    use std::f64::consts::PI;

    fn st(n: usize, c: f64) -> SubeqSpec {
        SubeqSpec::untwisted(Kind::SpaceTime, Branch::new(c, n).unwrap()).unwrap()
    }

    #[test]
    fn membership_examples() {
        let sp = SubeqSpec::untwisted(Kind::Spatial, Branch::new(0.0, 1).unwrap()).unwrap();
        assert!(member(&sp, &HermitianMatrix::zeros(1)).unwrap());
        assert!(member(&st(1, FRAC_PI_2), &HermitianMatrix::zeros(2)).unwrap());
        assert!(!member(&st(1, FRAC_PI_2 + 0.1), &HermitianMatrix::zeros(2)).unwrap());
    }

    #[test]
    fn twist_enters_spatial_block() {
        let branch = Branch::new(PI / 4.0 + 0.3, 1).unwrap();
        let twist = HermitianMatrix::from_real_diagonal(&[1.0]);
        let spec = SubeqSpec::new(Kind::Spatial, branch, twist.clone()).unwrap();
        let a = HermitianMatrix::from_real_diagonal(&[0.5]);
        assert_eq!(member(&spec, &a).unwrap(), 1.5f64.atan() >= branch.c);
        let stspec = SubeqSpec::new(Kind::SpaceTime, Branch::new(1.0, 1).unwrap(), twist).unwrap();
        // zero jet: usc value π/2 + atan(1)
        assert!((stspec.angle(&HermitianMatrix::zeros(2)).unwrap() - 3.0 * PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn margin_examples() {
        let spec = st(1, 1.0);
        let a0 = HermitianMatrix::from_real_diagonal(&[1.0, 2.0]);
        assert!(member(&spec, &a0).unwrap());
        let m0 = strict_margin(&spec, &a0).unwrap().unwrap();
        let m1 = strict_margin(&spec, &(&a0 + &HermitianMatrix::identity(2).scale(0.5))).unwrap().unwrap();
        assert!(m0 > 0.0);
        assert!((m1 - m0 - 0.5).abs() < 1e-10);
        let outside = HermitianMatrix::from_real_diagonal(&[-1.0, -2.0]);
        assert_eq!(strict_margin(&spec, &outside).unwrap(), None);
        // on the boundary: Φ(diag(x, x)) = atan-based, pick A with Φ = c
        let boundary = &a0 - &HermitianMatrix::identity(2).scale(m0);
        assert!(strict_margin(&spec, &boundary).unwrap().unwrap() < 1e-10);
    }

    #[test]
    fn spatial_margin_matches_closed_form() {
        // Θ(diag(x)) >= c  <=>  x >= tan c, so the margin is x - tan c
        let spec = SubeqSpec::untwisted(Kind::Spatial, Branch::new(0.4, 1).unwrap()).unwrap();
        let m = strict_margin(&spec, &HermitianMatrix::from_real_diagonal(&[2.0])).unwrap().unwrap();
        assert!((m - (2.0 - 0.4f64.tan())).abs() < 1e-11);
    }

    #[test]
    fn dual_is_involutive_and_negates() {
        let twist = HermitianMatrix::from_real_diagonal(&[0.3, -0.2]);
        let s = SubeqSpec::new(Kind::Spatial, Branch::new(0.5, 2).unwrap(), twist.clone()).unwrap();
        let d = dual_of(&s);
        assert_eq!(d.kind, Kind::SpatialDual);
        assert_eq!(d.branch.c, -0.5);
        assert_eq!(d.twist, -&twist);
        assert_eq!(dual_of(&d), s);
    }

    #[test]
    fn dual_membership_against_primal_interior() {
        let mut rng = sampling::rng(11);
        for n in [1, 2] {
            let twist = sampling::hermitian(&mut rng, n, 0.5);
            let spec = SubeqSpec::new(Kind::SpaceTime, Branch::new(0.4, n).unwrap(), twist).unwrap();
            let dual = dual_of(&spec);
            for k in 0..300 {
                let a = sampling::space_time(&mut rng, n, k % 10 == 0);
                let neg = -&a;
                if let Some(m) = strict_margin(&spec, &neg).unwrap() {
                    if m > 1e-8 {
                        assert!(!member(&dual, &a).unwrap());
                    }
                } else {
                    assert!(member(&dual, &a).unwrap());
                }
            }
        }
    }

    #[test]
    fn spatial_membership_reproduces_theta() {
        let mut rng = sampling::rng(12);
        let lambda = sampling::hermitian(&mut rng, 2, 1.0);
        let spec = SubeqSpec::new(Kind::Spatial, Branch::new(0.2, 2).unwrap(), lambda.clone()).unwrap();
        for _ in 0..100 {
            let hess = sampling::hermitian_mixed(&mut rng, 2);
            let direct = angles::theta(&(&lambda + &hess)).unwrap() >= 0.2;
            assert_eq!(member(&spec, &hess).unwrap(), direct);
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        let spec = st(1, 0.5);
        assert!(member(&spec, &HermitianMatrix::zeros(3)).is_err());
        assert!(Branch::new(PI, 1).is_err());
        assert!(SubeqSpec::untwisted(Kind::Spatial, Branch::new(2.0, 1).unwrap()).is_err());
    }
}
