//! Flat-torus background: `ω` is the identity, `α = A0 + i∂∂̄ψ_α`, and
//! `Λ_φ = A0 + i∂∂̄(ψ_α + φ)` is evaluated with central differences on a
//! periodic grid of period 1 in every real coordinate.
//!
//! Axes are ordered `(x_1..x_n, y_1..y_n)`. An axis of size 1 is an invariant
//! direction: every difference along it vanishes.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;

use crate::angles;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::gridfile::Grid;
use crate::linalg::{ComplexMatrix, HermitianMatrix};
use crate::subequations::Branch;

/// Potentials live on the torus grid of a [`TorusGeometry`].
pub type PotentialGrid = Grid;

/// Rejects `|Z_X|` below this after quadrature.
pub const Z_MIN: f64 = 1e-8;

/// Wrapped neighbour tables for a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusIndex {
    pub dims: Vec<usize>,
    pub h: Vec<f64>,
    plus: Vec<Vec<u32>>,
    minus: Vec<Vec<u32>>,
}

impl TorusIndex {
    pub fn new(dims: &[usize]) -> Self {
        let len: usize = dims.iter().product();
        let mut strides = vec![1usize; dims.len()];
        for a in (0..dims.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * dims[a + 1];
        }
        let table = |delta: isize| -> Vec<Vec<u32>> {
            (0..dims.len())
                .map(|a| {
                    (0..len)
                        .map(|p| {
                            let i = (p / strides[a]) % dims[a];
                            let j = (i as isize + delta).rem_euclid(dims[a] as isize) as usize;
                            (p - i * strides[a] + j * strides[a]) as u32
                        })
                        .collect()
                })
                .collect()
        };
        TorusIndex {
            dims: dims.to_vec(),
            h: dims.iter().map(|&d| 1.0 / d as f64).collect(),
            plus: table(1),
            minus: table(-1),
        }
    }

    pub fn len(&self) -> usize {
        self.plus.first().map_or(1, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn plus(&self, axis: usize, p: usize) -> usize {
        self.plus[axis][p] as usize
    }

    #[inline]
    pub fn minus(&self, axis: usize, p: usize) -> usize {
        self.minus[axis][p] as usize
    }

    /// Coordinates of flat index `p`, each in `[0, 1)`.
    pub fn coords(&self, p: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dims.len()];
        let mut rest = p;
        for a in (0..self.dims.len()).rev() {
            out[a] = (rest % self.dims[a]) as f64 * self.h[a];
            rest /= self.dims[a];
        }
        out
    }

    /// Central second difference along `a` (`a == b`) or mixed `a, b`.
    #[inline]
    pub fn second_diff(&self, u: &[f64], p: usize, a: usize, b: usize) -> f64 {
        if a == b {
            (u[self.plus(a, p)] - 2.0 * u[p] + u[self.minus(a, p)]) / (self.h[a] * self.h[a])
        } else {
            let pp = u[self.plus(a, self.plus(b, p))];
            let mm = u[self.minus(a, self.minus(b, p))];
            let pm = u[self.plus(a, self.minus(b, p))];
            let mp = u[self.minus(a, self.plus(b, p))];
            ((pp + mm) - (pm + mp)) / (4.0 * self.h[a] * self.h[b])
        }
    }

    /// Central first difference along `a`.
    #[inline]
    pub fn first_diff(&self, u: &[f64], p: usize, a: usize) -> f64 {
        (u[self.plus(a, p)] - u[self.minus(a, p)]) / (2.0 * self.h[a])
    }

    /// Coefficient of the centre value in `second_diff(.., a, a)`; zero on
    /// invariant axes.
    pub fn centre_weight(&self, a: usize) -> f64 {
        if self.dims[a] == 1 {
            0.0
        } else {
            -2.0 / (self.h[a] * self.h[a])
        }
    }
}

/// `n x n` complex Hessian `∂_{z_j}∂_{z̄_k} u` at `p`, stored densely.
pub fn complex_hessian_at(index: &TorusIndex, n: usize, u: &[f64], p: usize) -> Vec<Complex64> {
    let mut m = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        for k in j..n {
            let re = 0.25 * (index.second_diff(u, p, j, k) + index.second_diff(u, p, n + j, n + k));
            let im = if j == k {
                0.0
            } else {
                0.25 * (index.second_diff(u, p, j, n + k) - index.second_diff(u, p, n + j, k))
            };
            m[j * n + k] = Complex64::new(re, im);
            m[k * n + j] = Complex64::new(re, -im);
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorusGeometry {
    pub n: usize,
    /// Sizes of the `2n` real axes.
    pub grid: Vec<usize>,
    pub alpha0: HermitianMatrix,
    pub psi_alpha: PotentialGrid,
    pub index: TorusIndex,
}

impl TorusGeometry {
    pub fn new(n: usize, grid: Vec<usize>, alpha0: HermitianMatrix, psi_alpha: Option<PotentialGrid>) -> Result<Self> {
        if !(1..=2).contains(&n) {
            return Err(Error::Precondition(format!("complex dimension {n} not supported (1 or 2)")));
        }
        if grid.len() != 2 * n {
            return Err(Error::Shape(format!("{} grid sizes given for {} real axes", grid.len(), 2 * n)));
        }
        if let Some(&bad) = grid.iter().find(|&&d| d != 1 && (d < 8 || d % 2 != 0)) {
            return Err(Error::Precondition(format!("grid size {bad} must be even and >= 8 (or 1 for an invariant axis)")));
        }
        if alpha0.dim() != n {
            return Err(Error::Shape(format!("alpha0 is {0}x{0}, expected {1}x{1}", alpha0.dim(), n)));
        }
        let psi_alpha = psi_alpha.unwrap_or_else(|| Grid::zeros(&grid));
        if psi_alpha.dims != grid {
            return Err(Error::Shape(format!("psi_alpha grid {:?} differs from {:?}", psi_alpha.dims, grid)));
        }
        if psi_alpha.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("psi_alpha has non-finite values".into()));
        }
        let index = TorusIndex::new(&grid);
        Ok(TorusGeometry { n, grid, alpha0, psi_alpha, index })
    }

    pub fn points(&self) -> usize {
        self.index.len()
    }

    /// Samples an expression at the grid points.
    pub fn sample(&self, e: &Expr) -> Result<PotentialGrid> {
        if e.max_coord() > self.n {
            return Err(Error::Precondition(format!("expression uses coordinate {} but n = {}", e.max_coord(), self.n)));
        }
        let data = (0..self.points())
            .map(|p| {
                let c = self.index.coords(p);
                e.eval(&c[..self.n], &c[self.n..])
            })
            .collect();
        Grid::new(self.grid.clone(), data)
    }

    fn check_potential(&self, u: &PotentialGrid) -> Result<()> {
        if u.dims != self.grid {
            return Err(Error::Shape(format!("potential grid {:?} differs from {:?}", u.dims, self.grid)));
        }
        Ok(())
    }

    /// `A0 + i∂∂̄ψ_α` at `p`, dense `n x n`.
    pub fn background_at(&self, p: usize) -> Vec<Complex64> {
        let mut m = complex_hessian_at(&self.index, self.n, &self.psi_alpha.data, p);
        for j in 0..self.n {
            for k in 0..self.n {
                m[j * self.n + k] += self.alpha0.get(j, k);
            }
        }
        m
    }
}

fn to_hermitian(n: usize, m: &[Complex64]) -> HermitianMatrix {
    HermitianMatrix::from_fn(n, |j, k| m[j * n + k]).expect("exactly self-adjoint by construction")
}

/// Per-point `i∂∂̄u`.
pub fn complex_hessian(geom: &TorusGeometry, u: &PotentialGrid) -> Result<Vec<HermitianMatrix>> {
    geom.check_potential(u)?;
    Ok((0..geom.points()).map(|p| to_hermitian(geom.n, &complex_hessian_at(&geom.index, geom.n, &u.data, p))).collect())
}

/// Per-point `Λ_φ = A0 + i∂∂̄ψ_α + i∂∂̄φ`.
pub fn lambda_endo(geom: &TorusGeometry, phi: &PotentialGrid) -> Result<Vec<HermitianMatrix>> {
    geom.check_potential(phi)?;
    Ok((0..geom.points())
        .map(|p| {
            let mut m = geom.background_at(p);
            for (e, h) in m.iter_mut().zip(complex_hessian_at(&geom.index, geom.n, &phi.data, p)) {
                *e += h;
            }
            to_hermitian(geom.n, &m)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngleField {
    pub values: Grid,
    pub min: f64,
    pub max: f64,
}

impl AngleField {
    pub fn from_grid(values: Grid) -> Self {
        let (min, max) = (values.min(), values.max());
        AngleField { values, min, max }
    }

    pub fn oscillation(&self) -> f64 {
        self.max - self.min
    }
}

pub fn angle_field(geom: &TorusGeometry, phi: &PotentialGrid) -> Result<AngleField> {
    let data = lambda_endo(geom, phi)?.iter().map(angles::theta).collect::<Result<Vec<_>>>()?;
    Ok(AngleField::from_grid(Grid::new(geom.grid.clone(), data)?))
}

fn det_i_plus_i(h: &HermitianMatrix) -> Complex64 {
    ComplexMatrix::shifted_i(h, 1.0).determinant()
}

/// Periodic trapezoid rule for `∫ det(I + iΛ_φ)` over the unit-volume torus.
pub fn z_integral(geom: &TorusGeometry, phi: &PotentialGrid) -> Result<Complex64> {
    let lambdas = lambda_endo(geom, phi)?;
    let sum: Complex64 = lambdas.iter().map(det_i_plus_i).sum();
    let z = sum / lambdas.len() as f64;
    if !(z.norm() > Z_MIN) {
        return Err(Error::Precondition(format!("|Z_X| = {:e} is numerically zero", z.norm())));
    }
    Ok(z)
}

/// `arg Z_X` in `[0, 2π)`.
pub fn hat_theta(z: Complex64) -> f64 {
    let a = z.arg().rem_euclid(TAU);
    if a >= TAU {
        0.0
    } else {
        a
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HMembership {
    pub member: bool,
    /// `min (π/2 - |Θ(x) - c|)` over the grid.
    pub margin: f64,
    pub c: f64,
    pub hat_theta: f64,
    pub z: Complex64,
    pub field: AngleField,
}

/// The lift of `θ̂` nearest the middle of the angle field.
fn nearest_lift(hat: f64, field: &AngleField) -> f64 {
    let mid = 0.5 * (field.min + field.max);
    hat + TAU * ((mid - hat) / TAU).round()
}

/// `min (π/2 - |Θ - c|)` over a field.
pub fn h_margin(field: &AngleField, c: f64) -> f64 {
    FRAC_PI_2 - (field.max - c).max(c - field.min)
}

/// `cos(Θ(x) - c) > 0` everywhere, with `c` the lift of `θ̂` closest to the field.
pub fn h_membership(geom: &TorusGeometry, phi: &PotentialGrid) -> Result<HMembership> {
    let z = z_integral(geom, phi)?;
    let field = angle_field(geom, phi)?;
    let hat = hat_theta(z);
    let c = nearest_lift(hat, &field);
    let margin = h_margin(&field, c);
    Ok(HMembership { member: margin > 0.0, margin, c, hat_theta: hat, z, field })
}

/// Branch `c ≡ θ̂ (mod 2π)` within `π/2` of every field value; with
/// `require_regime`, also `(n-1)π/2 < c < nπ/2`.
pub fn select_branch(geom: &TorusGeometry, phi: &PotentialGrid, require_regime: bool) -> Result<Branch> {
    let h = h_membership(geom, phi)?;
    if h.field.oscillation() >= PI {
        return Err(Error::Precondition(format!("angle oscillation {} is not below π", h.field.oscillation())));
    }
    if !h.member {
        return Err(Error::Precondition(format!(
            "no lift of θ̂ = {} lies within π/2 of the angle field [{}, {}]",
            h.hat_theta, h.field.min, h.field.max
        )));
    }
    let branch = Branch::new(h.c, geom.n)?;
    if require_regime {
        branch.require_regime()?;
    }
    Ok(branch)
}

/// `Im(e^{-ic} det(I + iΛ_φ))` per point.
pub fn dhym_residual(geom: &TorusGeometry, phi: &PotentialGrid, c: f64) -> Result<Grid> {
    let rot = Complex64::from_polar(1.0, -c);
    let data = lambda_endo(geom, phi)?.iter().map(|h| (rot * det_i_plus_i(h)).im).collect();
    Grid::new(geom.grid.clone(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr;

    fn geom1(nx: usize, ny: usize, a0: f64) -> TorusGeometry {
        TorusGeometry::new(1, vec![nx, ny], HermitianMatrix::from_real_diagonal(&[a0]), None).unwrap()
    }

    fn geom2(size: usize, a0: &[f64]) -> TorusGeometry {
        TorusGeometry::new(2, vec![size; 4], HermitianMatrix::from_real_diagonal(a0), None).unwrap()
    }

    fn sample(g: &TorusGeometry, s: &str) -> Grid {
        g.sample(&expr::parse(s).unwrap()).unwrap()
    }

    #[test]
    fn validation() {
        let a = HermitianMatrix::from_real_diagonal(&[1.0]);
        assert!(TorusGeometry::new(1, vec![6, 8], a.clone(), None).is_err());
        assert!(TorusGeometry::new(1, vec![9, 8], a.clone(), None).is_err());
        assert!(TorusGeometry::new(1, vec![8], a.clone(), None).is_err());
        assert!(TorusGeometry::new(3, vec![8; 6], a.clone(), None).is_err());
        assert!(TorusGeometry::new(1, vec![8, 1], a, None).is_ok());
    }

    #[test]
    fn constant_potential_has_zero_hessian() {
        let g = geom2(8, &[0.0, 0.0]);
        let u = sample(&g, "1.5");
        for h in complex_hessian(&g, &u).unwrap() {
            assert_eq!(h.norm(), 0.0);
        }
    }

    #[test]
    fn cosine_hessian_second_order() {
        let err = |n: usize| {
            let g = geom1(n, n, 0.0);
            let u = sample(&g, "cos(2*pi*x1)");
            let hs = complex_hessian(&g, &u).unwrap();
            (0..g.points())
                .map(|p| {
                    let x = g.index.coords(p)[0];
                    let exact = -0.25 * (TAU * TAU) * (TAU * x).cos();
                    (hs[p].get(0, 0).re - exact).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(16), err(32));
        assert!((e1 / e2).log2() >= 1.9, "order {}", (e1 / e2).log2());
    }

    #[test]
    fn mixed_hessian_has_imaginary_part() {
        // u = sin(2πx1) sin(2πy2): ∂_{z1}∂_{z̄2} u = (i/4) u_{x1 y2}
        let err = |size: usize| {
            let g = geom2(size, &[0.0, 0.0]);
            let u = sample(&g, "sin(2*pi*x1)*sin(2*pi*y2)");
            let hs = complex_hessian(&g, &u).unwrap();
            (0..g.points())
                .map(|p| {
                    let c = g.index.coords(p);
                    let exact = 0.25 * TAU * TAU * (TAU * c[0]).cos() * (TAU * c[3]).cos();
                    assert_eq!(hs[p].get(0, 1).re, 0.0);
                    (hs[p].get(0, 1).im - exact).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(8), err(16));
        assert!(e1 > 0.0 && (e1 / e2).log2() >= 1.9);
    }

    #[test]
    fn lambda_is_sum_of_parts() {
        let psi = {
            let g = geom2(8, &[0.0, 0.0]);
            sample(&g, "0.01*cos(2*pi*(x1+y2))")
        };
        let a0 = HermitianMatrix::from_fn(2, |j, k| [[1.0, 0.2], [0.2, -0.5]][j][k] * Complex64::new(1.0, 0.0)).unwrap();
        let g = TorusGeometry::new(2, vec![8; 4], a0.clone(), Some(psi.clone())).unwrap();
        let phi = sample(&g, "0.02*sin(2*pi*x2)*cos(2*pi*y1)");
        let lam = lambda_endo(&g, &phi).unwrap();
        let (hp, hf) = (complex_hessian(&g, &psi).unwrap(), complex_hessian(&g, &phi).unwrap());
        for p in 0..g.points() {
            let expect = &(&a0 + &hp[p]) + &hf[p];
            assert!((&lam[p] - &expect).norm() < 1e-12);
        }
        let shifted = Grid::new(phi.dims.clone(), phi.data.iter().map(|v| v + 3.0).collect()).unwrap();
        let lam2 = lambda_endo(&g, &shifted).unwrap();
        assert!(lam.iter().zip(&lam2).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn constant_field_angles_and_branch() {
        let g = geom2(8, &[3.0, 3.0]);
        let zero = Grid::zeros(&g.grid);
        let f = angle_field(&g, &zero).unwrap();
        assert!((f.min - 2.0 * 3f64.atan()).abs() < 1e-14 && f.oscillation() < 1e-14);
        let b = select_branch(&g, &zero, true).unwrap();
        assert!((b.c - 2.0 * 3f64.atan()).abs() < 1e-12);
        let h = h_membership(&g, &zero).unwrap();
        assert!((h.margin - FRAC_PI_2).abs() < 1e-12);

        let g0 = geom1(8, 8, 0.0);
        let z = z_integral(&g0, &Grid::zeros(&g0.grid)).unwrap();
        assert!(z.im == 0.0 && z.re > 0.0);
        assert_eq!(hat_theta(z), 0.0);

        let g3 = geom1(8, 8, 3.0);
        let z = z_integral(&g3, &Grid::zeros(&g3.grid)).unwrap();
        assert!((hat_theta(z) - 3f64.atan()).abs() < 1e-14);
        assert!((z - Complex64::new(1.0, 3.0)).norm() < 1e-14);
    }

    #[test]
    fn hat_theta_is_modular() {
        assert!((hat_theta(Complex64::from_polar(1.0, -0.5)) - (TAU - 0.5)).abs() < 1e-15);
        let g = geom1(8, 8, -3.0);
        // θ̂ = 2π - atan 3, but the chosen lift sits on the field
        let b = select_branch(&g, &Grid::zeros(&g.grid), false).unwrap();
        assert!((b.c + 3f64.atan()).abs() < 1e-12);
        assert!(select_branch(&g, &Grid::zeros(&g.grid), true).is_err());
    }

    #[test]
    fn wide_oscillation_rejected() {
        let g = geom1(16, 16, 0.0);
        let phi = sample(&g, "4*sin(2*pi*x)");
        assert!(angle_field(&g, &phi).unwrap().oscillation() < PI);
        let g = geom2(8, &[0.0, 0.0]);
        let phi = sample(&g, "4*sin(2*pi*x1) + 4*sin(2*pi*x2)");
        assert!(angle_field(&g, &phi).unwrap().oscillation() >= PI);
        assert!(select_branch(&g, &phi, false).is_err());
    }

    #[test]
    fn h_margin_matches_scan() {
        let g = geom1(16, 16, 1.0);
        let phi = sample(&g, "0.01*sin(2*pi*x)*cos(2*pi*(y+0.2))");
        let h = h_membership(&g, &phi).unwrap();
        let scan = h.field.values.data.iter().map(|t| FRAC_PI_2 - (t - h.c).abs()).fold(f64::INFINITY, f64::min);
        assert!((h.margin - scan).abs() < 1e-15);
        let f = AngleField::from_grid(Grid::new(vec![2], vec![0.0, FRAC_PI_2]).unwrap());
        assert!(h_margin(&f, 0.0) <= 0.0);
    }

    #[test]
    fn residual_identity_and_constant_solution() {
        let c: f64 = 1.9;
        let g = geom2(8, &[(c / 2.0).tan(), (c / 2.0).tan()]);
        let r = dhym_residual(&g, &Grid::zeros(&g.grid), c).unwrap();
        assert!(r.data.iter().all(|v| v.abs() < 1e-14));

        let psi = sample(&g, "0.03*cos(2*pi*x1)*sin(2*pi*y2) + 0.02*sin(2*pi*(x2+y1))");
        let g = TorusGeometry::new(2, vec![8; 4], HermitianMatrix::from_real_diagonal(&[1.0, 2.0]), Some(psi)).unwrap();
        let zero = Grid::zeros(&g.grid);
        let r = dhym_residual(&g, &zero, c).unwrap();
        let lam = lambda_endo(&g, &zero).unwrap();
        for (p, h) in lam.iter().enumerate() {
            let expect = angles::modulus_r(h).unwrap() * (angles::theta(h).unwrap() - c).sin();
            assert!((r.data[p] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn z_invariant_under_exact_perturbation() {
        // φ depends on (x1, y2) only, so x2 and y1 are invariant axes
        let make = |s: usize| {
            TorusGeometry::new(2, vec![s, 1, 1, s], HermitianMatrix::from_real_diagonal(&[0.5, 1.5]), None).unwrap()
        };
        let z0 = z_integral(&make(16), &Grid::zeros(&[16, 1, 1, 16])).unwrap();
        let errs: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&s| {
                let g = make(s);
                let phi = sample(&g, "0.05*sin(2*pi*x1)*cos(2*pi*y2) + 0.03*cos(2*pi*(x1+y2))");
                (z_integral(&g, &phi).unwrap() - z0).norm()
            })
            .collect();
        assert!(errs[2] < errs[1] && errs[1] < errs[0]);
        assert!((errs[1] / errs[2]).log2() >= 1.9, "{errs:?}");
    }

    #[test]
    fn theta_increases_along_identity() {
        let g = geom1(8, 8, 0.3);
        let phi = sample(&g, "0.02*sin(2*pi*x)");
        let lam = lambda_endo(&g, &phi).unwrap();
        for h in &lam {
            let t0 = angles::theta(h).unwrap();
            let t1 = angles::theta(&(h + &HermitianMatrix::identity(1).scale(0.1))).unwrap();
            assert!(t1 > t0);
        }
    }
}
