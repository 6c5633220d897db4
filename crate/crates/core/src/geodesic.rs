//! Weak geodesics between two potentials on `[0, log 2] x torus`.
//!
//! The annulus `1 <= |s| <= 2` is parametrised by `t = log|s|`; rotational
//! invariance means the angular coordinate is never discretised. At each grid
//! point the space-time jet is
//!
//! ```text
//! H = [[ü, b^*], [b, Λ]],   b_j = ∂_{z_j} u̇,   Λ = A0 + i∂∂̄(ψ_α + u(t, .))
//! ```
//!
//! and the solver computes the largest grid function with `Φ~(H) >= c` at
//! every interior point and the prescribed boundary slices, by pointwise
//! Perron updates swept Gauss-Seidel or Jacobi style.

use std::f64::consts::{FRAC_PI_2, LN_2};
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::angles::{self, AngleTag};
use crate::error::{Error, Result};
use crate::geometry::{self, PotentialGrid, TorusGeometry};
use crate::gridfile::Grid;
use crate::linalg::HermitianMatrix;
use crate::subequations::{self, Branch, Kind, SubeqSpec};

/// Length of the `t` interval.
pub const T_MAX: f64 = LN_2;

/// Slack on the slice-angle band `[c - π/2, c + π/2]`.
pub const SLICE_TOL: f64 = 1e-3;

/// `ρ = (|s| - 1)(|s| - 2)` at `|s| = e^t`.
pub fn rho(t: f64) -> f64 {
    let s = t.exp();
    (s - 1.0) * (s - 2.0)
}

/// `1 - 3/(4|s|)`, the coefficient of `i ds∧ds̄` in `i∂∂̄ρ`.
pub fn rho_complex_hessian_factor(t: f64) -> f64 {
    1.0 - 0.75 / t.exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    GaussSeidel,
    Jacobi,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::GaussSeidel => "gauss-seidel",
            Mode::Jacobi => "jacobi",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gauss-seidel" => Ok(Mode::GaussSeidel),
            "jacobi" => Ok(Mode::Jacobi),
            _ => Err(Error::Parse(format!("unknown mode '{s}' (gauss-seidel or jacobi)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    /// Number of `t` levels including both boundary slices.
    pub nt: usize,
    pub sweep_tol: f64,
    pub bisect_tol: f64,
    pub max_iters: usize,
    /// Bracket padding beyond the barrier sandwich.
    pub pad: f64,
    pub mode: Mode,
    /// Worker cap for Jacobi sweeps; `None` uses the global pool.
    pub threads: Option<usize>,
    pub eps_singular: f64,
    /// Also solve from the clipped linear interpolation and compare.
    pub two_init: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            nt: 33,
            sweep_tol: 1e-8,
            bisect_tol: 1e-10,
            max_iters: 100_000,
            pad: 1.0,
            mode: Mode::GaussSeidel,
            threads: None,
            eps_singular: angles::DEFAULT_SINGULAR_EPS,
            two_init: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeodesicProblem {
    pub geom: TorusGeometry,
    pub phi1: PotentialGrid,
    pub phi2: PotentialGrid,
    pub branch: Branch,
    pub params: SolverParams,
    /// ℋ-margins of the boundary potentials.
    pub margins: (f64, f64),
    background: Vec<Vec<Complex64>>,
}

impl GeodesicProblem {
    /// Checks both boundary potentials lie in ℋ and the branch (taken from
    /// `φ1`) is in the convex regime.
    pub fn new(geom: TorusGeometry, phi1: PotentialGrid, phi2: PotentialGrid, params: SolverParams) -> Result<Self> {
        if params.nt < 3 {
            return Err(Error::Precondition(format!("nt = {} leaves no interior slice", params.nt)));
        }
        if !(params.sweep_tol > 0.0 && params.bisect_tol > 0.0 && params.pad >= 0.0) {
            return Err(Error::Precondition("tolerances must be positive".into()));
        }
        let h1 = geometry::h_membership(&geom, &phi1)?;
        if !h1.member {
            return Err(Error::Precondition(format!("phi1 is not in H (margin {})", h1.margin)));
        }
        let branch = geometry::select_branch(&geom, &phi1, true)?;
        let field2 = geometry::angle_field(&geom, &phi2)?;
        let m2 = geometry::h_margin(&field2, branch.c);
        if !(m2 > 0.0) {
            return Err(Error::Precondition(format!("phi2 is not in H for c = {} (margin {m2})", branch.c)));
        }
        let background = (0..geom.points()).map(|p| geom.background_at(p)).collect();
        Ok(GeodesicProblem { geom, phi1, phi2, branch, params, margins: (h1.margin, m2), background })
    }

    pub fn ht(&self) -> f64 {
        T_MAX / (self.params.nt - 1) as f64
    }

    pub fn t_at(&self, i: usize) -> f64 {
        i as f64 * self.ht()
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.params.nt];
        d.extend_from_slice(&self.geom.grid);
        d
    }

    fn points(&self) -> usize {
        self.geom.points()
    }

    fn spec(&self) -> SubeqSpec {
        SubeqSpec::untwisted(Kind::SpaceTime, self.branch)
            .expect("branch validated")
            .with_eps(self.params.eps_singular)
    }

    /// Grid filled slice by slice with `f(t, φ1(x), φ2(x))`.
    fn tabulate(&self, f: impl Fn(f64, f64, f64) -> f64) -> Grid {
        let np = self.points();
        let mut data = Vec::with_capacity(self.params.nt * np);
        for i in 0..self.params.nt {
            let t = self.t_at(i);
            data.extend((0..np).map(|p| f(t, self.phi1.data[p], self.phi2.data[p])));
        }
        Grid::new(self.dims(), data).expect("dims match")
    }
}

/// The datum `(ü, b, Λ)` at one space-time grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeJet {
    pub udotdot: f64,
    pub b: Vec<Complex64>,
    pub spatial: HermitianMatrix,
}

impl SpaceTimeJet {
    pub fn to_hermitian(&self) -> HermitianMatrix {
        let row: Vec<Complex64> = self.b.iter().map(|z| z.conj()).collect();
        HermitianMatrix::bordered(self.udotdot, &row, &self.spatial).expect("dimensions agree")
    }
}

/// Lower barrier `max(u1, u2)` and upper barrier `-max(v1, v2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Barriers {
    pub u1: Grid,
    pub u2: Grid,
    pub lower: Grid,
    pub upper: Grid,
    /// `(C, A, B)` for the `u` pair and the `v` pair.
    pub constants_u: (f64, f64, f64),
    pub constants_v: (f64, f64, f64),
}

fn barrier_constants(f1: &[f64], f2: &[f64]) -> (f64, f64, f64) {
    let max_diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).fold(f64::NEG_INFINITY, f64::max);
    let c = max_diff(f1, f2) / T_MAX + 1.0;
    let a = (max_diff(f2, f1) + 1.0) / T_MAX;
    (c, a, a * T_MAX)
}

/// `u1 = φ1 + ρ - C t`, `u2 = φ2 + ρ + A t - B`, and the same with `φ_i`
/// replaced by `-φ_i` for `v1, v2`.
pub fn build_barriers(problem: &GeodesicProblem) -> Barriers {
    let (f1, f2) = (&problem.phi1.data, &problem.phi2.data);
    let cu = barrier_constants(f1, f2);
    let g1: Vec<f64> = f1.iter().map(|v| -v).collect();
    let g2: Vec<f64> = f2.iter().map(|v| -v).collect();
    let cv = barrier_constants(&g1, &g2);
    let u1 = problem.tabulate(|t, a, _| a + rho(t) - cu.0 * t);
    let u2 = problem.tabulate(|t, _, b| b + rho(t) + cu.1 * t - cu.2);
    let lower = problem.tabulate(|t, a, b| (a + rho(t) - cu.0 * t).max(b + rho(t) + cu.1 * t - cu.2));
    let upper = problem.tabulate(|t, a, b| -((-a + rho(t) - cv.0 * t).max(-b + rho(t) + cv.1 * t - cv.2)));
    let mut bars = Barriers { u1, u2, lower, upper, constants_u: cu, constants_v: cv };
    // endpoints are the boundary data exactly
    let np = problem.points();
    let last = (problem.params.nt - 1) * np;
    for g in [&mut bars.lower, &mut bars.upper] {
        g.data[..np].copy_from_slice(f1);
        g.data[last..last + np].copy_from_slice(f2);
    }
    bars
}

/// Everything about the jet at `(i, p)` except its dependence on the centre
/// value `v`: `H(v) = H_c - (v - u_c) diag(alpha, kappa_1, .., kappa_n)`.
enum LocalJet {
    /// `n = 1`: `(ü, |b|^2, λ)`.
    Scalar { centre: f64, udd: f64, b2: f64, lam: f64 },
    Matrix { centre: f64, h: HermitianMatrix },
}

impl LocalJet {
    fn centre(&self) -> f64 {
        match self {
            LocalJet::Scalar { centre, .. } | LocalJet::Matrix { centre, .. } => *centre,
        }
    }
}

struct Stencil<'a> {
    problem: &'a GeodesicProblem,
    alpha: f64,
    kappa: Vec<f64>,
    c: f64,
    eps: f64,
}

impl<'a> Stencil<'a> {
    fn new(problem: &'a GeodesicProblem) -> Self {
        let n = problem.geom.n;
        let idx = &problem.geom.index;
        let ht = problem.ht();
        Stencil {
            problem,
            alpha: 2.0 / (ht * ht),
            kappa: (0..n).map(|j| -0.25 * (idx.centre_weight(j) + idx.centre_weight(n + j))).collect(),
            c: problem.branch.c,
            eps: problem.params.eps_singular,
        }
    }

    fn jet(&self, u: &[f64], i: usize, p: usize) -> SpaceTimeJet {
        let pr = self.problem;
        let n = pr.geom.n;
        let idx = &pr.geom.index;
        let np = pr.points();
        let ht = pr.ht();
        let (prev, cur, next) = (&u[(i - 1) * np..i * np], &u[i * np..(i + 1) * np], &u[(i + 1) * np..(i + 2) * np]);
        let udotdot = (next[p] - 2.0 * cur[p] + prev[p]) / (ht * ht);
        let mixed = |a: usize| {
            let (pa, ma) = (idx.plus(a, p), idx.minus(a, p));
            ((next[pa] + prev[ma]) - (next[ma] + prev[pa])) / (4.0 * ht * idx.h[a])
        };
        let b = (0..n).map(|j| Complex64::new(0.5 * mixed(j), -0.5 * mixed(n + j))).collect();
        let mut m = pr.background[p].clone();
        for (e, h) in m.iter_mut().zip(geometry::complex_hessian_at(idx, n, cur, p)) {
            *e += h;
        }
        let spatial = HermitianMatrix::from_fn(n, |j, k| m[j * n + k]).expect("self-adjoint by construction");
        SpaceTimeJet { udotdot, b, spatial }
    }

    fn local(&self, u: &[f64], i: usize, p: usize) -> LocalJet {
        let pr = self.problem;
        let np = pr.points();
        let centre = u[i * np + p];
        if pr.geom.n != 1 {
            return LocalJet::Matrix { centre, h: self.jet(u, i, p).to_hermitian() };
        }
        // allocation-free copy of `jet` for n = 1
        let idx = &pr.geom.index;
        let ht = pr.ht();
        let (prev, cur, next) = (&u[(i - 1) * np..i * np], &u[i * np..(i + 1) * np], &u[(i + 1) * np..(i + 2) * np]);
        let udd = (next[p] - 2.0 * cur[p] + prev[p]) / (ht * ht);
        let mixed = |a: usize| {
            let (pa, ma) = (idx.plus(a, p), idx.minus(a, p));
            ((next[pa] + prev[ma]) - (next[ma] + prev[pa])) / (4.0 * ht * idx.h[a])
        };
        let (bx, by) = (0.5 * mixed(0), 0.5 * mixed(1));
        let lam = pr.background[p][0].re + 0.25 * (idx.second_diff(cur, p, 0, 0) + idx.second_diff(cur, p, 1, 1));
        LocalJet::Scalar { centre, udd, b2: bx * bx + by * by, lam }
    }

    /// `Φ~(H(v)) - c`.
    fn excess(&self, jet: &LocalJet, v: f64) -> f64 {
        let dv = v - jet.centre();
        match jet {
            LocalJet::Scalar { udd, b2, lam, .. } => {
                phi_usc_n1(udd - dv * self.alpha, *b2, lam - dv * self.kappa[0], self.eps) - self.c
            }
            LocalJet::Matrix { h, .. } => {
                let mut m = h.as_matrix().clone();
                m[(0, 0)] -= Complex64::new(dv * self.alpha, 0.0);
                for (k, w) in self.kappa.iter().enumerate() {
                    m[(k + 1, k + 1)] -= Complex64::new(dv * w, 0.0);
                }
                let h = HermitianMatrix::new(m).expect("diagonal shift keeps self-adjointness");
                angles::phi_lifted_usc(&h, self.eps).expect("finite jet").value - self.c
            }
        }
    }
}

/// Closed form of `Φ~` for `H = [[ü, b̄], [b, λ]]` with `|b|^2 = b2`.
pub fn phi_usc_n1(udd: f64, b2: f64, lam: f64, eps: f64) -> f64 {
    let norm = (udd * udd + 2.0 * b2 + lam * lam).sqrt();
    let thr = eps * (1.0 + norm);
    if udd.abs() <= thr && b2.sqrt() <= thr {
        return FRAC_PI_2 + lam.atan();
    }
    let q = 1.0 / (1.0 + lam * lam);
    let (re, im) = (b2 * q, udd - b2 * lam * q);
    if re.hypot(im) < angles::ZERO_EIGEN_TOL {
        return FRAC_PI_2 + lam.atan();
    }
    lam.atan() + im.atan2(re)
}

pub fn assemble_jet(problem: &GeodesicProblem, u: &Grid, i: usize, p: usize) -> Result<SpaceTimeJet> {
    if i == 0 || i + 1 >= problem.params.nt || p >= problem.points() || u.dims != problem.dims() {
        return Err(Error::Precondition(format!("({i}, {p}) is not an interior point of this grid")));
    }
    Ok(Stencil::new(problem).jet(&u.data, i, p))
}

/// `Φ~(H) - c` and the tag of the lift.
pub fn harmonic_residual(jet: &SpaceTimeJet, c: f64, eps: f64) -> Result<(f64, AngleTag)> {
    let l = angles::phi_lifted_usc(&jet.to_hermitian(), eps)?;
    Ok((l.value - c, l.tag))
}

/// `Im(e^{-ic} det(I0 + iH))`.
pub fn harmonic_residual_det(jet: &SpaceTimeJet, c: f64) -> f64 {
    angles::det_residual(&jet.to_hermitian(), c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateOutcome {
    pub value: f64,
    /// `v = lower(p)` was inadmissible with the current neighbours.
    pub barrier_violation: bool,
    /// The admissible ray reached the top of the bracket.
    pub capped: bool,
    pub evaluations: usize,
}

/// Bracketed root search on the non-increasing `g(v) = Φ~(H(v)) - c`:
/// returns `lo` with `g(lo) >= 0`, `g(lo + bisect_tol) < 0` up to the
/// bracket end. Illinois steps with a bisection safeguard.
fn search(stencil: &Stencil, jet: &LocalJet, lo_lim: f64, hi_lim: f64, floor: f64, hint: f64, tol: f64) -> UpdateOutcome {
    let mut evals = 0;
    let mut g = |v: f64| {
        evals += 1;
        stencil.excess(jet, v)
    };
    let barrier_violation = g(floor) < 0.0;
    let start = jet.centre().clamp(lo_lim, hi_lim);
    let mut step = hint.max(4.0 * tol);
    let (mut lo, mut glo, mut hi, mut ghi);
    let g0 = g(start);
    if g0 >= 0.0 {
        lo = start;
        glo = g0;
        loop {
            if lo >= hi_lim {
                return UpdateOutcome { value: hi_lim, barrier_violation, capped: true, evaluations: evals };
            }
            let cand = (lo + step).min(hi_lim);
            let gc = g(cand);
            if gc < 0.0 {
                hi = cand;
                ghi = gc;
                break;
            }
            lo = cand;
            glo = gc;
            step *= 4.0;
        }
    } else {
        hi = start;
        ghi = g0;
        let mut bottom = lo_lim;
        loop {
            let cand = (hi - step).max(bottom);
            let gc = g(cand);
            if gc >= 0.0 {
                lo = cand;
                glo = gc;
                break;
            }
            hi = cand;
            ghi = gc;
            step *= 4.0;
            if cand <= bottom {
                // the padded bracket is exhausted; keep descending
                bottom -= step;
            }
            if !bottom.is_finite() || bottom < lo_lim - 1e12 {
                return UpdateOutcome { value: f64::NAN, barrier_violation: true, capped: false, evaluations: evals };
            }
        }
    }
    let mut side = 0i8;
    while hi - lo > tol {
        let width = hi - lo;
        let mut x = if glo.is_finite() && ghi.is_finite() && glo - ghi > 0.0 {
            lo + width * glo / (glo - ghi)
        } else {
            lo + 0.5 * width
        };
        // keep clear of the endpoints so the bracket always shrinks
        let guard = 0.25 * tol.min(width);
        if !(x > lo + guard && x < hi - guard) {
            x = lo + 0.5 * width;
        }
        let gx = g(x);
        if gx >= 0.0 {
            lo = x;
            glo = gx;
            if side == 1 {
                ghi *= 0.5;
            }
            side = 1;
        } else {
            hi = x;
            ghi = gx;
            if side == -1 {
                glo *= 0.5;
            }
            side = -1;
        }
        // fall back to plain bisection when the secant stalls
        if hi - lo > 0.5 * width && hi - lo > tol {
            let mid = lo + 0.5 * (hi - lo);
            let gm = g(mid);
            if gm >= 0.0 {
                lo = mid;
                glo = gm;
            } else {
                hi = mid;
                ghi = gm;
            }
            side = 0;
        }
    }
    UpdateOutcome { value: lo, barrier_violation, capped: false, evaluations: evals }
}

/// `sup { v : Φ~(H(v)) >= c }` at interior point `(i, p)` with all other
/// values of `u` frozen, searched in `[lower(p) - pad, upper(p) + pad]`.
pub fn perron_update(problem: &GeodesicProblem, barriers: &Barriers, u: &Grid, i: usize, p: usize) -> Result<UpdateOutcome> {
    if i == 0 || i + 1 >= problem.params.nt || p >= problem.points() || u.dims != problem.dims() {
        return Err(Error::Precondition(format!("({i}, {p}) is not an interior point of this grid")));
    }
    let stencil = Stencil::new(problem);
    Ok(update_at(&stencil, barriers, &u.data, i, p, 1e-3))
}

fn update_at(stencil: &Stencil, barriers: &Barriers, u: &[f64], i: usize, p: usize, hint: f64) -> UpdateOutcome {
    let np = stencil.problem.points();
    let k = i * np + p;
    let pad = stencil.problem.params.pad;
    let jet = stencil.local(u, i, p);
    let floor = barriers.lower.data[k];
    search(stencil, &jet, floor - pad, barriers.upper.data[k] + pad, floor, hint, stencil.problem.params.bisect_tol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceRange {
    pub t: f64,
    pub min: f64,
    pub max: f64,
    pub ok: bool,
}

/// Spatial angle range of every slice against `[c - π/2 - tol, c + π/2 + tol]`.
pub fn validate_slices(problem: &GeodesicProblem, u: &Grid, tol: f64) -> Result<Vec<SliceRange>> {
    let np = problem.points();
    let c = problem.branch.c;
    (0..problem.params.nt)
        .map(|i| {
            let slice = Grid::new(problem.geom.grid.clone(), u.data[i * np..(i + 1) * np].to_vec())?;
            let f = geometry::angle_field(&problem.geom, &slice)?;
            let ok = f.min >= c - FRAC_PI_2 - tol && f.max <= c + FRAC_PI_2 + tol;
            Ok(SliceRange { t: problem.t_at(i), min: f.min, max: f.max, ok })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Lower1,
    Lower2,
}

/// `(1 - eps) u + eps u_i`.
pub fn strictify(u: &Grid, eps: f64, which: Which, barriers: &Barriers) -> Grid {
    let ui = match which {
        Which::Lower1 => &barriers.u1,
        Which::Lower2 => &barriers.u2,
    };
    let data = u.data.iter().zip(&ui.data).map(|(a, b)| (1.0 - eps) * a + eps * b).collect();
    Grid { dims: u.dims.clone(), data }
}

/// `strict_margin` of the assembled jet at every interior point, `None`
/// where the jet is not a member.
pub fn jet_margins(problem: &GeodesicProblem, u: &Grid) -> Result<Vec<Option<f64>>> {
    let spec = problem.spec();
    let stencil = Stencil::new(problem);
    let np = problem.points();
    let mut out = Vec::with_capacity((problem.params.nt - 2) * np);
    for i in 1..problem.params.nt - 1 {
        for p in 0..np {
            out.push(subequations::strict_margin(&spec, &stencil.jet(&u.data, i, p).to_hermitian())?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualStats {
    pub regular_points: usize,
    pub regular_max_abs: f64,
    pub singular_points: usize,
    /// Smallest `Φ~ - c` over singular-tagged points.
    pub singular_min: f64,
    /// Smallest `Φ~ - c` over all interior points.
    pub min_excess: f64,
}

pub fn residual_stats(problem: &GeodesicProblem, u: &Grid) -> ResidualStats {
    let stencil = Stencil::new(problem);
    let np = problem.points();
    let mut s = ResidualStats {
        regular_points: 0,
        regular_max_abs: 0.0,
        singular_points: 0,
        singular_min: f64::INFINITY,
        min_excess: f64::INFINITY,
    };
    for i in 1..problem.params.nt - 1 {
        for p in 0..np {
            let h = stencil.jet(&u.data, i, p).to_hermitian();
            let l = angles::phi_lifted_usc(&h, problem.params.eps_singular).expect("finite jet");
            let r = l.value - problem.branch.c;
            s.min_excess = s.min_excess.min(r);
            if l.tag.is_regular() {
                s.regular_points += 1;
                s.regular_max_abs = s.regular_max_abs.max(r.abs());
            } else {
                s.singular_points += 1;
                s.singular_min = s.singular_min.min(r);
            }
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub iterations: usize,
    pub converged: bool,
    pub final_max_update: f64,
    pub barrier_violations: usize,
    pub capped_updates: usize,
    /// Largest excursion outside `[lower, upper]` seen after any sweep.
    pub sandwich_excursion: f64,
}

fn sweep(problem: &GeodesicProblem, barriers: &Barriers, u: &mut Grid, pool: Option<&rayon::ThreadPool>) -> Result<SweepOutcome> {
    let params = &problem.params;
    let stencil = Stencil::new(problem);
    let np = problem.points();
    let interior = (1..params.nt - 1).flat_map(|i| (0..np).map(move |p| (i, p)));
    let mut out = SweepOutcome {
        iterations: 0,
        converged: false,
        final_max_update: f64::INFINITY,
        barrier_violations: 0,
        capped_updates: 0,
        sandwich_excursion: 0.0,
    };
    let mut hint: f64 = 1e-3;
    let mut next = u.data.clone();
    while out.iterations < params.max_iters {
        let mut max_update: f64 = 0.0;
        match params.mode {
            Mode::GaussSeidel => {
                for (i, p) in interior.clone() {
                    let r = update_at(&stencil, barriers, &u.data, i, p, hint);
                    tally(&mut out, &r)?;
                    let k = i * np + p;
                    max_update = max_update.max((r.value - u.data[k]).abs());
                    u.data[k] = r.value;
                }
            }
            Mode::Jacobi => {
                let frozen = &u.data;
                let compute = |(k, slot): (usize, &mut f64)| {
                    let (i, p) = (k / np, k % np);
                    if i == 0 || i + 1 == params.nt {
                        *slot = frozen[k];
                        None
                    } else {
                        let r = update_at(&stencil, barriers, frozen, i, p, hint);
                        *slot = r.value;
                        Some(r)
                    }
                };
                let results: Vec<Option<UpdateOutcome>> = match pool {
                    Some(pool) => pool.install(|| next.par_iter_mut().enumerate().map(compute).collect()),
                    None => next.iter_mut().enumerate().map(compute).collect(),
                };
                for r in results.iter().flatten() {
                    tally(&mut out, r)?;
                }
                max_update = next.iter().zip(frozen).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                std::mem::swap(&mut u.data, &mut next);
            }
        }
        out.iterations += 1;
        out.final_max_update = max_update;
        for (k, v) in u.data.iter().enumerate() {
            let ex = (barriers.lower.data[k] - v).max(v - barriers.upper.data[k]);
            out.sandwich_excursion = out.sandwich_excursion.max(ex);
        }
        hint = max_update;
        if max_update < params.sweep_tol {
            out.converged = true;
            break;
        }
    }
    Ok(out)
}

fn tally(out: &mut SweepOutcome, r: &UpdateOutcome) -> Result<()> {
    if r.value.is_nan() {
        return Err(Error::Precondition("no admissible value below the lower barrier".into()));
    }
    out.barrier_violations += r.barrier_violation as usize;
    out.capped_updates += r.capped as usize;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub n: usize,
    pub dims: Vec<usize>,
    pub c: f64,
    pub margins: (f64, f64),
    pub mode: Mode,
    pub sweep: SweepOutcome,
    pub residual: ResidualStats,
    pub slices: Vec<SliceRange>,
    pub sandwich_ok: bool,
    /// `max(lower - Ψ, Ψ - upper)` on the final grid.
    pub sandwich_gap: f64,
    pub second: Option<SweepOutcome>,
    pub two_init_discrepancy: Option<f64>,
    /// Sup error against `φ1 + (t/T) a` when `φ2 - φ1 = a` is constant.
    pub exact_shift_error: Option<f64>,
}

impl SolverReport {
    pub fn slices_ok(&self) -> bool {
        self.slices.iter().all(|s| s.ok)
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(s, "n={}", self.n);
        let _ = writeln!(s, "grid={}", dims.join("x"));
        let _ = writeln!(s, "branch_c={:.12}", self.c);
        let _ = writeln!(s, "h_margin_phi1={:.12}", self.margins.0);
        let _ = writeln!(s, "h_margin_phi2={:.12}", self.margins.1);
        let _ = writeln!(s, "mode={}", self.mode.as_str());
        let _ = writeln!(s, "iterations={}", self.sweep.iterations);
        let _ = writeln!(s, "converged={}", self.sweep.converged);
        let _ = writeln!(s, "final_max_update={:.6e}", self.sweep.final_max_update);
        let _ = writeln!(s, "barrier_violations={}", self.sweep.barrier_violations);
        let _ = writeln!(s, "capped_updates={}", self.sweep.capped_updates);
        let _ = writeln!(s, "sandwich_ok={}", self.sandwich_ok);
        let _ = writeln!(s, "sandwich_gap={:.6e}", self.sandwich_gap);
        let _ = writeln!(s, "sandwich_excursion_max={:.6e}", self.sweep.sandwich_excursion);
        let _ = writeln!(s, "residual_regular_points={}", self.residual.regular_points);
        let _ = writeln!(s, "residual_regular_max_abs={:.6e}", self.residual.regular_max_abs);
        let _ = writeln!(s, "residual_singular_points={}", self.residual.singular_points);
        if self.residual.singular_points > 0 {
            let _ = writeln!(s, "residual_singular_min={:.6e}", self.residual.singular_min);
        }
        let _ = writeln!(s, "residual_min_excess={:.6e}", self.residual.min_excess);
        let smin = self.slices.iter().map(|r| r.min).fold(f64::INFINITY, f64::min);
        let smax = self.slices.iter().map(|r| r.max).fold(f64::NEG_INFINITY, f64::max);
        let _ = writeln!(s, "slice_angle_min={smin:.9}");
        let _ = writeln!(s, "slice_angle_max={smax:.9}");
        let _ = writeln!(s, "slices_ok={}", self.slices_ok());
        if let Some(d) = self.two_init_discrepancy {
            let _ = writeln!(s, "two_init_iterations={}", self.second.as_ref().map_or(0, |o| o.iterations));
            let _ = writeln!(s, "two_init_discrepancy={d:.6e}");
        }
        if let Some(e) = self.exact_shift_error {
            let _ = writeln!(s, "exact_shift_error={e:.6e}");
        }
        s
    }

    /// Per-slice angle ranges as CSV.
    pub fn slices_csv(&self) -> String {
        let mut s = String::from("t,min,max,ok\n");
        for r in &self.slices {
            let _ = writeln!(s, "{:.12},{:.12},{:.12},{}", r.t, r.min, r.max, r.ok);
        }
        s
    }
}

fn make_pool(threads: Option<usize>) -> Result<Option<rayon::ThreadPool>> {
    threads
        .map(|t| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::Precondition(format!("thread pool: {e}")))
        })
        .transpose()
}

/// Sweeps from `init` until the largest update drops below `sweep_tol`.
pub fn solve_from(problem: &GeodesicProblem, barriers: &Barriers, init: Grid) -> Result<(Grid, SweepOutcome)> {
    if init.dims != problem.dims() {
        return Err(Error::Shape(format!("initial grid {:?} vs {:?}", init.dims, problem.dims())));
    }
    let pool = match problem.params.mode {
        Mode::Jacobi => make_pool(problem.params.threads)?,
        Mode::GaussSeidel => None,
    };
    let mut u = init;
    let out = sweep(problem, barriers, &mut u, pool.as_ref())?;
    Ok((u, out))
}

/// Linear interpolation of the boundary data clipped to the barrier sandwich.
pub fn linear_init(problem: &GeodesicProblem, barriers: &Barriers) -> Grid {
    let mut g = problem.tabulate(|t, a, b| a + (b - a) * t / T_MAX);
    for (k, v) in g.data.iter_mut().enumerate() {
        *v = v.clamp(barriers.lower.data[k], barriers.upper.data[k]);
    }
    g
}

/// `max |Ψ - (φ1 + (t/T) a)|` when `φ2 - φ1` is the constant `a`.
pub fn exact_shift_error(problem: &GeodesicProblem, u: &Grid) -> Option<f64> {
    let d: Vec<f64> = problem.phi2.data.iter().zip(&problem.phi1.data).map(|(b, a)| b - a).collect();
    let a = d[0];
    if d.iter().any(|x| (x - a).abs() > 1e-12) {
        return None;
    }
    let exact = problem.tabulate(|t, f1, _| f1 + a * t / T_MAX);
    Some(exact.max_abs_diff(u))
}

/// Runs the solver from the lower barrier, validates, and optionally
/// repeats from the clipped linear interpolation.
pub fn solve(problem: &GeodesicProblem) -> Result<(Grid, SolverReport)> {
    let barriers = build_barriers(problem);
    let (u, sweep) = solve_from(problem, &barriers, barriers.lower.clone())?;
    let sandwich_gap = u
        .data
        .iter()
        .enumerate()
        .map(|(k, v)| (barriers.lower.data[k] - v).max(v - barriers.upper.data[k]))
        .fold(f64::NEG_INFINITY, f64::max);
    let (second, two_init_discrepancy) = if problem.params.two_init {
        let (u2, out2) = solve_from(problem, &barriers, linear_init(problem, &barriers))?;
        (Some(out2), Some(u.max_abs_diff(&u2)))
    } else {
        (None, None)
    };
    let report = SolverReport {
        n: problem.geom.n,
        dims: problem.dims(),
        c: problem.branch.c,
        margins: problem.margins,
        mode: problem.params.mode,
        residual: residual_stats(problem, &u),
        slices: validate_slices(problem, &u, SLICE_TOL)?,
        sandwich_ok: sandwich_gap <= problem.params.bisect_tol,
        sandwich_gap,
        second,
        two_init_discrepancy,
        exact_shift_error: exact_shift_error(problem, &u),
        sweep,
    };
    Ok((u, report))
}
