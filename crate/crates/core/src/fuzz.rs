//! Seeded property suites over random Hermitian matrices.
//!
//! Every suite returns a [`FuzzReport`]; assertion suites pass with zero
//! violations, the negative control passes when it finds at least one.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;

use crate::angles;
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, HermitianMatrix};
use crate::literal::format_matrix_inline;
use crate::sampling;
use crate::subequations::{self, Branch, Kind, SubeqSpec};

pub const DUALITY_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-10;
pub const CONVEXITY_TOL: f64 = 1e-8;
pub const DET_REL_TOL: f64 = 1e-12;
pub const REAL_PART_TOL: f64 = 1e-12;
pub const SQUEEZE_TOL: f64 = 1e-5;
pub const SLICE_GAP_TOL: f64 = 1e-10;
pub const GEO1_TOL: f64 = 1e-12;

/// Rejection samplers give up below this acceptance rate.
pub const STARVATION_RATE: f64 = 1e-3;
const STARVATION_MIN_ATTEMPTS: usize = 10_000;

pub const SQUEEZE_ETAS: [f64; 4] = [10.0, 1e2, 1e3, 1e4];

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzReport {
    pub suite: String,
    pub trials: usize,
    pub violations: usize,
    /// Largest observed error (or constraint gap) over all trials.
    pub worst: f64,
    pub witness: Option<String>,
    pub attempts: usize,
    pub accepted: usize,
    pub forced_singular: usize,
    pub starved: bool,
    /// Negative controls pass iff they find violations.
    pub expect_violations: bool,
    pub extra: Vec<(String, String)>,
}

impl FuzzReport {
    fn new(suite: &str, trials: usize) -> Self {
        FuzzReport {
            suite: suite.to_string(),
            trials,
            violations: 0,
            worst: f64::NEG_INFINITY,
            witness: None,
            attempts: 0,
            accepted: 0,
            forced_singular: 0,
            starved: false,
            expect_violations: false,
            extra: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        if self.starved {
            return false;
        }
        if self.expect_violations {
            self.violations > 0
        } else {
            self.violations == 0
        }
    }

    /// Tracks the worst error; records the first violating witness.
    fn observe(&mut self, err: f64, violated: bool, witness: impl FnOnce() -> String) {
        if err > self.worst || err.is_nan() {
            self.worst = err;
        }
        if violated {
            self.violations += 1;
            if self.witness.is_none() {
                self.witness = Some(witness());
            }
        }
    }

    fn extra(&mut self, key: &str, value: impl ToString) {
        self.extra.push((key.to_string(), value.to_string()));
    }

    /// Line-oriented `key=value` rendering.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "suite={}", self.suite);
        let _ = writeln!(s, "status={}", if self.passed() { "pass" } else { "fail" });
        let _ = writeln!(s, "trials={}", self.trials);
        let _ = writeln!(s, "violations={}", self.violations);
        let _ = writeln!(s, "worst={:e}", self.worst);
        let _ = writeln!(s, "attempts={}", self.attempts);
        let _ = writeln!(s, "accepted={}", self.accepted);
        let _ = writeln!(s, "forced_singular={}", self.forced_singular);
        let _ = writeln!(s, "starved={}", self.starved);
        for (k, v) in &self.extra {
            let _ = writeln!(s, "{k}={v}");
        }
        if let Some(w) = &self.witness {
            let _ = writeln!(s, "witness={w}");
        }
        s
    }
}

fn lit(a: &HermitianMatrix) -> String {
    format_matrix_inline(a.as_matrix())
}

/// `Φ~(-A) = -Φ_(A)` on random space-time matrices; every `every_singular`-th
/// draw is forced into `S`. Off `S` the bordered lift is also compared with
/// the eigenvalue route.
pub fn duality(trials: usize, seed: u64, eps: f64) -> Result<FuzzReport> {
    let mut report = FuzzReport::new("duality", trials);
    let mut rng = sampling::rng(seed);
    let every_singular = 50;
    let mut route_gap: f64 = 0.0;
    for k in 0..trials {
        let n = 1 + k % 2;
        let forced = k % every_singular == 0;
        let a = sampling::space_time(&mut rng, n, forced);
        report.forced_singular += forced as usize;
        let upper = angles::phi_lifted_usc(&-&a, eps)?;
        let lower = angles::phi_lifted_lsc(&a, eps)?;
        let mut err = (upper.value + lower.value).abs();
        if upper.tag.is_regular() != lower.tag.is_regular() {
            err = f64::INFINITY;
        }
        if lower.tag.is_regular() {
            let gap = (angles::phi_regular(&a)? - lower.value).abs();
            route_gap = route_gap.max(gap);
            err = err.max(gap);
        }
        report.observe(err, !(err <= DUALITY_TOL), || lit(&a));
    }
    report.accepted = trials;
    report.attempts = trials;
    report.extra("max_route_gap", format!("{route_gap:e}"));
    Ok(report)
}

/// Proposal for the rejection samplers: a scale-mixture draw plus a random
/// multiple of the identity, so high branches are reachable. Forced draws
/// have their first row and column zeroed after the shift.
fn sample_jet<R: Rng>(rng: &mut R, spec: &SubeqSpec, singular_rate: u32) -> (HermitianMatrix, bool) {
    let dim = spec.jet_dim();
    let scale = sampling::pick_scale(rng);
    let shift = scale * rng.random_range(-1.0..3.0);
    let a = &sampling::hermitian(rng, dim, scale) + &HermitianMatrix::identity(dim).scale(shift);
    if spec.kind.is_space_time() && rng.random_range(0..100) < singular_rate {
        let zero = vec![Complex64::new(0.0, 0.0); dim - 1];
        let plus = a.trailing().expect("space-time jets have dimension >= 2");
        (HermitianMatrix::bordered(0.0, &zero, &plus).expect("dimension checked"), true)
    } else {
        (a, false)
    }
}

/// `F + P ⊂ F`: for members `A` and random PSD `P`, `A + P` is a member and
/// its angle does not drop.
pub fn positivity_fuzz(spec: &SubeqSpec, trials: usize, seed: u64) -> Result<FuzzReport> {
    let mut report = FuzzReport::new("positivity", trials);
    let mut rng = sampling::rng(seed);
    while report.accepted < trials {
        report.attempts += 1;
        if starving(&report) {
            report.starved = true;
            break;
        }
        let (a, forced) = sample_jet(&mut rng, spec, 5);
        let before = spec.angle(&a)?;
        if before < spec.branch.c {
            continue;
        }
        report.accepted += 1;
        report.forced_singular += forced as usize;
        let p = sampling::psd(&mut rng, a.dim());
        let ap = &a + &p;
        let after = spec.angle(&ap)?;
        let drop = before - after;
        let violated = drop > POSITIVITY_TOL || !subequations::member(spec, &ap)?;
        report.observe(drop, violated, || format!("A={} P={}", lit(&a), lit(&p)));
    }
    Ok(report)
}

/// The positivity suite over spatial and space-time specs for `n = 1, 2`,
/// each with a random twist; `trials` per spec.
pub fn positivity_suite(trials: usize, seed: u64, eps: f64) -> Result<FuzzReport> {
    let mut total = FuzzReport::new("positivity", 0);
    let mut rng = sampling::rng(seed);
    let cases = [(Kind::Spatial, 1, 0.0), (Kind::Spatial, 2, 0.3), (Kind::SpaceTime, 1, 0.2), (Kind::SpaceTime, 2, 0.5)];
    for (k, &(kind, n, c)) in cases.iter().enumerate() {
        let twist = sampling::hermitian(&mut rng, n, 0.5);
        let spec = SubeqSpec::new(kind, Branch::new(c, n)?, twist)?.with_eps(eps);
        let r = positivity_fuzz(&spec, trials, sampling::shard_seed(seed, k as u64))?;
        merge(&mut total, &r);
    }
    Ok(total)
}

fn merge(total: &mut FuzzReport, r: &FuzzReport) {
    total.trials += r.trials;
    total.violations += r.violations;
    total.attempts += r.attempts;
    total.accepted += r.accepted;
    total.forced_singular += r.forced_singular;
    total.starved |= r.starved;
    if r.worst > total.worst || r.worst.is_nan() {
        total.worst = r.worst;
    }
    if total.witness.is_none() {
        total.witness = r.witness.clone();
    }
}

fn starving(report: &FuzzReport) -> bool {
    report.attempts > STARVATION_MIN_ATTEMPTS && (report.accepted as f64) < STARVATION_RATE * report.attempts as f64
}

/// Moves a member towards the boundary along `-I`, keeping it a member:
/// returns `A - frac * t* I` with `t*` located to a relative `2^-30`.
fn pull_to_boundary(spec: &SubeqSpec, a: &HermitianMatrix, frac: f64) -> Result<HermitianMatrix> {
    let id = HermitianMatrix::identity(a.dim());
    let inside = |t: f64| -> Result<bool> { subequations::member(spec, &(a - &(&id * t))) };
    let mut hi = 1.0;
    let mut lo = 0.0;
    while inside(hi)? {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if inside(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(a - &(&id * (frac * lo)))
}

fn sample_member<R: Rng>(rng: &mut R, spec: &SubeqSpec, report: &mut FuzzReport) -> Result<Option<HermitianMatrix>> {
    loop {
        report.attempts += 1;
        if starving(report) {
            report.starved = true;
            return Ok(None);
        }
        let (a, forced) = sample_jet(rng, spec, 5);
        if !subequations::member(spec, &a)? {
            continue;
        }
        report.forced_singular += forced as usize;
        // a quarter of the regular draws are pushed close to the boundary;
        // forced draws stay exactly in S rather than drifting into the band
        if !forced && rng.random_range(0..4) == 0 {
            let frac = 1.0 - 10f64.powf(-rng.random_range(1.0..6.0));
            return Ok(Some(pull_to_boundary(spec, &a, frac)?));
        }
        return Ok(Some(a));
    }
}

fn convexity_scan(name: &str, branch: Branch, trials: usize, seed: u64, eps: f64) -> Result<FuzzReport> {
    let spec = SubeqSpec::untwisted(Kind::SpaceTime, branch)?.with_eps(eps);
    let mut report = FuzzReport::new(name, trials);
    report.extra("c", branch.c);
    report.extra("n", branch.n);
    let mut rng = sampling::rng(seed);
    while report.accepted < trials {
        let Some(a0) = sample_member(&mut rng, &spec, &mut report)? else { break };
        let Some(a1) = sample_member(&mut rng, &spec, &mut report)? else { break };
        report.accepted += 1;
        let t: f64 = rng.random_range(0.0..1.0);
        let mid = &(&a0 * (1.0 - t)) + &(&a1 * t);
        let gap = branch.c - spec.angle(&mid)?;
        report.observe(gap, gap > CONVEXITY_TOL, || format!("A0={} A1={} t={t}", lit(&a0), lit(&a1)));
    }
    Ok(report)
}

/// Segment samples between members of `{Φ~ >= c}`; requires the convex regime.
pub fn convexity_fuzz(branch: Branch, trials: usize, seed: u64, eps: f64) -> Result<FuzzReport> {
    branch.require_regime()?;
    convexity_scan("convexity", branch, trials, seed, eps)
}

/// The same scan below the regime, where violations are expected.
pub fn convexity_negative_control(branch: Branch, trials: usize, seed: u64, eps: f64) -> Result<FuzzReport> {
    if branch.in_regime() {
        return Err(Error::Precondition(format!("c = {} is inside the convex regime", branch.c)));
    }
    let mut r = convexity_scan("convexity-negative", branch, trials, seed, eps)?;
    r.expect_violations = true;
    Ok(r)
}

/// Bordered determinant expansion against a direct determinant, and the sign
/// of the real parts of the spectrum of `I^eta + iA`.
pub fn matrixfun(trials: usize, seed: u64) -> Result<FuzzReport> {
    let mut report = FuzzReport::new("matrixfun", trials);
    let mut rng = sampling::rng(seed);
    let mut worst_det: f64 = 0.0;
    let mut min_re = f64::INFINITY;
    for k in 0..trials {
        let n = 1 + k % 3;
        let mut a = sampling::space_time(&mut rng, n, false);
        if rng.random_range(0..10) == 0 {
            let plus = a.trailing()?;
            a = HermitianMatrix::bordered(a.get(0, 0).re, &vec![Complex64::new(0.0, 0.0); n], &plus)?;
        }
        let eta = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..2.0) };
        let a1 = a.first_row_tail();
        let a11 = Complex64::new(a.get(0, 0).re, 0.0);
        let b_plus = ComplexMatrix::shifted_i(&a.trailing()?, 1.0);
        let expanded = linalg::bordered_det(&b_plus, a11, &a1, eta)?;
        let direct = linalg::bordered_matrix(&b_plus, a11, &a1, eta)?.determinant();
        let rel = (expanded - direct).norm() / expanded.norm().max(direct.norm()).max(f64::MIN_POSITIVE);
        worst_det = worst_det.max(rel);
        let re = angles::realpart_spectrum_check(&a, eta)?;
        min_re = min_re.min(re);
        let a1_norm = a1.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let strict = eta > 0.0 || a1_norm > 1e-6;
        let violated = !(rel <= DET_REL_TOL) || re < -REAL_PART_TOL || (strict && !(re > 0.0));
        report.observe(rel.max(-re), violated, || format!("A={} eta={eta}", lit(&a)));
    }
    report.attempts = trials;
    report.accepted = trials;
    report.extra("worst_det_rel", format!("{worst_det:e}"));
    report.extra("min_real_part", format!("{min_re:e}"));
    Ok(report)
}

/// `|Θ~(A_eta) - Φ(A)|` must fall below [`SQUEEZE_TOL`] at the largest eta
/// and not increase along [`SQUEEZE_ETAS`].
pub fn squeeze(trials: usize, seed: u64, eps: f64) -> Result<FuzzReport> {
    let mut report = FuzzReport::new("squeeze", trials);
    let mut rng = sampling::rng(seed);
    while report.accepted < trials {
        report.attempts += 1;
        let n = 1 + report.attempts % 2;
        let a = sampling::space_time(&mut rng, n, false);
        if angles::classify_singular(&a, eps).in_s {
            continue;
        }
        report.accepted += 1;
        let phi = angles::phi_regular(&a)?;
        let errs: Vec<f64> = SQUEEZE_ETAS
            .iter()
            .map(|&eta| angles::eta_squeeze(&a, eta).map(|v| (v - phi).abs()))
            .collect::<Result<_>>()?;
        let last = errs[errs.len() - 1];
        let monotone = errs.windows(2).all(|w| w[1] <= w[0]);
        report.observe(last, !(last < SQUEEZE_TOL) || !monotone, || format!("A={} errors={errs:?}", lit(&a)));
    }
    Ok(report)
}

/// `|Φ~(A) - Θ(A+)| <= π/2` on random space-time matrices.
pub fn slice_gap(trials: usize, seed: u64, eps: f64) -> Result<FuzzReport> {
    let mut report = FuzzReport::new("slice-gap", trials);
    let mut rng = sampling::rng(seed);
    for k in 0..trials {
        let n = 1 + k % 2;
        let forced = k % 50 == 0;
        let a = sampling::space_time(&mut rng, n, forced);
        report.forced_singular += forced as usize;
        let gap = angles::slice_angle_gap(&a, eps)?.abs();
        report.observe(gap - FRAC_PI_2, !(gap <= FRAC_PI_2 + SLICE_GAP_TOL), || lit(&a));
    }
    report.attempts = trials;
    report.accepted = trials;
    Ok(report)
}

/// `n = 1`: `Im(e^{-ic} det(I0 + iH))` against `ü (cos c + λ sin c) - |b|^2 sin c`.
pub fn geo1_identity(trials: usize, seed: u64) -> Result<FuzzReport> {
    let mut report = FuzzReport::new("geo1-identity", trials);
    let mut rng = sampling::rng(seed);
    for _ in 0..trials {
        let s = sampling::pick_scale(&mut rng);
        let udd = s * rng.random_range(-1.0..1.0);
        let lambda = s * rng.random_range(-1.0..1.0);
        let b = sampling::complex_vec(&mut rng, 1, s)[0];
        let c = rng.random_range(-PI..PI);
        let h = HermitianMatrix::bordered(udd, &[b.conj()], &HermitianMatrix::from_real_diagonal(&[lambda]))?;
        let det_form = angles::det_residual(&h, c);
        let expanded = udd * (c.cos() + lambda * c.sin()) - b.norm_sqr() * c.sin();
        let err = (det_form - expanded).abs();
        report.observe(err, !(err <= GEO1_TOL), || format!("udd={udd} b={b} lambda={lambda} c={c}"));
    }
    report.attempts = trials;
    report.accepted = trials;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_runs_pass() {
        let eps = angles::DEFAULT_SINGULAR_EPS;
        assert!(duality(500, 1, eps).unwrap().passed());
        assert!(positivity_suite(200, 2, eps).unwrap().passed());
        assert!(convexity_fuzz(Branch::new(PI / 4.0, 1).unwrap(), 300, 3, eps).unwrap().passed());
        assert!(matrixfun(500, 4).unwrap().passed());
        assert!(squeeze(20, 5, eps).unwrap().passed());
        assert!(slice_gap(500, 6, eps).unwrap().passed());
        assert!(geo1_identity(500, 7).unwrap().passed());
    }

    #[test]
    fn convexity_requires_regime() {
        let eps = angles::DEFAULT_SINGULAR_EPS;
        assert!(convexity_fuzz(Branch::new(0.1, 2).unwrap(), 10, 1, eps).is_err());
        assert!(convexity_negative_control(Branch::new(2.0, 2).unwrap(), 10, 1, eps).is_err());
    }

    #[test]
    fn identical_segment_has_no_gap() {
        let spec = SubeqSpec::untwisted(Kind::SpaceTime, Branch::new(0.5, 1).unwrap()).unwrap();
        let a = HermitianMatrix::from_real_diagonal(&[1.0, 0.3]);
        assert!(subequations::member(&spec, &a).unwrap());
        for t in [0.0, 0.3, 1.0] {
            let mid = &(&a * (1.0 - t)) + &(&a * t);
            assert!(spec.angle(&mid).unwrap() >= 0.5 - CONVEXITY_TOL);
        }
    }

    #[test]
    fn report_is_deterministic() {
        let eps = angles::DEFAULT_SINGULAR_EPS;
        assert_eq!(duality(100, 9, eps).unwrap().to_kv(), duality(100, 9, eps).unwrap().to_kv());
    }
}
