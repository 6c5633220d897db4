use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use clap::ValueEnum;
use dhym_core::angles::{self, DEFAULT_SINGULAR_EPS};
use dhym_core::fuzz::{self, FuzzReport};
use dhym_core::geodesic::{self, GeodesicProblem, Mode, SolverReport};
use dhym_core::geometry;
use dhym_core::linalg::HermitianMatrix;
use dhym_core::subequations::Branch;
use dhym_core::{literal, Error, Result};

use crate::config::{self, ProblemConfig};
use crate::Common;

pub struct Outcome {
    pub report: String,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Duality,
    Positivity,
    Convexity,
    ConvexityNegative,
    Matrixfun,
    Squeeze,
    SliceGap,
    Geo1Identity,
}

impl Suite {
    fn default_trials(self) -> usize {
        match self {
            Suite::Squeeze => 100,
            Suite::SliceGap => 100_000,
            _ => 10_000,
        }
    }
}

fn write_out(common: &Common, name: &str, text: &str) -> Result<()> {
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn eps(common: &Common) -> f64 {
    common.eps_singular.unwrap_or(DEFAULT_SINGULAR_EPS)
}

fn angle_report(s: &mut String, a: &HermitianMatrix, eps: f64) -> Result<()> {
    let _ = writeln!(s, "dim={}", a.dim());
    let _ = writeln!(s, "matrix={}", literal::format_matrix_inline(a.as_matrix()));
    let _ = writeln!(s, "theta={:.15}", angles::theta(a)?);
    if a.dim() < 2 {
        return Ok(());
    }
    let sing = angles::classify_singular(a, eps);
    let _ = writeln!(s, "theta_plus={:.15}", angles::theta(&a.trailing()?)?);
    let _ = writeln!(s, "in_s={}", sing.in_s);
    let _ = writeln!(s, "a11={:e}", sing.a11);
    let _ = writeln!(s, "a1_norm={:e}", sing.a1_norm);
    let _ = writeln!(s, "s_threshold={:e}", sing.threshold);
    if sing.in_s {
        let _ = writeln!(s, "phi=undefined");
    } else {
        let _ = writeln!(s, "phi={:.15}", angles::phi_bordered(a)?);
    }
    let usc = angles::phi_lifted_usc(a, eps)?;
    let lsc = angles::phi_lifted_lsc(a, eps)?;
    let _ = writeln!(s, "phi_usc={:.15}", usc.value);
    let _ = writeln!(s, "phi_usc_tag={}", usc.tag.as_str());
    let _ = writeln!(s, "phi_lsc={:.15}", lsc.value);
    let _ = writeln!(s, "phi_lsc_tag={}", lsc.tag.as_str());
    let _ = writeln!(s, "slice_gap={:.15}", angles::slice_angle_gap(a, eps)?);
    Ok(())
}

pub fn angles(matrix: Option<&str>, config: Option<&Path>, common: &Common) -> Result<Outcome> {
    let text = match (matrix, config) {
        (Some(m), None) => m.to_string(),
        (None, Some(p)) => config::read_text(p)?,
        _ => return Err(Error::Parse("give a matrix literal or --config, not both".into())),
    };
    let blocks = literal::parse_blocks(&text)?;
    if blocks.is_empty() {
        return Err(Error::Parse("no matrix found".into()));
    }
    let mut report = String::new();
    for (k, m) in blocks.into_iter().enumerate() {
        if k > 0 {
            report.push('\n');
        }
        let _ = writeln!(report, "index={k}");
        angle_report(&mut report, &HermitianMatrix::new(m)?, eps(common))?;
    }
    write_out(common, "angles.txt", &report)?;
    Ok(Outcome { report, passed: true })
}

pub fn fuzz(suite: Suite, trials: Option<usize>, c: Option<f64>, n: Option<usize>, common: &Common) -> Result<Outcome> {
    let trials = trials.unwrap_or(suite.default_trials());
    let (seed, eps) = (common.seed, eps(common));
    let branch = |default_c: f64, default_n: usize| Branch::new(c.unwrap_or(default_c), n.unwrap_or(default_n));
    let start = Instant::now();
    let r: FuzzReport = match suite {
        Suite::Duality => fuzz::duality(trials, seed, eps)?,
        Suite::Positivity => fuzz::positivity_suite(trials, seed, eps)?,
        Suite::Convexity => fuzz::convexity_fuzz(branch(PI / 4.0, 1)?, trials, seed, eps)?,
        Suite::ConvexityNegative => fuzz::convexity_negative_control(branch(-PI / 4.0, 2)?, trials, seed, eps)?,
        Suite::Matrixfun => fuzz::matrixfun(trials, seed)?,
        Suite::Squeeze => fuzz::squeeze(trials, seed, eps)?,
        Suite::SliceGap => fuzz::slice_gap(trials, seed, eps)?,
        Suite::Geo1Identity => fuzz::geo1_identity(trials, seed)?,
    };
    if common.verbose {
        eprintln!("{} finished in {:.2?}", r.suite, start.elapsed());
    }
    let mut report = format!("seed={seed}\n");
    report.push_str(&r.to_kv());
    write_out(common, &format!("fuzz-{}.txt", r.suite), &report)?;
    Ok(Outcome { report, passed: r.passed() })
}

pub fn dhym(path: &Path, common: &Common) -> Result<Outcome> {
    let cfg = ProblemConfig::load(path)?;
    let geom = cfg.geometry()?;
    let phi = cfg.potential(&geom)?;
    let h = geometry::h_membership(&geom, &phi)?;
    let residual = geometry::dhym_residual(&geom, &phi, h.c)?;
    let dims: Vec<String> = geom.grid.iter().map(|d| d.to_string()).collect();
    let mut s = String::new();
    let _ = writeln!(s, "n={}", geom.n);
    let _ = writeln!(s, "grid={}", dims.join("x"));
    let _ = writeln!(s, "z_re={:.12}", h.z.re);
    let _ = writeln!(s, "z_im={:.12}", h.z.im);
    let _ = writeln!(s, "hat_theta={:.12}", h.hat_theta);
    let _ = writeln!(s, "c={:.12}", h.c);
    let _ = writeln!(s, "in_regime={}", Branch::new(h.c, geom.n).is_ok_and(|b| b.in_regime()));
    let _ = writeln!(s, "theta_min={:.12}", h.field.min);
    let _ = writeln!(s, "theta_max={:.12}", h.field.max);
    let _ = writeln!(s, "h_margin={:.12}", h.margin);
    let _ = writeln!(s, "in_h={}", h.member);
    let _ = writeln!(s, "residual_max_abs={:.6e}", residual.data.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        h.field.values.save(&dir.join("theta.grid"))?;
        residual.save(&dir.join("residual.grid"))?;
    }
    write_out(common, "dhym.txt", &s)?;
    Ok(Outcome { report: s, passed: h.member })
}

struct Verdict {
    failed: Vec<&'static str>,
}

fn validate(cfg: &ProblemConfig, problem: &GeodesicProblem, rep: &SolverReport) -> Verdict {
    let sweep_tol = problem.params.sweep_tol;
    let mut failed = Vec::new();
    if !rep.sweep.converged {
        failed.push("converged");
    }
    if !rep.sandwich_ok {
        failed.push("sandwich");
    }
    if !rep.slices_ok() {
        failed.push("slices");
    }
    if rep.sweep.barrier_violations > 0 {
        failed.push("barriers");
    }
    let two_tol = cfg.solver.two_init_tol.unwrap_or(10.0 * sweep_tol);
    if rep.two_init_discrepancy.is_some_and(|d| !(d <= two_tol)) {
        failed.push("two_init");
    }
    if let Some(tol) = cfg.solver.residual_tol {
        if !(rep.residual.regular_max_abs <= tol) {
            failed.push("residual");
        }
    }
    let exact_tol = cfg.solver.exact_tol.unwrap_or(config::DEFAULT_EXACT_TOL);
    if rep.exact_shift_error.is_some_and(|e| !(e <= exact_tol)) {
        failed.push("exact_shift");
    }
    Verdict { failed }
}

pub fn geodesic(path: &Path, mode: Option<Mode>, common: &Common) -> Result<Outcome> {
    let cfg = ProblemConfig::load(path)?;
    let geom = cfg.geometry()?;
    let (phi1, phi2) = cfg.boundary(&geom)?;
    let params = cfg.solver_params(mode, common.threads, common.eps_singular)?;
    let problem = GeodesicProblem::new(geom, phi1, phi2, params)?;
    let start = Instant::now();
    let (psi, rep) = geodesic::solve(&problem)?;
    if common.verbose {
        eprintln!("solved in {:.2?}", start.elapsed());
    }
    let verdict = validate(&cfg, &problem, &rep);
    let mut report = rep.to_kv();
    let _ = writeln!(report, "validation={}", if verdict.failed.is_empty() { "pass" } else { "fail" });
    if !verdict.failed.is_empty() {
        let _ = writeln!(report, "failed={}", verdict.failed.join(","));
    }
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        psi.save(&dir.join("psi.grid"))?;
        write_out(common, "slices.csv", &rep.slices_csv())?;
    }
    write_out(common, "report.txt", &report)?;
    Ok(Outcome { report, passed: verdict.failed.is_empty() })
}
