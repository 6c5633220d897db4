//! TOML problem files. Paths inside a config are relative to its directory.
//!
//! ```toml
//! [geometry]
//! n = 1
//! grid = [32, 32]          # 2n axis sizes; 1 marks an invariant axis
//! alpha0 = "3"             # Hermitian matrix literal
//! psi_alpha = "0"          # expression, or psi_alpha_file = "psi.grid"
//!
//! [potential]              # dhym
//! phi = "0.05*sin(2*pi*x)"
//!
//! [boundary]               # geodesic
//! phi1 = "0"
//! phi2_file = "phi2.grid"
//!
//! [solver]                 # geodesic, all optional
//! nt = 33
//! mode = "gauss-seidel"
//! ```

use std::path::{Path, PathBuf};

use dhym_core::geodesic::{Mode, SolverParams};
use dhym_core::geometry::{PotentialGrid, TorusGeometry};
use dhym_core::gridfile::Grid;
use dhym_core::{expr, literal, Error, Result};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub n: usize,
    pub grid: Vec<usize>,
    pub alpha0: String,
    pub psi_alpha: Option<String>,
    pub psi_alpha_file: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    pub phi: Option<String>,
    pub phi_file: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    pub phi1: Option<String>,
    pub phi1_file: Option<PathBuf>,
    pub phi2: Option<String>,
    pub phi2_file: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub nt: Option<usize>,
    pub mode: Option<String>,
    pub sweep_tol: Option<f64>,
    pub bisect_tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub pad: Option<f64>,
    pub two_init: Option<bool>,
    /// Defaults to `10 * sweep_tol`.
    pub two_init_tol: Option<f64>,
    /// Bound on `|Φ~ - c|` at regular interior points; unchecked if absent.
    pub residual_tol: Option<f64>,
    /// Bound on the sup error for constant-shift boundary data.
    pub exact_tol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub geometry: GeometrySection,
    pub potential: Option<PotentialSection>,
    pub boundary: Option<BoundarySection>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(skip)]
    pub base: PathBuf,
}

pub const DEFAULT_EXACT_TOL: f64 = 5e-4;

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

impl ProblemConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: ProblemConfig =
            toml::from_str(&read_text(path)?).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        cfg.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn geometry(&self) -> Result<TorusGeometry> {
        let g = &self.geometry;
        let alpha0 = literal::parse_hermitian(&g.alpha0)?;
        let psi = match (&g.psi_alpha, &g.psi_alpha_file) {
            (Some(_), Some(_)) => return Err(Error::Parse("give psi_alpha or psi_alpha_file, not both".into())),
            (None, None) => None,
            (None, Some(f)) => Some(Grid::load(&self.base.join(f))?),
            (Some(e), None) => {
                // sample on a flat geometry first; psi_alpha only shifts the background
                let flat = TorusGeometry::new(g.n, g.grid.clone(), alpha0.clone(), None)?;
                Some(flat.sample(&expr::parse(e)?)?)
            }
        };
        TorusGeometry::new(g.n, g.grid.clone(), alpha0, psi)
    }

    fn potential_from(&self, geom: &TorusGeometry, name: &str, e: &Option<String>, f: &Option<PathBuf>) -> Result<PotentialGrid> {
        match (e, f) {
            (Some(e), None) => geom.sample(&expr::parse(e)?),
            (None, Some(f)) => {
                let g = Grid::load(&self.base.join(f))?;
                if g.dims != geom.grid {
                    return Err(Error::Shape(format!("{name} grid {:?} differs from {:?}", g.dims, geom.grid)));
                }
                Ok(g)
            }
            _ => Err(Error::Parse(format!("give exactly one of {name} or {name}_file"))),
        }
    }

    pub fn potential(&self, geom: &TorusGeometry) -> Result<PotentialGrid> {
        let p = self.potential.as_ref().ok_or_else(|| Error::Parse("missing [potential] section".into()))?;
        self.potential_from(geom, "phi", &p.phi, &p.phi_file)
    }

    pub fn boundary(&self, geom: &TorusGeometry) -> Result<(PotentialGrid, PotentialGrid)> {
        let b = self.boundary.as_ref().ok_or_else(|| Error::Parse("missing [boundary] section".into()))?;
        Ok((self.potential_from(geom, "phi1", &b.phi1, &b.phi1_file)?, self.potential_from(geom, "phi2", &b.phi2, &b.phi2_file)?))
    }

    /// Solver parameters; `mode` and `eps` from the command line win.
    pub fn solver_params(&self, mode: Option<Mode>, threads: Option<usize>, eps: Option<f64>) -> Result<SolverParams> {
        let s = &self.solver;
        let d = SolverParams::default();
        let cfg_mode = s.mode.as_deref().map(str::parse).transpose()?;
        Ok(SolverParams {
            nt: s.nt.unwrap_or(d.nt),
            sweep_tol: s.sweep_tol.unwrap_or(d.sweep_tol),
            bisect_tol: s.bisect_tol.unwrap_or(d.bisect_tol),
            max_iters: s.max_iters.unwrap_or(d.max_iters),
            pad: s.pad.unwrap_or(d.pad),
            mode: mode.or(cfg_mode).unwrap_or(d.mode),
            threads,
            eps_singular: eps.unwrap_or(d.eps_singular),
            two_init: s.two_init.unwrap_or(d.two_init),
        })
    }
}
