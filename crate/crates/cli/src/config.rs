use std::path::{Path, PathBuf};

use abrikosov_core::abrikosov::fundamental_domain_grid;
use abrikosov_core::bifurcation::ReductionOptions;
use abrikosov_core::lattice::{normalize_tau, LatticeShape};
use abrikosov_core::C64;
use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "ABRIKOSOV_OUT_DIR";

/// Parameters shared by all commands. Loaded from an optional JSON file;
/// command-line flags override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub kappa2: f64,
    /// Shape: `"re,im"`, `"square"` or `"triangular"`.
    pub tau: String,
    /// `fundamental:N1xN2[:IM_MAX]`, `half:N1xN2[:IM_MAX]` or a `;`-separated list of shapes.
    pub tau_grid: String,
    /// Average field for `field-landscape`; when absent, `mu` is used.
    pub b: Option<f64>,
    /// Distances `kappa^2 - b` for `field-landscape`.
    pub mu: Vec<f64>,
    /// Explicit amplitudes; when empty, `s_count` evenly spaced points up to `s_max`.
    pub s_grid: Vec<f64>,
    pub s_max: f64,
    pub s_count: usize,
    /// Logical grid size `N`.
    pub grid: usize,
    /// Landau levels `K` kept in the reduction.
    pub levels: usize,
    pub w_tol: f64,
    pub root_tol: f64,
    pub critical_tol: f64,
    /// Random multistarts for `critical-points`; randomized cases for `verify`/`gauge-fix`.
    pub starts: usize,
    pub samples: usize,
    pub seed: u64,
    pub jobs: usize,
    /// Closed-grid CSV for `gauge-fix`.
    pub input: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kappa2: 2.0,
            tau: "square".into(),
            tau_grid: "fundamental:20x20".into(),
            b: None,
            mu: vec![0.2, 0.1, 0.05],
            s_grid: Vec::new(),
            s_max: 0.1,
            s_count: 5,
            grid: 128,
            levels: 48,
            w_tol: 1e-14,
            root_tol: 1e-14,
            critical_tol: 1e-10,
            starts: 50,
            samples: 20,
            seed: 0,
            jobs: 1,
            input: None,
            out_dir: None,
        }
    }
}

/// Flags accepted by every command.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON configuration file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Square of the Ginzburg-Landau parameter.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub kappa2: Option<f64>,
    /// Lattice shape: "re,im", "square" or "triangular".
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub tau: Option<String>,
    /// Shape grid: fundamental:N1xN2[:IM_MAX], half:N1xN2[:IM_MAX] or "re,im;re,im;...".
    #[arg(long, global = true)]
    pub tau_grid: Option<String>,
    /// Average magnetic field (field-landscape).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub b: Option<f64>,
    /// Comma-separated kappa^2 - b values (field-landscape, when --b is absent).
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub mu: Option<Vec<f64>>,
    /// Comma-separated branch amplitudes.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub s_grid: Option<Vec<f64>>,
    /// Largest amplitude when --s-grid is absent.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub s_max: Option<f64>,
    /// Number of amplitudes when --s-grid is absent.
    #[arg(long, global = true)]
    pub s_count: Option<usize>,
    /// Logical grid size N.
    #[arg(long, short = 'n', global = true)]
    pub grid: Option<usize>,
    /// Landau levels kept in the reduction.
    #[arg(long, short = 'k', global = true)]
    pub levels: Option<usize>,
    /// Tolerance of the complementary-space solve.
    #[arg(long, global = true)]
    pub w_tol: Option<f64>,
    /// Tolerance of the bifurcation-equation root.
    #[arg(long, global = true)]
    pub root_tol: Option<f64>,
    /// Gradient tolerance for critical points of beta.
    #[arg(long, global = true)]
    pub critical_tol: Option<f64>,
    /// Random multistarts (critical-points).
    #[arg(long, global = true)]
    pub starts: Option<usize>,
    /// Randomized cases (verify, gauge-fix).
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Seed of every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, short = 'j', global = true)]
    pub jobs: Option<usize>,
    /// Closed-grid state CSV for gauge-fix.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Output directory (default: $ABRIKOSOV_OUT_DIR, else the working directory).
    #[arg(long, short = 'o', global = true)]
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
            }
        }
    }

    pub fn resolve(over: &Overrides) -> Result<Self, CliError> {
        let mut c = Self::load(over.config.as_deref())?;
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = over.$f.clone() { c.$f = v; } )* };
        }
        take!(kappa2, tau, tau_grid, mu, s_grid, s_max, s_count, grid, levels, w_tol, root_tol, critical_tol, starts, samples, seed, jobs);
        if over.b.is_some() {
            c.b = over.b;
        }
        if over.input.is_some() {
            c.input = over.input.clone();
        }
        if over.out_dir.is_some() {
            c.out_dir = over.out_dir.clone();
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.kappa2 > 0.0) || !self.kappa2.is_finite() {
            return bad(format!("kappa2 must be positive, got {}", self.kappa2));
        }
        for (name, v) in [("w_tol", self.w_tol), ("root_tol", self.root_tol), ("critical_tol", self.critical_tol)] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.grid < 8 || self.levels == 0 || self.jobs == 0 {
            return bad(format!("need grid >= 8, levels >= 1, jobs >= 1 (got {}, {}, {})", self.grid, self.levels, self.jobs));
        }
        if self.s_grid.is_empty() && (self.s_count == 0 || !(self.s_max > 0.0)) {
            return bad("empty amplitude grid: set s_grid or positive s_max and s_count".into());
        }
        if self.s_grid.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return bad("amplitudes must be non-negative".into());
        }
        if self.b.is_none() && self.mu.is_empty() {
            return bad("field-landscape needs b or a non-empty mu list".into());
        }
        if let Some(b) = self.b {
            if !(b > 0.0) {
                return bad(format!("b must be positive, got {b}"));
            }
        }
        self.shape()?;
        self.tau_points()?;
        Ok(())
    }

    /// Normalized shape of `tau`.
    pub fn shape(&self) -> Result<LatticeShape, CliError> {
        let tau = parse_tau(&self.tau)?;
        normalize_tau(tau).map(|(s, _)| s).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Points of `tau_grid`, each normalized into the fundamental domain.
    pub fn tau_points(&self) -> Result<Vec<C64>, CliError> {
        let text = self.tau_grid.trim();
        let raw = if let Some(rest) = text.strip_prefix("fundamental:") {
            domain_grid(rest, false)?
        } else if let Some(rest) = text.strip_prefix("half:") {
            domain_grid(rest, true)?
        } else {
            text.split(';').filter(|s| !s.trim().is_empty()).map(parse_tau).collect::<Result<Vec<_>, _>>()?
        };
        if raw.is_empty() {
            return Err(CliError::Config("tau grid is empty".into()));
        }
        raw.into_iter()
            .map(|t| normalize_tau(t).map(|(s, _)| s.tau()).map_err(|e| CliError::Config(e.to_string())))
            .collect()
    }

    pub fn s_values(&self) -> Vec<f64> {
        if !self.s_grid.is_empty() {
            return self.s_grid.clone();
        }
        // rounded so that e.g. 3 * 0.1 / 5 prints as 0.06
        (1..=self.s_count).map(|k| (self.s_max * k as f64 / self.s_count as f64 * 1e12).round() / 1e12).collect()
    }

    pub fn fields(&self) -> Vec<f64> {
        match self.b {
            Some(b) => vec![b],
            None => self.mu.iter().map(|m| self.kappa2 - m).collect(),
        }
    }

    pub fn reduction(&self) -> ReductionOptions {
        ReductionOptions { grid: self.grid, levels: self.levels, w_tol: self.w_tol, root_tol: self.root_tol, ..Default::default() }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    /// SHA-256 of the canonical JSON form (output directory excluded).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = None;
        let digest = Sha256::digest(serde_json::to_vec(&c).expect("config serializes"));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn parse_tau(s: &str) -> Result<C64, CliError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "square" | "i" => return Ok(C64::new(0.0, 1.0)),
        "triangular" | "hexagonal" => return Ok(LatticeShape::triangular().tau()),
        _ => {}
    }
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(CliError::Config(format!("cannot parse shape {s:?}; use \"re,im\", \"square\" or \"triangular\"")));
    }
    let num = |p: &str| p.parse::<f64>().map_err(|_| CliError::Config(format!("not a number in shape {s:?}: {p:?}")));
    let tau = C64::new(num(parts[0])?, num(parts[1])?);
    if !(tau.im > 0.0) {
        return Err(CliError::Config(format!("shape {s:?} must lie in the upper half plane")));
    }
    Ok(tau)
}

fn domain_grid(text: &str, half: bool) -> Result<Vec<C64>, CliError> {
    let err = || CliError::Config(format!("cannot parse grid {text:?}; expected N1xN2[:IM_MAX]"));
    let (dims, im_max) = match text.split_once(':') {
        Some((d, m)) => (d, m.parse::<f64>().map_err(|_| err())?),
        None => (text, 1.6),
    };
    let (a, b) = dims.split_once('x').ok_or_else(err)?;
    let n1: usize = a.trim().parse().map_err(|_| err())?;
    let n2: usize = b.trim().parse().map_err(|_| err())?;
    if n1 == 0 || n2 == 0 || !(im_max > 0.87) {
        return Err(err());
    }
    Ok(fundamental_domain_grid(n1, n2, half, im_max))
}
