//! Run configuration: a single JSON document drives every subcommand, so a
//! run is reproducible from one artifact. Every block has defaults aimed at
//! the worked example (a = 1, sigma_tilde = 2, b_tilde = 4, mu = 1); a config
//! file may set any subset of fields and flags override the rest.

use std::fs;
use std::path::Path;

use ou_consumption::model::ModelParams;
use ou_consumption::value::SolverSettings;
use ou_consumption::{Error, Result};
use serde::{Deserialize, Serialize};

/// Evenly spaced closed grid. `n = 1` collapses to the single point `min`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        if self.n <= 1 {
            return vec![self.min];
        }
        let m = (self.n - 1) as f64;
        (0..self.n).map(|i| self.min + (self.max - self.min) * i as f64 / m).collect()
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::Validation(format!("{what} grid bounds must be finite")));
        }
        if self.min > self.max {
            return Err(Error::Validation(format!(
                "{what} grid has min {} > max {}",
                self.min, self.max
            )));
        }
        if self.n == 0 {
            return Err(Error::Validation(format!("{what} grid needs at least one point")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsBlock {
    pub a: f64,
    pub sigma_tilde: f64,
    pub b_tilde: f64,
    pub mu: f64,
}

impl Default for ParamsBlock {
    fn default() -> Self {
        let p = ModelParams::example();
        ParamsBlock { a: p.a, sigma_tilde: p.sigma_tilde, b_tilde: p.b_tilde, mu: p.mu }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBlock {
    pub barrier_tol: f64,
    /// Half-line truncation length for the ODE routes; `null` selects the
    /// parameter-dependent default.
    pub domain_pad: Option<f64>,
    pub n_elements: usize,
    pub series_n_max: usize,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let s = SolverSettings::default();
        SolverBlock {
            barrier_tol: s.barrier_tol,
            domain_pad: s.domain_pad,
            n_elements: s.n_elements,
            series_n_max: s.series_n_max,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McBlock {
    pub n: u64,
    pub h: f64,
    /// Simulation horizon. The `paths` command accepts 0 (initial point
    /// only); the estimating commands require it positive.
    #[serde(rename = "T")]
    pub t_max: f64,
    pub seed: u64,
}

impl Default for McBlock {
    fn default() -> Self {
        McBlock { n: 100_000, h: 1e-3, t_max: 20.0, seed: 0x0c0ffee }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsBlock {
    /// Starting rates, one output file per entry.
    pub r0: Vec<f64>,
}

impl Default for PathsBlock {
    fn default() -> Self {
        PathsBlock { r0: vec![-5.0, 5.0] }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridsBlock {
    pub r: GridSpec,
    pub x: GridSpec,
}

impl Default for GridsBlock {
    fn default() -> Self {
        GridsBlock {
            r: GridSpec { min: -6.0, max: 4.0, n: 101 },
            x: GridSpec { min: 0.0, max: 5.0, n: 11 },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub paths: PathsBlock,
    pub grids: GridsBlock,
}

#[allow(clippy::derivable_impls)]
impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { paths: PathsBlock::default(), grids: GridsBlock::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanBlock {
    pub r0: f64,
    pub x0: f64,
    /// Barrier grid to rank. `null` selects a 0.25-spaced grid spanning both
    /// candidate pasting roots, the arbitration layout.
    pub barriers: Option<GridSpec>,
}

impl Default for ScanBlock {
    fn default() -> Self {
        ScanBlock { r0: 1.0, x0: 1.0, barriers: None }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub params: ParamsBlock,
    pub solver: SolverBlock,
    pub mc: McBlock,
    pub output: OutputBlock,
    pub scan: ScanBlock,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::Validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| {
            Error::Validation(format!("cannot parse config {}: {e}", path.display()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Model parameters, revalidated so a hand-edited config fails here and
    /// not deep inside a solve.
    pub fn model_params(&self) -> Result<ModelParams> {
        let p = &self.params;
        ModelParams::new(p.a, p.sigma_tilde, p.b_tilde, p.mu)
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            barrier_tol: self.solver.barrier_tol,
            domain_pad: self.solver.domain_pad,
            n_elements: self.solver.n_elements,
            series_n_max: self.solver.series_n_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model_params()?;
        let s = &self.solver;
        if !(s.barrier_tol > 0.0) || !s.barrier_tol.is_finite() {
            return Err(Error::Validation(format!(
                "barrier_tol must be positive, got {}",
                s.barrier_tol
            )));
        }
        if let Some(pad) = s.domain_pad {
            if !(pad > 0.0) || !pad.is_finite() {
                return Err(Error::Validation(format!("domain_pad must be positive, got {pad}")));
            }
        }
        if s.n_elements < 2 {
            return Err(Error::Validation(format!(
                "n_elements must be at least 2, got {}",
                s.n_elements
            )));
        }
        if s.series_n_max == 0 {
            return Err(Error::Validation("series_n_max must be at least 1".into()));
        }
        let mc = &self.mc;
        if mc.n == 0 {
            return Err(Error::Validation("mc.n must be at least 1".into()));
        }
        if !(mc.h > 0.0) || !mc.h.is_finite() {
            return Err(Error::Validation(format!("mc.h must be positive, got {}", mc.h)));
        }
        if !(mc.t_max >= 0.0) || !mc.t_max.is_finite() {
            return Err(Error::Validation(format!(
                "mc.T must be non-negative, got {}",
                mc.t_max
            )));
        }
        if self.output.paths.r0.is_empty() {
            return Err(Error::Validation("output.paths.r0 must list at least one start".into()));
        }
        if let Some(bad) = self.output.paths.r0.iter().find(|r| !r.is_finite()) {
            return Err(Error::Validation(format!("starting rate must be finite, got {bad}")));
        }
        self.output.grids.r.validate("output.grids.r")?;
        self.output.grids.x.validate("output.grids.x")?;
        if !self.scan.r0.is_finite() {
            return Err(Error::Validation(format!(
                "scan.r0 must be finite, got {}",
                self.scan.r0
            )));
        }
        if !self.scan.x0.is_finite() || self.scan.x0 < 0.0 {
            return Err(Error::Validation(format!(
                "scan.x0 must be finite and non-negative, got {}",
                self.scan.x0
            )));
        }
        if let Some(b) = &self.scan.barriers {
            b.validate("scan.barriers")?;
        }
        Ok(())
    }
}
