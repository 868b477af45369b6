//! One JSON document configures a run. Unknown keys are rejected and every
//! default is materialized before compute, so the manifest's config echo is
//! complete: feeding it back reproduces the run.

use std::path::{Path, PathBuf};

use landscape_core::eigen::EigenSettings;
use landscape_core::grid::Grid;
use landscape_core::model::{MagneticSpec, PotentialSpec};
use landscape_core::pathint::PathConfig;
use serde::{Deserialize, Serialize};

use crate::fail::{CliResult, Fail};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    #[serde(default)]
    pub potential: Option<PotentialConfig>,
    #[serde(default)]
    pub magnetic: Option<MagneticConfig>,
    /// s in H = s(-i grad - A)^2 + V: 1/2 is the convention the bounds are
    /// stated in, 1.0 the classic interval normalization.
    #[serde(default = "default_scale")]
    pub laplacian_scale: f64,
    #[serde(default)]
    pub eigen: EigenConfig,
    #[serde(default)]
    pub paths: PathsConfig,
    #[serde(default)]
    pub smoothing: SmoothingConfig,
    #[serde(default)]
    pub sample: SampleConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    /// Eigenvalue for the fk-bound weight e^{lambda t}; defaults to the
    /// computed ground energy.
    #[serde(default)]
    pub bound_lambda: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_scale() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub n: Vec<usize>,
}

impl GridConfig {
    pub fn build(&self) -> CliResult<Grid> {
        let d = self.n.len();
        if self.lower.len() != d || self.upper.len() != d {
            return Err(Fail::Config(format!(
                "grid: lower/upper/n must agree in length, got {}/{}/{}",
                self.lower.len(),
                self.upper.len(),
                d
            )));
        }
        let g = match d {
            1 => Grid::line(self.lower[0], self.upper[0], self.n[0]),
            2 => Grid::rect(
                [self.lower[0], self.lower[1]],
                [self.upper[0], self.upper[1]],
                [self.n[0], self.n[1]],
            ),
            _ => {
                return Err(Fail::Config(format!(
                    "grid: dimension must be 1 or 2, got {d}"
                )))
            }
        };
        g.map_err(Fail::from)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub bumps_per_axis: usize,
    #[serde(default)]
    pub weight_low: f64,
    pub weight_high: f64,
    pub sigma: f64,
    #[serde(default)]
    pub offset: f64,
    #[serde(default = "default_potential_seed")]
    pub seed: u64,
}

fn default_potential_seed() -> u64 {
    1
}

impl PotentialConfig {
    pub fn spec(&self) -> PotentialSpec {
        PotentialSpec {
            bumps_per_axis: self.bumps_per_axis,
            weight_low: self.weight_low,
            weight_high: self.weight_high,
            sigma: self.sigma,
            offset: self.offset,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagneticConfig {
    pub bumps_per_axis: usize,
    pub b: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    #[serde(default = "default_magnetic_seed")]
    pub seed: u64,
}

fn default_magnetic_seed() -> u64 {
    2
}

impl MagneticConfig {
    pub fn spec(&self) -> MagneticSpec {
        self.spec_with_b(self.b)
    }

    pub fn spec_with_b(&self, b: f64) -> MagneticSpec {
        MagneticSpec {
            bumps_per_axis: self.bumps_per_axis,
            b,
            sigma_x: self.sigma_x,
            sigma_y: self.sigma_y,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenConfig {
    pub scan_min: Option<f64>,
    pub scan_max: Option<f64>,
    pub scan_step: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub max_pairs: usize,
    pub probe_seed: u64,
}

impl Default for EigenConfig {
    fn default() -> Self {
        let s = EigenSettings::default();
        Self {
            scan_min: s.scan_min,
            scan_max: s.scan_max,
            scan_step: s.scan_step,
            tol: s.tol,
            max_iter: s.max_iter,
            max_pairs: s.max_pairs,
            probe_seed: s.probe_seed,
        }
    }
}

impl EigenConfig {
    pub fn settings(&self) -> EigenSettings {
        EigenSettings {
            scan_min: self.scan_min,
            scan_max: self.scan_max,
            scan_step: self.scan_step,
            tol: self.tol,
            max_iter: self.max_iter,
            max_pairs: self.max_pairs,
            probe_seed: self.probe_seed,
        }
    }

    pub fn settings_with_pairs(&self, max_pairs: usize) -> EigenSettings {
        EigenSettings { max_pairs, ..self.settings() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub t_grid: Vec<f64>,
    pub seed: u64,
    pub bridge_correction: bool,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self { n_paths: 20_000, dt: 1e-4, t_grid: Vec::new(), seed: 7, bridge_correction: true }
    }
}

impl PathsConfig {
    pub fn path_config(&self) -> CliResult<PathConfig> {
        if self.t_grid.is_empty() {
            return Err(Fail::Config(
                "paths.t_grid is empty; this command needs evaluation times".into(),
            ));
        }
        Ok(self.with_times(self.t_grid.clone()))
    }

    pub fn times(&self) -> CliResult<Vec<f64>> {
        if self.t_grid.is_empty() {
            return Err(Fail::Config(
                "paths.t_grid is empty; this command needs evaluation times".into(),
            ));
        }
        Ok(self.t_grid.clone())
    }

    pub fn with_times(&self, t_grid: Vec<f64>) -> PathConfig {
        PathConfig {
            n_paths: self.n_paths,
            dt: self.dt,
            t_grid,
            seed: self.seed,
            bridge_correction: self.bridge_correction,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingConfig {
    pub t: Vec<f64>,
    pub padding: Option<usize>,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self { t: vec![1e-3], padding: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    /// Interior evaluation points; drawn from the node set when not given.
    pub points: Option<Vec<Vec<f64>>>,
    pub count: usize,
    pub margin: f64,
    pub seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { points: None, count: 10, margin: 0.12, seed: 2027 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Eigenpairs checked by thm1.
    pub pairs: usize,
    /// Discretization slack for thm1 as a multiple of h^2.
    pub slack_h2: f64,
    /// Monte Carlo slack as a multiple of the standard error.
    pub sigma: f64,
    /// thm2 rejects runs whose standard error exceeds this.
    pub stderr_cap: f64,
    /// Multiplicative headroom on lambda1 * u for the corollary dip.
    pub headroom: f64,
    pub c1: f64,
    pub c2: f64,
    /// Magnetic amplitudes swept by thm1 when a magnetic section exists.
    pub b_values: Vec<f64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            pairs: 5,
            slack_h2: 10.0,
            sigma: 4.0,
            stderr_cap: 1e-2,
            headroom: 1.05,
            c1: 2.0,
            c2: 2.0,
            b_values: vec![0.0, 70.0, 140.0],
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Fail::Config(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Fail::Config(format!("{}: {e}", path.display())))?;
        cfg.validate().map_err(|m| Fail::Config(format!("{}: {m}", path.display())))?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        let d = self.grid.n.len();
        if let Some(p) = &self.potential {
            if !(p.sigma > 0.0) || p.bumps_per_axis == 0 {
                return Err("potential: sigma and bumps_per_axis must be positive".into());
            }
            if p.weight_high < p.weight_low || p.weight_low + p.offset < 0.0 {
                return Err("potential: weights must be ordered and keep V nonnegative".into());
            }
        }
        if self.magnetic.is_some() && d != 2 {
            return Err("magnetic: only defined on 2D grids".into());
        }
        if !(self.laplacian_scale > 0.0 && self.laplacian_scale.is_finite()) {
            return Err(format!("laplacian_scale must be positive, got {}", self.laplacian_scale));
        }
        if !(self.paths.dt > 0.0) || self.paths.n_paths == 0 {
            return Err("paths: dt and n_paths must be positive".into());
        }
        if self.paths.t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err("paths.t_grid must be strictly increasing".into());
        }
        if let Some(pts) = &self.sample.points {
            if pts.iter().any(|p| p.len() != d) {
                return Err(format!("sample.points entries must have {d} coordinates"));
            }
        } else if self.sample.count == 0 {
            return Err("sample.count must be positive when no points are given".into());
        }
        if self.smoothing.t.iter().any(|&t| !(t > 0.0)) {
            return Err("smoothing.t entries must be positive".into());
        }
        Ok(())
    }
}
