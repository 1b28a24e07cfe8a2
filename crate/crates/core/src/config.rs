//! TOML experiment configuration. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{NashOptions, PicardOptions};
use crate::grid::{GridPoint, GridSpec, Point};
use crate::identities::{CheckMode, CheckOptions};
use crate::pollution::{Bilinear, Example1Params, Example1Strategy, Example2Params, Example2Variant};
use crate::process::ProcessSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub picard: PicardConfig,
    pub sheet: Option<SheetConfig>,
    pub ito: Option<ItoConfig>,
    pub ibp: Option<IbpConfig>,
    pub wellposedness: Option<WellposednessConfig>,
    pub example1: Option<Example1Config>,
    pub example2: Option<Example2Config>,
    pub nash: Option<NashConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "one")]
    pub t_max: f64,
    #[serde(default = "one")]
    pub x_max: f64,
    pub nt: usize,
    pub nx: usize,
}

fn one() -> f64 {
    1.0
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.t_max, self.x_max, self.nt, self.nx)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: usize,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    /// Run the unilateral-deviation check after `solve-example*`.
    pub check_nash: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { seed: 0, paths: 1000, workers: None, out: None, check_nash: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PicardConfig {
    pub damping: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub min_damping: f64,
}

impl Default for PicardConfig {
    fn default() -> Self {
        let d = PicardOptions::default();
        Self { damping: d.damping, max_iter: d.max_iter, tol: d.tol, min_damping: d.min_damping }
    }
}

impl PicardConfig {
    pub fn options(&self) -> Result<PicardOptions> {
        if !(self.damping > 0.0 && self.damping <= 1.0) || !(self.tol > 0.0) || !(self.min_damping > 0.0) {
            return Err(Error::Config("picard: need 0 < damping <= 1, tol > 0, min_damping > 0".into()));
        }
        Ok(PicardOptions { damping: self.damping, max_iter: self.max_iter, tol: self.tol, min_damping: self.min_damping })
    }
}

/// Point pairs `[[t1, x1], [t2, x2]]` for the covariance check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SheetConfig {
    pub pairs: Vec<[[f64; 2]; 2]>,
    pub k_sigma: f64,
}

impl Default for SheetConfig {
    fn default() -> Self {
        Self { pairs: default_pairs(), k_sigma: 3.0 }
    }
}

pub fn default_pairs() -> Vec<[[f64; 2]; 2]> {
    vec![
        [[1.0, 1.0], [1.0, 1.0]],
        [[0.5, 0.5], [0.5, 0.5]],
        [[0.25, 1.0], [1.0, 0.25]],
        [[0.5, 0.75], [0.75, 0.5]],
        [[1.0, 0.5], [0.5, 1.0]],
        [[0.25, 0.25], [0.75, 0.75]],
        [[0.125, 0.875], [0.625, 0.375]],
        [[0.375, 0.625], [0.875, 0.125]],
        [[1.0, 1.0], [0.5, 0.25]],
        [[0.75, 0.125], [0.25, 0.875]],
    ]
}

/// `dY = (drift(z) + drift_y·Y) dz + (diffusion(z) + diffusion_y·Y) B(dz) + ψ B(dζ)B(dζ')`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProcessConfig {
    pub y0: f64,
    pub drift: Bilinear,
    pub drift_y: f64,
    pub diffusion: Bilinear,
    pub diffusion_y: f64,
    pub psi: f64,
}

impl ProcessConfig {
    pub fn sheet() -> Self {
        Self { diffusion: Bilinear::constant(1.0), ..Default::default() }
    }

    pub fn spec(&self) -> ProcessSpec {
        let (d, dy, s, sy) = (self.drift, self.drift_y, self.diffusion, self.diffusion_y);
        let mut spec = ProcessSpec::new(self.y0, move |z, y| d.eval(z) + dy * y, move |z, y| s.eval(z) + sy * y);
        if dy == 0.0 && sy == 0.0 {
            spec = spec.state_free();
        }
        if self.psi != 0.0 {
            let psi = self.psi;
            spec = spec.with_pair(move |_, _| psi);
        }
        spec
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeConfig {
    Expectation,
    Pathwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItoConfig {
    /// `identity`, `square`, `cube`, `quartic`, `exp` or `sin`.
    pub function: String,
    #[serde(default = "ProcessConfig::sheet")]
    pub process: ProcessConfig,
    /// `[t, x]`; the grid corner when absent.
    pub point: Option<[f64; 2]>,
    #[serde(default = "expectation")]
    pub mode: ModeConfig,
    #[serde(default = "three")]
    pub k_sigma: f64,
    #[serde(default = "yes")]
    pub grid_allowance: bool,
}

fn expectation() -> ModeConfig {
    ModeConfig::Expectation
}

fn three() -> f64 {
    3.0
}

fn yes() -> bool {
    true
}

impl ItoConfig {
    pub fn options(&self) -> CheckOptions {
        let mode = match self.mode {
            ModeConfig::Expectation => CheckMode::Expectation,
            ModeConfig::Pathwise => CheckMode::Pathwise,
        };
        CheckOptions { mode, grid_allowance: self.grid_allowance, k_sigma: self.k_sigma }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IbpConfig {
    #[serde(default = "ProcessConfig::sheet")]
    pub y1: ProcessConfig,
    #[serde(default = "ProcessConfig::sheet")]
    pub y2: ProcessConfig,
    pub point: Option<[f64; 2]>,
    #[serde(default = "three")]
    pub k_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WellposednessConfig {
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
    /// `|z₀|`; the grid area `T·X` when absent.
    pub area: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example1Config {
    pub a: [f64; 2],
    pub c: [f64; 2],
    #[serde(default)]
    pub sigma: f64,
    #[serde(default = "one")]
    pub y0: f64,
    #[serde(default = "reduced")]
    pub strategy: Example1Strategy,
}

impl Example1Config {
    pub fn params(&self) -> Example1Params {
        Example1Params { a: self.a, c: self.c, sigma: self.sigma, y0: self.y0 }
    }
}

fn reduced() -> Example1Strategy {
    Example1Strategy::Reduced
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example2Config {
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    #[serde(default)]
    pub sigma: Bilinear,
    #[serde(default)]
    pub source: Bilinear,
    #[serde(default)]
    pub y0: f64,
    #[serde(default)]
    pub variant: Example2Variant,
}

impl Example2Config {
    pub fn params(&self) -> Example2Params {
        Example2Params { alpha: self.alpha, beta: self.beta, sigma: self.sigma, source: self.source, y0: self.y0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GameChoice {
    Example1,
    Example2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NashConfig {
    pub game: GameChoice,
    #[serde(default = "default_magnitudes")]
    pub magnitudes: Vec<f64>,
    /// Rectangle corners as fractions `[t/T, x/X]`, snapped down to nodes.
    #[serde(default = "default_corners")]
    pub corners: Vec<[f64; 2]>,
    #[serde(default = "three")]
    pub k_sigma: f64,
    #[serde(default = "cost_tol")]
    pub cost_tol: f64,
    #[serde(default = "stationarity_tol")]
    pub stationarity_tol: f64,
}

fn default_magnitudes() -> Vec<f64> {
    NashOptions::default().magnitudes
}

fn default_corners() -> Vec<[f64; 2]> {
    crate::game::policy::RECT_CORNERS.iter().map(|&(t, x)| [t, x]).collect()
}

fn cost_tol() -> f64 {
    NashOptions::default().cost_tol
}

fn stationarity_tol() -> f64 {
    NashOptions::default().stationarity_tol
}

impl NashConfig {
    pub fn options(&self) -> Result<NashOptions> {
        if self.magnitudes.is_empty() || self.magnitudes.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::Config("nash: magnitudes must be positive".into()));
        }
        Ok(NashOptions {
            magnitudes: self.magnitudes.clone(),
            k_sigma: self.k_sigma,
            cost_tol: self.cost_tol,
            stationarity_tol: self.stationarity_tol,
        })
    }

    pub fn corner_points(&self, g: &GridSpec) -> Result<Vec<GridPoint>> {
        self.corners
            .iter()
            .map(|&[ft, fx]| {
                if !((0.0..=1.0).contains(&ft) && (0.0..=1.0).contains(&fx)) {
                    return Err(Error::Config(format!("nash: corner fraction [{ft}, {fx}] outside [0, 1]")));
                }
                Ok(GridPoint::new((ft * g.nt as f64).floor() as usize, (fx * g.nx as f64).floor() as usize))
            })
            .collect()
    }
}

impl Default for NashConfig {
    fn default() -> Self {
        Self {
            game: GameChoice::Example1,
            magnitudes: default_magnitudes(),
            corners: default_corners(),
            k_sigma: 3.0,
            cost_tol: cost_tol(),
            stationarity_tol: stationarity_tol(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.grid.spec()?;
        cfg.picard.options()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn grid(&self) -> GridSpec {
        self.grid.spec().expect("validated on parse")
    }

    /// Grid node at `[t, x]`, or the corner.
    pub fn node(&self, p: Option<[f64; 2]>) -> Result<GridPoint> {
        let g = self.grid();
        match p {
            Some([t, x]) => g.locate(Point::new(t, x)).map_err(|e| Error::Config(e.to_string())),
            None => Ok(g.corner()),
        }
    }
}

pub fn require<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T> {
    section.as_ref().ok_or_else(|| Error::Config(format!("missing section [{name}]")))
}
