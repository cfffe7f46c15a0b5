//! Run configuration: flat `key = value` lines with `#` comments. Relative
//! paths resolve against the config file's directory. The same keys are
//! accepted as command-line overrides.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::ces::EconomyParams;
use crate::economy::Quadrature;
use crate::error::{Error, Result};
use crate::solver::{SolverConfig, StepMode, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMode {
    Euclidean,
    Eikonal,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Paths {
    pub population: Option<PathBuf>,
    pub elevation: Option<PathBuf>,
    pub water: Option<PathBuf>,
    pub yield_: Option<PathBuf>,
    pub cities: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    /// CSV with `city_id,weight` for `tessellate`.
    pub weights: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub candidate: Option<PathBuf>,
    pub baseline: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSettings {
    pub seed: u64,
    pub rows: usize,
    pub cols: usize,
    pub cell_size: f64,
    pub n_cities: usize,
}

impl Default for SynthSettings {
    fn default() -> Self {
        SynthSettings { seed: 7, rows: 60, cols: 60, cell_size: 1.0, n_cities: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub alpha: f64,
    pub delta: f64,
    pub ag_labor_share: f64,
    pub pop_floor: f64,
    pub distance_mode: DistanceMode,
    pub v_max: f64,
    /// Elevation that the lowest cell maps to when raw elevations are not positive.
    pub elevation_ref: f64,
    pub quadrature: Quadrature,
    #[serde(skip)]
    pub solver: SolverConfig,
    pub write_trajectory: bool,
    /// Constant weights for `tessellate` when no weights file is given.
    pub weights: Option<Vec<f64>>,
    /// City id for population shocks; first city when unset.
    pub shock_city: Option<String>,
    pub dl_rel: f64,
    pub h_rel: f64,
    pub deltas: Vec<f64>,
    pub safety: f64,
    pub paths: Paths,
    pub synth: SynthSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            alpha: -1.0,
            delta: 0.2,
            ag_labor_share: 0.03,
            pop_floor: 1.0,
            distance_mode: DistanceMode::Eikonal,
            v_max: 1.0,
            elevation_ref: 1.0,
            quadrature: Quadrature::SubCell,
            solver: SolverConfig::default(),
            write_trajectory: false,
            weights: None,
            shock_city: None,
            dl_rel: 1e-3,
            h_rel: 1e-5,
            deltas: Vec::new(),
            safety: 10.0,
            paths: Paths::default(),
            synth: SynthSettings::default(),
        }
    }
}

fn num(key: &str, v: &str) -> std::result::Result<f64, String> {
    v.parse::<f64>().map_err(|_| format!("{key}: expected a number, got {v:?}"))
}

fn count(key: &str, v: &str) -> std::result::Result<usize, String> {
    v.parse::<usize>().map_err(|_| format!("{key}: expected a nonnegative integer, got {v:?}"))
}

fn list(key: &str, v: &str) -> std::result::Result<Vec<f64>, String> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| num(key, s.trim())).collect()
}

fn flag(key: &str, v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("{key}: expected true or false, got {v:?}")),
    }
}

impl RunConfig {
    /// Sets one key. `base` resolves relative paths.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> std::result::Result<(), String> {
        let v = value.trim();
        let path = || Some(if Path::new(v).is_absolute() { PathBuf::from(v) } else { base.join(v) });
        match key.trim() {
            "alpha" => self.alpha = num(key, v)?,
            "delta" => self.delta = num(key, v)?,
            "ag_labor_share" => self.ag_labor_share = num(key, v)?,
            "pop_floor" => self.pop_floor = num(key, v)?,
            "v_max" => self.v_max = num(key, v)?,
            "elevation_ref" => self.elevation_ref = num(key, v)?,
            "distance_mode" => {
                self.distance_mode = match v {
                    "euclidean" => DistanceMode::Euclidean,
                    "eikonal" => DistanceMode::Eikonal,
                    _ => return Err(format!("distance_mode: expected euclidean or eikonal, got {v:?}")),
                }
            }
            "quadrature" => {
                self.quadrature = match v {
                    "subcell" => Quadrature::SubCell,
                    "midpoint" => Quadrature::Midpoint,
                    _ => return Err(format!("quadrature: expected subcell or midpoint, got {v:?}")),
                }
            }
            "tol" => self.solver.tol = Tolerance::RelativeToOutput(num(key, v)?),
            "tol_abs" => self.solver.tol = Tolerance::Absolute(num(key, v)?),
            "max_iter" => self.solver.max_iter = count(key, v)?,
            "step" => {
                self.solver.step_mode = match v {
                    "backtracking" => StepMode::default(),
                    "fixed" => StepMode::Fixed { tau: 1.0 },
                    "lbfgs" => StepMode::Lbfgs { memory: 7, shrink: 0.5, armijo: 1e-4 },
                    _ => return Err(format!("step: expected backtracking, fixed or lbfgs, got {v:?}")),
                }
            }
            "tau" | "tau0" => {
                let t = num(key, v)?;
                match &mut self.solver.step_mode {
                    StepMode::Fixed { tau } => *tau = t,
                    StepMode::Backtracking { tau0, .. } => *tau0 = t,
                    StepMode::Lbfgs { .. } => return Err(format!("{key}: not used by the lbfgs step")),
                }
            }
            "shrink" | "armijo" => {
                let x = num(key, v)?;
                match &mut self.solver.step_mode {
                    StepMode::Backtracking { shrink, armijo, .. } | StepMode::Lbfgs { shrink, armijo, .. } => {
                        if key == "shrink" {
                            *shrink = x
                        } else {
                            *armijo = x
                        }
                    }
                    StepMode::Fixed { .. } => return Err(format!("{key}: not used by the fixed step")),
                }
            }
            "memory" => match &mut self.solver.step_mode {
                StepMode::Lbfgs { memory, .. } => *memory = count(key, v)?,
                _ => return Err("memory: only used by the lbfgs step".into()),
            },
            "trajectory" => self.write_trajectory = flag(key, v)?,
            "weights" => self.weights = Some(list(key, v)?),
            "shock_city" => self.shock_city = Some(v.to_string()),
            "dl_rel" => self.dl_rel = num(key, v)?,
            "h_rel" => self.h_rel = num(key, v)?,
            "deltas" => self.deltas = list(key, v)?,
            "safety" => self.safety = num(key, v)?,
            "population" => self.paths.population = path(),
            "elevation" => self.paths.elevation = path(),
            "water" => self.paths.water = path(),
            "yield" => self.paths.yield_ = path(),
            "cities" => self.paths.cities = path(),
            "out_dir" => self.paths.out_dir = path(),
            "weights_csv" => self.paths.weights = path(),
            "reference" => self.paths.reference = path(),
            "candidate" => self.paths.candidate = path(),
            "baseline" => self.paths.baseline = path(),
            "seed" => self.synth.seed = v.parse().map_err(|_| format!("seed: expected an integer, got {v:?}"))?,
            "rows" => self.synth.rows = count(key, v)?,
            "cols" => self.synth.cols = count(key, v)?,
            "cell_size" => self.synth.cell_size = num(key, v)?,
            "n_cities" => self.synth.n_cities = count(key, v)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = RunConfig::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::ParseLine {
                path: path.to_path_buf(),
                line: no + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            cfg.set(k, v, base)
                .map_err(|message| Error::ParseLine { path: path.to_path_buf(), line: no + 1, message })?;
        }
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Applies `key=value` overrides; relative paths resolve against the
    /// working directory.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::param("--set", format!("expected key=value, got {o:?}")))?;
            self.set(k, v, Path::new(".")).map_err(|reason| Error::param("--set", reason))?;
        }
        Ok(())
    }

    pub fn economy(&self) -> Result<EconomyParams> {
        EconomyParams::new(self.alpha, self.delta)
    }

    pub fn validate(&self) -> Result<()> {
        self.economy()?;
        if !(self.ag_labor_share > 0.0 && self.ag_labor_share <= 1.0) {
            return Err(Error::param("ag_labor_share", format!("must lie in (0, 1], got {}", self.ag_labor_share)));
        }
        if !(self.pop_floor >= 0.0) {
            return Err(Error::param("pop_floor", format!("must be nonnegative, got {}", self.pop_floor)));
        }
        if !(self.v_max > 0.0) {
            return Err(Error::param("v_max", format!("must be positive, got {}", self.v_max)));
        }
        self.solver.validate()
    }

    pub fn require(p: &Option<PathBuf>, key: &'static str) -> Result<PathBuf> {
        p.clone().ok_or_else(|| Error::param(key, "path not set in config"))
    }
}
