//! Run configuration: one JSON document with a schema version.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use surfwave_core::{Grid, GridSpec, InitialVelocity, Scheme, SurfaceField, TensionLaw};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub grid: GridSpec,
    pub physics: PhysicsConfig,
    pub initial: InitialConfig,
    pub stepping: SteppingConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    /// Surfactant diffusivity.
    pub gamma: f64,
    #[serde(default)]
    pub tension: TensionLaw,
}

/// a·cos(2π(n1 x₁/L₁ + n2 x₂/L₂) + phase).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub n1: i64,
    pub n2: i64,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

/// `count` modes with integer wavenumbers in [−max_mode, max_mode],
/// amplitudes uniform in [−amplitude, amplitude], drawn from the run seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomModes {
    pub count: usize,
    pub max_mode: i64,
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationConfig {
    pub mean: f64,
    #[serde(default)]
    pub modes: Vec<Mode>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default)]
    pub eta_modes: Vec<Mode>,
    #[serde(default)]
    pub eta_random: Option<RandomModes>,
    pub ctilde: ConcentrationConfig,
    #[serde(default)]
    pub velocity: InitialVelocity,
    /// Continue from a state dump instead of building initial data.
    #[serde(default)]
    pub restart_from: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteppingConfig {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub scheme: Scheme,
    /// Diagnostics are sampled every `stride` steps.
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub corrector: bool,
}

fn one() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Summary,
    Dump,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
}

fn all_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Summary, Format::Dump]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: all_formats(),
        }
    }
}

/// Anything wrong with a configuration file.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed configuration: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        self.grid.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let positive = [
            ("physics.gamma", self.physics.gamma),
            ("stepping.dt", self.stepping.dt),
            ("stepping.t_end", self.stepping.t_end),
            ("initial.ctilde.mean", self.initial.ctilde.mean),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        match &self.physics.tension {
            TensionLaw::Linear { sigma_s, beta } | TensionLaw::Exponential { sigma_s, beta } => {
                if !(*sigma_s > 0.0 && *beta > 0.0) {
                    return bad("tension parameters sigma_s and beta must be positive".into());
                }
            }
            TensionLaw::Tabulated { .. } => {}
        }
        if self.stepping.stride == 0 {
            return bad("stepping.stride must be at least 1".into());
        }
        if self.stepping.dt > self.stepping.t_end {
            return bad("stepping.dt exceeds stepping.t_end".into());
        }
        for m in self.initial.eta_modes.iter().chain(&self.initial.ctilde.modes) {
            if !m.amplitude.is_finite() || !m.phase.is_finite() {
                return bad("mode amplitudes and phases must be finite".into());
            }
        }
        if let Some(r) = &self.initial.eta_random {
            if r.max_mode < 1 || !(r.amplitude.is_finite() && r.amplitude >= 0.0) {
                return bad("initial.eta_random needs max_mode >= 1 and a nonnegative amplitude".into());
            }
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Arc<Grid>, ConfigError> {
        Grid::new(self.grid.clone()).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// η₀ from the listed and the seeded random modes.
    pub fn initial_eta(&self, grid: &Arc<Grid>) -> SurfaceField {
        let mut modes = self.initial.eta_modes.clone();
        if let Some(r) = self.initial.eta_random {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            for _ in 0..r.count {
                modes.push(Mode {
                    n1: rng.gen_range(-r.max_mode..=r.max_mode),
                    n2: rng.gen_range(-r.max_mode..=r.max_mode),
                    amplitude: rng.gen_range(-r.amplitude..=r.amplitude),
                    phase: rng.gen_range(0.0..2.0 * PI),
                });
            }
        }
        mode_sum(grid, 0.0, &modes)
    }

    pub fn initial_ctilde(&self, grid: &Arc<Grid>) -> SurfaceField {
        mode_sum(grid, self.initial.ctilde.mean, &self.initial.ctilde.modes)
    }
}

fn mode_sum(grid: &Arc<Grid>, mean: f64, modes: &[Mode]) -> SurfaceField {
    let (l1, l2) = (grid.spec().l1, grid.spec().l2);
    SurfaceField::from_fn(grid, |x, y| {
        mean + modes
            .iter()
            .map(|m| m.amplitude * (2.0 * PI * (m.n1 as f64 * x / l1 + m.n2 as f64 * y / l2) + m.phase).cos())
            .sum::<f64>()
    })
}
