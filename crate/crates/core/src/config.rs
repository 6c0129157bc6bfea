//! JSON run configurations and initial-measure sources.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{ModelParams, SimConfig};
use crate::io;
use crate::measure::{Atom, ConvictionMarginal, EmpiricalMeasure, MeasureError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: missing field `{field}` required by `{command}`")]
    Missing {
        path: PathBuf,
        field: &'static str,
        command: Command,
    },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Measure {
        path: PathBuf,
        source: MeasureError,
    },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::IoError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Steady,
    Meanfield,
    Rates,
    Uniqueness,
    Stability,
    Figure,
    Verify,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Command::Simulate => "simulate",
            Command::Steady => "steady",
            Command::Meanfield => "meanfield",
            Command::Rates => "rates",
            Command::Uniqueness => "uniqueness",
            Command::Stability => "stability",
            Command::Figure => "figure",
            Command::Verify => "verify",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Random,
    Grid,
}

/// Number of atoms per conviction: one count for all, or one each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AtomCounts {
    Same(usize),
    Each(Vec<usize>),
}

impl AtomCounts {
    fn get(&self, j: usize) -> usize {
        match self {
            AtomCounts::Same(n) => *n,
            AtomCounts::Each(v) => v[j],
        }
    }
}

/// Seeded random initial cloud: `atoms_per_theta` opinions in
/// `[y_min, y_max]` for each conviction, sharing the conviction's mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomMeasure {
    pub thetas: Vec<f64>,
    #[serde(default)]
    pub masses: Option<Vec<f64>>,
    pub atoms_per_theta: AtomCounts,
    pub y_min: f64,
    pub y_max: f64,
    #[serde(default)]
    pub spacing: Spacing,
}

impl RandomMeasure {
    pub fn build(&self, seed: u64) -> Result<EmpiricalMeasure, String> {
        let k = self.thetas.len();
        if k == 0 {
            return Err("random measure needs at least one theta".into());
        }
        if let AtomCounts::Each(v) = &self.atoms_per_theta {
            if v.len() != k {
                return Err(format!("{} atom counts for {} thetas", v.len(), k));
            }
        }
        if (0..k).any(|j| self.atoms_per_theta.get(j) == 0) {
            return Err("atoms_per_theta must be at least 1".into());
        }
        if !(self.y_min > 0.0 && self.y_max >= self.y_min && self.y_max.is_finite()) {
            return Err(format!("bad opinion range [{}, {}]", self.y_min, self.y_max));
        }
        let masses = match &self.masses {
            Some(m) if m.len() != k => {
                return Err(format!("{} masses for {} thetas", m.len(), k));
            }
            Some(m) => m.clone(),
            None => vec![1.0 / k as f64; k],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut atoms = Vec::new();
        for (j, (&theta, &mass)) in self.thetas.iter().zip(&masses).enumerate() {
            let n = self.atoms_per_theta.get(j);
            for i in 0..n {
                let y = match self.spacing {
                    Spacing::Random if self.y_max > self.y_min => rng.gen_range(self.y_min..=self.y_max),
                    Spacing::Random => self.y_min,
                    Spacing::Grid if n == 1 => 0.5 * (self.y_min + self.y_max),
                    Spacing::Grid => {
                        self.y_min + (self.y_max - self.y_min) * i as f64 / (n - 1) as f64
                    }
                };
                atoms.push(Atom::new(y, theta, mass / n as f64));
            }
        }
        EmpiricalMeasure::new(atoms).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasureSource {
    Inline(Vec<[f64; 3]>),
    File { path: PathBuf },
    Random { random: RandomMeasure },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub params: Option<ModelParams>,
    #[serde(default)]
    pub sim: Option<SimConfig>,
    #[serde(default)]
    pub initial_measure: Option<MeasureSource>,
    /// Second initialization for `uniqueness`.
    #[serde(default)]
    pub initial_measure_b: Option<MeasureSource>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Conviction marginal for `steady` and `stability`.
    #[serde(default)]
    pub pi: Option<ConvictionMarginal>,
    #[serde(default)]
    pub grid_n: Option<usize>,
    #[serde(default)]
    pub alphas: Option<Vec<f64>>,
    #[serde(default)]
    pub theta_grid: Option<Vec<f64>>,
    /// Subsample sizes for `meanfield`.
    #[serde(default)]
    pub ns: Option<Vec<usize>>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Configs run by `verify`, relative to this file.
    #[serde(default)]
    pub suite: Option<Vec<PathBuf>>,
}

/// A parsed config with its location, used to resolve relative paths.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub path: PathBuf,
    pub config: RunConfig,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let config: RunConfig = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(LoadedConfig {
            path: path.to_path_buf(),
            config,
        })
    }

    pub fn base_dir(&self) -> PathBuf {
        self.path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn resolve(&self, relative: &Path) -> PathBuf {
        if relative.is_absolute() {
            relative.to_path_buf()
        } else {
            self.base_dir().join(relative)
        }
    }

    pub fn stem(&self) -> String {
        self.path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into())
    }

    pub fn output_dir(&self) -> PathBuf {
        match &self.config.output_dir {
            Some(dir) => self.resolve(dir),
            None => self.base_dir().join("out").join(self.stem()),
        }
    }

    pub fn invalid(&self, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            path: self.path.clone(),
            message: message.into(),
        }
    }

    pub fn missing(&self, field: &'static str, command: Command) -> ConfigError {
        ConfigError::Missing {
            path: self.path.clone(),
            field,
            command,
        }
    }

    pub fn params(&self, command: Command) -> Result<ModelParams, ConfigError> {
        let params = self.config.params.ok_or_else(|| self.missing("params", command))?;
        params.validate().map_err(|e| self.invalid(e.to_string()))?;
        Ok(params)
    }

    pub fn sim(&self, command: Command) -> Result<SimConfig, ConfigError> {
        let sim = self.config.sim.ok_or_else(|| self.missing("sim", command))?;
        sim.validate().map_err(|e| self.invalid(e.to_string()))?;
        Ok(sim)
    }

    pub fn measure(&self, source: &MeasureSource, seed: u64) -> Result<EmpiricalMeasure, ConfigError> {
        match source {
            MeasureSource::Inline(triples) => {
                EmpiricalMeasure::from_triples(triples).map_err(|source| ConfigError::Measure {
                    path: self.path.clone(),
                    source,
                })
            }
            MeasureSource::File { path } => {
                let full = self.resolve(path);
                io::read_measure(&full).map_err(|source| ConfigError::Io { path: full, source })
            }
            MeasureSource::Random { random } => random.build(seed).map_err(|m| self.invalid(m)),
        }
    }

    pub fn initial_measure(&self, command: Command) -> Result<EmpiricalMeasure, ConfigError> {
        let source = self
            .config
            .initial_measure
            .as_ref()
            .ok_or_else(|| self.missing("initial_measure", command))?;
        self.measure(source, self.config.seed)
    }

    /// The second initialization draws from the next seed so that two
    /// random sources with the same recipe still differ.
    pub fn initial_measure_b(&self, command: Command) -> Result<EmpiricalMeasure, ConfigError> {
        let source = self
            .config
            .initial_measure_b
            .as_ref()
            .ok_or_else(|| self.missing("initial_measure_b", command))?;
        self.measure(source, self.config.seed.wrapping_add(1))
    }
}
