//! Run configuration and the flat `key = value` config format.
//!
//! Every setting has one key. Keys may be written with `-` or `_`, and the
//! same keys are used by config files and (as `--key`) by the CLI. Values are
//! resolved as command-line flags over config file over defaults.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use came_core::optimizers::{Algorithm, InstabilityResidual, OptimizerConfig};
use came_core::problems::{self, Problem};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Quadratic,
    Rosenbrock,
    Logreg,
    Mlp1,
}

impl ProblemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::Quadratic => "quadratic",
            ProblemKind::Rosenbrock => "rosenbrock",
            ProblemKind::Logreg => "logreg",
            ProblemKind::Mlp1 => "mlp1",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "quadratic" => Ok(ProblemKind::Quadratic),
            "rosenbrock" => Ok(ProblemKind::Rosenbrock),
            "logreg" => Ok(ProblemKind::Logreg),
            "mlp1" | "mlp" => Ok(ProblemKind::Mlp1),
            other => Err(format!("unknown problem `{other}`")),
        }
    }
}

/// A problem id plus every problem parameter; parameters that do not apply
/// to `kind` are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub dim: usize,
    pub condition: f64,
    pub samples: usize,
    pub features: usize,
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
}

impl ProblemSpec {
    pub fn new(kind: ProblemKind) -> Self {
        Self {
            kind,
            dim: 8,
            condition: 10.0,
            samples: 256,
            features: 8,
            in_dim: problems::MLP1_IN_DIM,
            hidden_dim: problems::MLP1_HIDDEN_DIM,
            out_dim: problems::MLP1_OUT_DIM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim),
            ("samples", self.samples),
            ("features", self.features),
            ("in-dim", self.in_dim),
            ("hidden-dim", self.hidden_dim),
            ("out-dim", self.out_dim),
        ];
        for (field, value) in positive {
            if value == 0 {
                return Err(BenchError::invalid(field, "must be at least 1"));
            }
        }
        if !(self.condition.is_finite() && self.condition >= 1.0) {
            return Err(BenchError::invalid(
                "condition",
                format!("must be at least 1, got {}", self.condition),
            ));
        }
        Ok(())
    }

    /// Instantiates the problem; data depends only on `seed`.
    pub fn build(&self, seed: u64) -> Box<dyn Problem> {
        match self.kind {
            ProblemKind::Quadratic => Box::new(problems::make_quadratic(self.dim, self.condition, seed)),
            ProblemKind::Rosenbrock => Box::new(problems::make_rosenbrock()),
            ProblemKind::Logreg => Box::new(problems::make_logreg(self.samples, self.features, seed)),
            ProblemKind::Mlp1 => Box::new(problems::make_mlp1(
                self.in_dim,
                self.hidden_dim,
                self.out_dim,
                seed,
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub optimizer: Algorithm,
    pub hyper: OptimizerConfig,
    pub steps: u64,
    pub seed: u64,
    /// Loss level for the steps-to-threshold statistic.
    pub threshold: Option<f64>,
    /// Output path prefix; nothing is written when absent.
    pub out: Option<PathBuf>,
    pub strict_determinism: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSpec::new(ProblemKind::Quadratic),
            optimizer: Algorithm::Came,
            hyper: OptimizerConfig::default(),
            steps: 1000,
            seed: 0,
            threshold: None,
            out: None,
            strict_determinism: false,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse::<T>()
        .map_err(|e| BenchError::invalid(key, format!("cannot parse `{value}`: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "" | "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(BenchError::invalid(key, format!("expected a boolean, got `{other}`"))),
    }
}

impl RunConfig {
    /// Sets one setting from its flat key.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        let k = key.as_str();
        match k {
            "problem" => {
                self.problem.kind = value.trim().parse().map_err(|e| BenchError::invalid(k, e))?
            }
            "optimizer" => {
                self.optimizer = value.trim().parse().map_err(|e| BenchError::invalid(k, e))?
            }
            "steps" => self.steps = parse_value(k, value)?,
            "seed" => self.seed = parse_value(k, value)?,
            "lr" => self.hyper.lr = parse_value(k, value)?,
            "beta1" => self.hyper.beta1 = parse_value(k, value)?,
            "beta2" => self.hyper.beta2 = parse_value(k, value)?,
            "beta3" => self.hyper.beta3 = parse_value(k, value)?,
            "eps1" => self.hyper.eps1 = parse_value(k, value)?,
            "eps2" => self.hyper.eps2 = parse_value(k, value)?,
            "eps3" => self.hyper.eps3 = parse_value(k, value)?,
            "clip-d" => self.hyper.clip_d = parse_value(k, value)?,
            "warmup" | "warmup-steps" => self.hyper.warmup_steps = parse_value(k, value)?,
            "adam-eps" => self.hyper.adam_eps = parse_value(k, value)?,
            "residual" => {
                self.hyper.instability_residual = match value.trim() {
                    "updated" | "updated-momentum" => InstabilityResidual::UpdatedMomentum,
                    "previous" | "previous-momentum" => InstabilityResidual::PreviousMomentum,
                    other => {
                        return Err(BenchError::invalid(
                            k,
                            format!("expected `updated` or `previous`, got `{other}`"),
                        ))
                    }
                }
            }
            "threshold" => self.threshold = Some(parse_value(k, value)?),
            "out" => self.out = Some(PathBuf::from(value.trim())),
            "strict-determinism" => self.strict_determinism = parse_bool(k, value)?,
            "dim" => self.problem.dim = parse_value(k, value)?,
            "condition" => self.problem.condition = parse_value(k, value)?,
            "samples" => self.problem.samples = parse_value(k, value)?,
            "features" => self.problem.features = parse_value(k, value)?,
            "in-dim" => self.problem.in_dim = parse_value(k, value)?,
            "hidden-dim" => self.problem.hidden_dim = parse_value(k, value)?,
            "out-dim" => self.problem.out_dim = parse_value(k, value)?,
            _ => return Err(BenchError::UnknownKey(key.clone())),
        }
        Ok(())
    }

    /// Applies the contents of a config file (`key = value` per line, `#`
    /// comments).
    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<()> {
        for (key, value, line) in parse_kv(text, path)? {
            self.apply(&key, &value).map_err(|e| BenchError::ConfigFile {
                path: path.to_path_buf(),
                line,
                reason: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        self.apply_text(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(BenchError::invalid("steps", "must be at least 1"));
        }
        if let Some(t) = self.threshold {
            if !t.is_finite() {
                return Err(BenchError::invalid("threshold", "must be finite"));
            }
        }
        self.problem.validate()?;
        self.hyper.validate()?;
        Ok(())
    }
}

/// Splits `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str, path: &Path) -> Result<Vec<(String, String, usize)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(BenchError::ConfigFile {
                path: path.to_path_buf(),
                line: idx + 1,
                reason: format!("expected `key = value`, got `{line}`"),
            });
        };
        out.push((key.trim().to_string(), value.trim().to_string(), idx + 1));
    }
    Ok(out)
}

/// Parses `0,1,5` or `0..10` (exclusive) or a mix like `0..3,7`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = parse_value("seeds", a)?;
            let b: u64 = parse_value("seeds", b)?;
            if b <= a {
                return Err(BenchError::invalid("seeds", format!("empty range `{part}`")));
            }
            seeds.extend(a..b);
        } else {
            seeds.push(parse_value("seeds", part)?);
        }
    }
    if seeds.is_empty() {
        return Err(BenchError::invalid("seeds", "no seeds given"));
    }
    Ok(seeds)
}
