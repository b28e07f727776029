//! Adafactor, CAME, Adam and the raw-confidence variant behind one stepping
//! interface.
//!
//! Adafactor and CAME share the pipeline
//!
//! ```text
//! v_t = factored EMA of (g_t^2 + eps1)        (beta2)
//! u_t = g_t / sqrt(v_t)
//! û_t = u_t / max(1, rms(u_t) / d)
//! m_t = beta1 m_{t-1} + (1 - beta1) û_t
//! ```
//!
//! after which Adafactor steps by `lr * m_t`. CAME additionally keeps a
//! factored EMA `S_t` of the instability `(û_t - m_t)^2 + eps2` (beta3) and
//! steps by `lr * m_t / sqrt(S_t)`. The raw-confidence variant steps by
//! `lr * m_t / sqrt((m_t - û_t)^2 + eps3)` without any extra state.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factored_moment::{Layout, MomentAccumulator};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Adafactor,
    Came,
    Adam,
    RawConfidence,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Adafactor,
        Algorithm::Came,
        Algorithm::Adam,
        Algorithm::RawConfidence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Adafactor => "adafactor",
            Algorithm::Came => "came",
            Algorithm::Adam => "adam",
            Algorithm::RawConfidence => "raw-confidence",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "adafactor" => Ok(Algorithm::Adafactor),
            "came" => Ok(Algorithm::Came),
            "adam" => Ok(Algorithm::Adam),
            "raw-confidence" | "raw_confidence" | "rawconfidence" => {
                Ok(Algorithm::RawConfidence)
            }
            other => Err(format!("unknown optimizer `{other}`")),
        }
    }
}

/// Which momentum the CAME instability residual is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstabilityResidual {
    /// `(û_t - m_t)^2` with the momentum that already absorbed `û_t`.
    #[default]
    UpdatedMomentum,
    /// `(û_t - m_{t-1})^2`, the momentum before this step.
    PreviousMomentum,
}

/// Scalar hyperparameters shared by every optimizer.
///
/// `beta2`/`eps1` and `beta3`/`eps2` are bound into the accumulators when an
/// [`OptimizerState`] is created; the remaining fields are read on every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub clip_d: f64,
    pub eps3: f64,
    pub warmup_steps: u64,
    pub adam_eps: f64,
    pub instability_residual: InstabilityResidual,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            beta3: 0.9999,
            eps1: 1e-30,
            eps2: 1e-16,
            clip_d: 1.0,
            eps3: 1e-6,
            warmup_steps: 0,
            adam_eps: 1e-8,
            instability_residual: InstabilityResidual::UpdatedMomentum,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        fn invalid(field: &'static str, reason: String) -> Error {
            Error::InvalidConfig { field, reason }
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(invalid("lr", format!("must be positive, got {}", self.lr)));
        }
        for (field, value) in [
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("beta3", self.beta3),
        ] {
            if !(value > 0.0 && value < 1.0) {
                return Err(invalid(field, format!("must lie in (0, 1), got {value}")));
            }
        }
        for (field, value) in [
            ("eps1", self.eps1),
            ("eps2", self.eps2),
            ("eps3", self.eps3),
            ("adam_eps", self.adam_eps),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(invalid(field, format!("must be nonnegative, got {value}")));
            }
        }
        if !(self.clip_d.is_finite() && self.clip_d > 0.0) {
            return Err(invalid(
                "clip_d",
                format!("must be positive, got {}", self.clip_d),
            ));
        }
        Ok(())
    }
}

/// Linear warmup: `lr * min(1, t / warmup_steps)`, or `lr` when disabled.
pub fn warmup_lr(t: u64, cfg: &OptimizerConfig) -> f64 {
    if cfg.warmup_steps == 0 || t >= cfg.warmup_steps {
        cfg.lr
    } else {
        cfg.lr * (t as f64 / cfg.warmup_steps as f64)
    }
}

/// Scales `u` down so that its RMS does not exceed `d`.
pub fn clip_by_rms(u: &Matrix, d: f64) -> Matrix {
    let denom = (u.rms() / d).max(1.0);
    if denom == 1.0 {
        u.clone()
    } else {
        u.scale(1.0 / denom)
    }
}

/// Per-parameter optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    algorithm: Algorithm,
    momentum: Matrix,
    second_moment: Option<MomentAccumulator>,
    instability: Option<MomentAccumulator>,
    adam_v: Option<Matrix>,
    t: u64,
}

/// Output of the shared Adafactor pipeline, not yet committed to the state.
struct Pipeline {
    second_moment: MomentAccumulator,
    clipped: Matrix,
    momentum: Matrix,
}

impl OptimizerState {
    /// Fresh state for a `rows x cols` parameter, factoring only genuine
    /// matrices (see [`Layout::for_shape`]).
    pub fn new(algorithm: Algorithm, rows: usize, cols: usize, cfg: &OptimizerConfig) -> Self {
        Self::with_layout(algorithm, rows, cols, Layout::for_shape(rows, cols), cfg)
    }

    /// Fresh state with an explicit accumulator layout.
    pub fn with_layout(
        algorithm: Algorithm,
        rows: usize,
        cols: usize,
        layout: Layout,
        cfg: &OptimizerConfig,
    ) -> Self {
        let momentum = Matrix::zeros(rows, cols);
        let (second_moment, instability, adam_v) = match algorithm {
            Algorithm::Adam => (None, None, Some(Matrix::zeros(rows, cols))),
            Algorithm::Adafactor | Algorithm::RawConfidence => (
                Some(MomentAccumulator::new(layout, rows, cols, cfg.beta2, cfg.eps1)),
                None,
                None,
            ),
            Algorithm::Came => (
                Some(MomentAccumulator::new(layout, rows, cols, cfg.beta2, cfg.eps1)),
                Some(MomentAccumulator::new(layout, rows, cols, cfg.beta3, cfg.eps2)),
                None,
            ),
        };
        Self {
            algorithm,
            momentum,
            second_moment,
            instability,
            adam_v,
            t: 0,
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn shape(&self) -> (usize, usize) {
        self.momentum.shape()
    }

    pub fn momentum(&self) -> &Matrix {
        &self.momentum
    }

    pub fn second_moment(&self) -> Option<&MomentAccumulator> {
        self.second_moment.as_ref()
    }

    pub fn instability(&self) -> Option<&MomentAccumulator> {
        self.instability.as_ref()
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Number of `f64` values this state persists between steps.
    pub fn state_elements(&self) -> usize {
        self.momentum.len()
            + self.second_moment.as_ref().map_or(0, |s| s.state_elements())
            + self.instability.as_ref().map_or(0, |s| s.state_elements())
            + self.adam_v.as_ref().map_or(0, |v| v.len())
    }

    fn check_shapes(&self, theta: &Matrix, grad: &Matrix) -> Result<()> {
        for (op, m) in [("step: theta", theta), ("step: grad", grad)] {
            if m.shape() != self.shape() {
                return Err(Error::ShapeMismatch {
                    op,
                    expected: self.shape(),
                    actual: m.shape(),
                });
            }
        }
        Ok(())
    }

    fn pipeline(&self, grad: &Matrix, cfg: &OptimizerConfig) -> Result<Pipeline> {
        let acc = self
            .second_moment
            .as_ref()
            .expect("factored pipeline without a second-moment accumulator");
        let second_moment = acc.updated(&grad.square())?;
        let v = second_moment.reconstruct()?;
        let u = grad.div(&v.sqrt())?;
        let clipped = clip_by_rms(&u, cfg.clip_d);
        let momentum = self.momentum.ema(&clipped, cfg.beta1)?;
        Ok(Pipeline {
            second_moment,
            clipped,
            momentum,
        })
    }

    /// Advances the state by one step and returns the new parameter value.
    ///
    /// Nothing is mutated unless the whole step succeeds.
    pub fn step(&mut self, theta: &Matrix, grad: &Matrix, cfg: &OptimizerConfig) -> Result<Matrix> {
        self.check_shapes(theta, grad)?;
        let t = self.t + 1;
        let lr = warmup_lr(t, cfg);

        let theta_next = match self.algorithm {
            Algorithm::Adafactor => {
                let p = self.pipeline(grad, cfg)?;
                let next = theta.sub(&p.momentum.scale(lr))?;
                self.second_moment = Some(p.second_moment);
                self.momentum = p.momentum;
                next
            }
            Algorithm::Came => {
                let p = self.pipeline(grad, cfg)?;
                let reference = match cfg.instability_residual {
                    InstabilityResidual::UpdatedMomentum => &p.momentum,
                    InstabilityResidual::PreviousMomentum => &self.momentum,
                };
                let instability_sample = p.clipped.sub(reference)?.square();
                let instability = self
                    .instability
                    .as_ref()
                    .expect("CAME state without an instability accumulator")
                    .updated(&instability_sample)?;
                let s = instability.reconstruct()?;
                let direction = p.momentum.div(&s.sqrt())?;
                let next = theta.sub(&direction.scale(lr))?;
                self.second_moment = Some(p.second_moment);
                self.instability = Some(instability);
                self.momentum = p.momentum;
                next
            }
            Algorithm::RawConfidence => {
                let p = self.pipeline(grad, cfg)?;
                let denom = p
                    .momentum
                    .sub(&p.clipped)?
                    .square()
                    .add_scalar(cfg.eps3)
                    .sqrt();
                let direction = p.momentum.div(&denom)?;
                let next = theta.sub(&direction.scale(lr))?;
                self.second_moment = Some(p.second_moment);
                self.momentum = p.momentum;
                next
            }
            Algorithm::Adam => {
                let v_prev = self.adam_v.as_ref().expect("Adam state without v");
                let m = self.momentum.ema(grad, cfg.beta1)?;
                let v = v_prev.ema(&grad.square(), cfg.beta2)?;
                let bc1 = 1.0 - cfg.beta1.powf(t as f64);
                let bc2 = 1.0 - cfg.beta2.powf(t as f64);
                let direction = m.zip_map(&v, "adam", |mi, vi| {
                    if mi == 0.0 {
                        0.0
                    } else {
                        (mi / bc1) / ((vi / bc2).sqrt() + cfg.adam_eps)
                    }
                })?;
                let next = theta.sub(&direction.scale(lr))?;
                self.momentum = m;
                self.adam_v = Some(v);
                next
            }
        };
        self.t = t;
        Ok(theta_next)
    }

    fn step_as(
        &mut self,
        requested: Algorithm,
        theta: &Matrix,
        grad: &Matrix,
        cfg: &OptimizerConfig,
    ) -> Result<Matrix> {
        if self.algorithm != requested {
            return Err(Error::VariantMismatch {
                state: self.algorithm.as_str(),
                requested: requested.as_str(),
            });
        }
        self.step(theta, grad, cfg)
    }
}

pub fn adafactor_step(
    theta: &Matrix,
    grad: &Matrix,
    state: &mut OptimizerState,
    cfg: &OptimizerConfig,
) -> Result<Matrix> {
    state.step_as(Algorithm::Adafactor, theta, grad, cfg)
}

pub fn came_step(
    theta: &Matrix,
    grad: &Matrix,
    state: &mut OptimizerState,
    cfg: &OptimizerConfig,
) -> Result<Matrix> {
    state.step_as(Algorithm::Came, theta, grad, cfg)
}

pub fn adam_step(
    theta: &Matrix,
    grad: &Matrix,
    state: &mut OptimizerState,
    cfg: &OptimizerConfig,
) -> Result<Matrix> {
    state.step_as(Algorithm::Adam, theta, grad, cfg)
}

pub fn raw_confidence_step(
    theta: &Matrix,
    grad: &Matrix,
    state: &mut OptimizerState,
    cfg: &OptimizerConfig,
) -> Result<Matrix> {
    state.step_as(Algorithm::RawConfidence, theta, grad, cfg)
}
