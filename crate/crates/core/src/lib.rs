//! CAME, Adafactor and Adam optimizers on dense `f64` matrices, with the
//! rank-1 factored accumulators they rely on, small test objectives, and an
//! analytic model of optimizer-state memory.

pub mod error;
pub mod factored_moment;
pub mod memory_model;
pub mod optimizers;
pub mod problems;
pub mod tensor;

pub use error::{Error, Result};
pub use factored_moment::{
    generalized_kl, nmf_rank1, FactoredEma, FullEma, Layout, MomentAccumulator,
};
pub use memory_model::{report, state_elements, MemoryReport, ShapeManifest, StateKind};
pub use optimizers::{
    adafactor_step, adam_step, came_step, clip_by_rms, raw_confidence_step, warmup_lr, Algorithm,
    InstabilityResidual, OptimizerConfig, OptimizerState,
};
pub use problems::{finite_diff_grad, gradient_check, ParamSpec, Problem};
pub use tensor::{outer_quotient, Matrix};
