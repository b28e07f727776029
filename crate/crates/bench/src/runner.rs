//! Single training runs and their trace/summary files.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use came_core::optimizers::{warmup_lr, OptimizerState};
use came_core::problems::{check_params, Problem};
use came_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{BenchError, Result};

pub const TRACE_HEADER: &str = "step,loss,grad_rms,update_rms,lr,elapsed_ms";
pub const STRICT_TRACE_HEADER: &str = "step,loss,grad_rms,update_rms,lr";
pub const TIMING_HEADER: &str = "step,elapsed_ms";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: u64,
    /// Loss at the parameters the gradient was taken at.
    pub loss: f64,
    pub grad_rms: f64,
    pub update_rms: f64,
    pub lr: f64,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub rows: Vec<TraceRow>,
}

impl TrainTrace {
    /// CSV text. Strict mode drops the wall-clock column.
    pub fn to_csv(&self, strict: bool) -> String {
        let mut out = String::new();
        out.push_str(if strict { STRICT_TRACE_HEADER } else { TRACE_HEADER });
        out.push('\n');
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{:e},{:e},{:e},{:e}",
                r.step, r.loss, r.grad_rms, r.update_rms, r.lr
            );
            if !strict {
                let _ = write!(out, ",{:.3}", r.elapsed_ms);
            }
            out.push('\n');
        }
        out
    }

    pub fn timing_csv(&self) -> String {
        let mut out = String::from(TIMING_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{},{:.3}", r.step, r.elapsed_ms);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub problem: String,
    pub optimizer: String,
    pub seed: u64,
    pub steps: u64,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub best_loss: f64,
    pub threshold: Option<f64>,
    /// Optimizer steps taken before the loss first reached the threshold.
    pub steps_to_threshold: Option<u64>,
    pub known_optimum: Option<f64>,
    pub state_elements: usize,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trace: TrainTrace,
    pub summary: RunSummary,
    pub params: Vec<Matrix>,
}

fn global_rms<'a>(ms: impl Iterator<Item = &'a Matrix>) -> f64 {
    let (mut sq, mut n) = (0.0, 0usize);
    for m in ms {
        sq += m.as_slice().iter().map(|x| x * x).sum::<f64>();
        n += m.len();
    }
    if n == 0 {
        0.0
    } else {
        (sq / n as f64).sqrt()
    }
}

/// Trains `problem` from an explicit starting point.
pub fn train(
    problem: &dyn Problem,
    mut params: Vec<Matrix>,
    config: &RunConfig,
) -> Result<(TrainTrace, Vec<Matrix>, usize)> {
    check_params(problem, &params)?;
    let cfg = &config.hyper;
    let mut states: Vec<OptimizerState> = params
        .iter()
        .map(|p| OptimizerState::new(config.optimizer, p.rows(), p.cols(), cfg))
        .collect();
    let state_elements = states.iter().map(OptimizerState::state_elements).sum();

    let start = Instant::now();
    let mut rows = Vec::with_capacity(config.steps as usize);
    for step in 1..=config.steps {
        let (loss, grads) = problem.loss_and_grad(&params);
        let mut next = Vec::with_capacity(params.len());
        for ((state, theta), g) in states.iter_mut().zip(&params).zip(&grads) {
            next.push(state.step(theta, g, cfg)?);
        }
        let deltas: Vec<Matrix> = next
            .iter()
            .zip(&params)
            .map(|(a, b)| a.sub(b))
            .collect::<came_core::Result<_>>()?;
        rows.push(TraceRow {
            step,
            loss,
            grad_rms: global_rms(grads.iter()),
            update_rms: global_rms(deltas.iter()),
            lr: warmup_lr(step, cfg),
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        params = next;
    }
    Ok((TrainTrace { rows }, params, state_elements))
}

/// Runs one configuration end to end. The result depends only on `config`
/// (apart from the wall-clock column).
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let problem = config.problem.build(config.seed);
    let init = problem.init_params(config.seed);
    let (trace, params, state_elements) = train(problem.as_ref(), init, config)?;

    let final_loss = problem.loss(&params);
    let initial_loss = trace.rows.first().map_or(final_loss, |r| r.loss);
    let best_loss = trace
        .rows
        .iter()
        .map(|r| r.loss)
        .chain(std::iter::once(final_loss))
        .fold(f64::INFINITY, |a, b| if b < a { b } else { a });
    let steps_to_threshold = config.threshold.and_then(|t| {
        trace
            .rows
            .iter()
            .find(|r| r.loss <= t)
            .map(|r| r.step - 1)
            .or((final_loss <= t).then_some(config.steps))
    });
    let summary = RunSummary {
        problem: problem.name().to_string(),
        optimizer: config.optimizer.to_string(),
        seed: config.seed,
        steps: config.steps,
        initial_loss,
        final_loss,
        best_loss,
        threshold: config.threshold,
        steps_to_threshold,
        known_optimum: problem.known_optimum(),
        state_elements,
        config: config.clone(),
    };
    Ok(RunOutput {
        trace,
        summary,
        params,
    })
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes `contents` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    }
    let tmp = with_suffix(path, &format!(".tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| BenchError::io(&tmp, e))?;
    f.write_all(contents).map_err(|e| BenchError::io(&tmp, e))?;
    f.sync_all().map_err(|e| BenchError::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| BenchError::io(path, e))
}

/// Paths written for an output prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub trace: PathBuf,
    pub summary: PathBuf,
    pub timing: Option<PathBuf>,
}

impl OutputPaths {
    pub fn new(prefix: &Path, strict: bool) -> Self {
        Self {
            trace: with_suffix(prefix, ".trace.csv"),
            summary: with_suffix(prefix, ".summary.json"),
            timing: strict.then(|| with_suffix(prefix, ".timing.csv")),
        }
    }
}

/// Writes trace CSV, summary JSON and, in strict mode, the timing sidecar.
pub fn write_outputs(output: &RunOutput, prefix: &Path, strict: bool) -> Result<OutputPaths> {
    let paths = OutputPaths::new(prefix, strict);
    write_atomic(&paths.trace, output.trace.to_csv(strict).as_bytes())?;
    let json = serde_json::to_string_pretty(&output.summary).expect("summary serializes");
    write_atomic(&paths.summary, json.as_bytes())?;
    if let Some(timing) = &paths.timing {
        write_atomic(timing, output.trace.timing_csv().as_bytes())?;
    }
    Ok(paths)
}
