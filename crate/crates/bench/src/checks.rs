//! `grad-check` and `memory` commands.

use std::path::{Path, PathBuf};

use came_core::memory_model::{report, MemoryReport, ShapeManifest, StateKind};
use came_core::problems::{gradient_check, GradCheckReport, Problem};

use crate::error::{BenchError, Result};

/// Manifest name accepted in place of a path.
pub const BUNDLED_MANIFEST: &str = "bert-large";

/// Runs a gradient check and turns a failure into an error naming the
/// offending parameters.
pub fn grad_check(
    problem: &dyn Problem,
    points: usize,
    seed: u64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    if points == 0 {
        return Err(BenchError::invalid("points", "must be at least 1"));
    }
    if !(tolerance.is_finite() && tolerance > 0.0) {
        return Err(BenchError::invalid("tol", format!("must be positive, got {tolerance}")));
    }
    let rep = gradient_check(problem, points, seed, tolerance);
    if rep.passed {
        Ok(rep)
    } else {
        let params: Vec<&str> = rep.failing().map(|p| p.name.as_str()).collect();
        Err(BenchError::GradCheckFailed {
            problem: rep.problem.clone(),
            params: params.join(","),
            tolerance,
            max_error: rep.max_relative_error(),
        })
    }
}

/// Text table for a passing report.
pub fn render_grad_check(rep: &GradCheckReport) -> String {
    let mut out = format!(
        "problem: {}   points: {}   tolerance: {:e}\n",
        rep.problem, rep.points, rep.tolerance
    );
    out.push_str(&format!("{:<20} {:>16}\n", "param", "max rel error"));
    for p in &rep.params {
        out.push_str(&format!("{:<20} {:>16.3e}\n", p.name, p.max_relative_error));
    }
    out.push_str(if rep.passed { "PASS\n" } else { "FAIL\n" });
    out
}

pub fn load_manifest(source: &str) -> Result<ShapeManifest> {
    if source == BUNDLED_MANIFEST {
        return Ok(ShapeManifest::bert_large());
    }
    let path = PathBuf::from(source);
    let text = std::fs::read_to_string(&path).map_err(|e| BenchError::io(&path, e))?;
    Ok(ShapeManifest::parse(&text)?)
}

/// Loads, optionally scales, and reports a manifest.
pub fn memory(source: &str, baseline: StateKind, scale: usize) -> Result<MemoryReport> {
    if scale == 0 {
        return Err(BenchError::invalid("scale", "must be at least 1"));
    }
    let mut manifest = load_manifest(source)?;
    if scale != 1 {
        manifest = manifest.scaled(scale);
    }
    Ok(report(&manifest, baseline)?)
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value).expect("report serializes");
    crate::runner::write_atomic(path, json.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use came_core::problems::make_rosenbrock;

    #[test]
    fn rosenbrock_passes() {
        let rep = grad_check(&make_rosenbrock(), 10, 0, 1e-8).unwrap();
        assert!(rep.passed);
        assert!(render_grad_check(&rep).ends_with("PASS\n"));
    }

    #[test]
    fn argument_validation() {
        assert!(grad_check(&make_rosenbrock(), 0, 0, 1e-8).is_err());
        assert!(grad_check(&make_rosenbrock(), 1, 0, 0.0).is_err());
        assert!(memory(BUNDLED_MANIFEST, StateKind::Adam, 0).is_err());
    }

    #[test]
    fn bundled_memory_report() {
        let rep = memory(BUNDLED_MANIFEST, StateKind::Adam, 1).unwrap();
        assert!(rep.total(StateKind::Came) < rep.total(StateKind::Adam));
        assert!(matches!(
            memory("/nonexistent/manifest.txt", StateKind::Adam, 1),
            Err(BenchError::Io { .. })
        ));
    }
}
