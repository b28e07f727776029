//! Multi-optimizer, multi-seed comparisons.

use std::fmt;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{BenchError, Result};
use crate::runner::{run, RunSummary};

/// Caps the number of concurrent runs inside `compare`.
pub const THREADS_ENV: &str = "CAME_OPT_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerResult {
    pub label: String,
    pub final_losses: Vec<f64>,
    pub median_final_loss: f64,
    pub steps_to_threshold: Vec<Option<u64>>,
    /// Median over seeds, counting runs that never reach the threshold as
    /// `steps + 1`. `None` without a threshold.
    pub median_steps_to_threshold: Option<f64>,
    /// Median loss across seeds at each step.
    pub median_curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub problem: String,
    pub steps: u64,
    pub seeds: Vec<u64>,
    pub results: Vec<OptimizerResult>,
    /// `wins[i][j]`: seeds on which optimizer `i` ended strictly below `j`.
    pub wins: Vec<Vec<u32>>,
}

/// Median with NaN ordered above every number.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values
        .iter()
        .map(|x| if x.is_nan() { f64::INFINITY } else { *x })
        .collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn labels(configs: &[RunConfig]) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(configs.len());
    for c in configs {
        let base = c.optimizer.to_string();
        let mut label = base.clone();
        let mut k = 2;
        while out.contains(&label) {
            label = format!("{base}#{k}");
            k += 1;
        }
        out.push(label);
    }
    out
}

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs every (config, seed) pair. Configs must share problem and step count.
pub fn compare(configs: &[RunConfig], seeds: &[u64]) -> Result<Comparison> {
    let first = configs
        .first()
        .ok_or_else(|| BenchError::Compare("no optimizer configs given".into()))?;
    if seeds.is_empty() {
        return Err(BenchError::Compare("no seeds given".into()));
    }
    for c in configs {
        if c.problem != first.problem {
            return Err(BenchError::Compare(format!(
                "configs use different problems ({} vs {})",
                first.problem.kind, c.problem.kind
            )));
        }
        if c.steps != first.steps {
            return Err(BenchError::Compare(format!(
                "configs use different step counts ({} vs {})",
                first.steps, c.steps
            )));
        }
        c.validate()?;
    }

    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    let execute = || -> Vec<Result<(RunSummary, Vec<f64>)>> {
        jobs.par_iter()
            .map(|&(i, seed)| {
                let mut cfg = configs[i].clone();
                cfg.seed = seed;
                cfg.out = None;
                let out = run(&cfg)?;
                let curve = out.trace.rows.iter().map(|r| r.loss).collect();
                Ok((out.summary, curve))
            })
            .collect()
    };
    let outcomes = match thread_cap() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| BenchError::Compare(format!("thread pool: {e}")))?
            .install(execute),
        None => execute(),
    };
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let steps = first.steps;
    let mut results = Vec::with_capacity(configs.len());
    for (i, label) in labels(configs).into_iter().enumerate() {
        let runs = &outcomes[i * seeds.len()..(i + 1) * seeds.len()];
        let final_losses: Vec<f64> = runs.iter().map(|(s, _)| s.final_loss).collect();
        let steps_to_threshold: Vec<Option<u64>> =
            runs.iter().map(|(s, _)| s.steps_to_threshold).collect();
        let median_steps_to_threshold = first.threshold.map(|_| {
            let v: Vec<f64> = steps_to_threshold
                .iter()
                .map(|s| s.map_or(steps as f64 + 1.0, |s| s as f64))
                .collect();
            median(&v)
        });
        let median_curve = (0..steps as usize)
            .map(|t| median(&runs.iter().map(|(_, c)| c[t]).collect::<Vec<_>>()))
            .collect();
        results.push(OptimizerResult {
            label,
            median_final_loss: median(&final_losses),
            final_losses,
            steps_to_threshold,
            median_steps_to_threshold,
            median_curve,
        });
    }

    let wins = results
        .iter()
        .map(|a| {
            results
                .iter()
                .map(|b| {
                    a.final_losses
                        .iter()
                        .zip(&b.final_losses)
                        .filter(|(x, y)| x < y)
                        .count() as u32
                })
                .collect()
        })
        .collect();

    Ok(Comparison {
        problem: first.problem.kind.to_string(),
        steps,
        seeds: seeds.to_vec(),
        results,
        wins,
    })
}

impl Comparison {
    pub fn result(&self, label: &str) -> Option<&OptimizerResult> {
        self.results.iter().find(|r| r.label == label)
    }

    /// `step,<label>...` with the median loss across seeds.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step");
        for r in &self.results {
            out.push(',');
            out.push_str(&r.label);
        }
        out.push('\n');
        for t in 0..self.steps as usize {
            let _ = write!(out, "{}", t + 1);
            for r in &self.results {
                let _ = write!(out, ",{:e}", r.median_curve[t]);
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "problem: {}   steps: {}   seeds: {}",
            self.problem,
            self.steps,
            self.seeds.len()
        )?;
        writeln!(
            f,
            "{:<16} {:>18} {:>18}",
            "optimizer", "median final loss", "median steps-to-thr"
        )?;
        for r in &self.results {
            let stt = r
                .median_steps_to_threshold
                .map_or_else(|| "-".to_string(), |s| format!("{s}"));
            writeln!(f, "{:<16} {:>18.6e} {:>18}", r.label, r.median_final_loss, stt)?;
        }
        if self.results.len() > 1 {
            writeln!(f, "wins (row beats column):")?;
            write!(f, "{:<16}", "")?;
            for r in &self.results {
                write!(f, " {:>12}", r.label)?;
            }
            writeln!(f)?;
            for (r, row) in self.results.iter().zip(&self.wins) {
                write!(f, "{:<16}", r.label)?;
                for w in row {
                    write!(f, " {:>12}", w)?;
                }
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ProblemKind, ProblemSpec};
    use came_core::optimizers::Algorithm;

    fn cfg(kind: ProblemKind, optimizer: Algorithm, steps: u64) -> RunConfig {
        RunConfig {
            problem: ProblemSpec::new(kind),
            optimizer,
            steps,
            ..Default::default()
        }
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[f64::NAN, 1.0, 2.0]), 2.0);
    }

    #[test]
    fn identical_configs_give_identical_columns() {
        let c = cfg(ProblemKind::Rosenbrock, Algorithm::Came, 30);
        let cmp = compare(&[c.clone(), c], &[0, 1, 2]).unwrap();
        assert_eq!(cmp.results[0].label, "came");
        assert_eq!(cmp.results[1].label, "came#2");
        assert_eq!(cmp.results[0].median_curve, cmp.results[1].median_curve);
        assert_eq!(cmp.results[0].final_losses, cmp.results[1].final_losses);
        assert_eq!(cmp.wins, vec![vec![0, 0], vec![0, 0]]);
        let csv = cmp.to_csv();
        for line in csv.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols[1], cols[2]);
        }
    }

    #[test]
    fn single_optimizer_matches_run_summary() {
        let mut c = cfg(ProblemKind::Quadratic, Algorithm::Adam, 40);
        c.seed = 5;
        let cmp = compare(std::slice::from_ref(&c), &[5]).unwrap();
        let direct = run(&c).unwrap();
        assert_eq!(cmp.results[0].median_final_loss, direct.summary.final_loss);
        assert_eq!(cmp.results.len(), 1);
    }

    #[test]
    fn mismatched_problems_rejected() {
        let a = cfg(ProblemKind::Rosenbrock, Algorithm::Came, 10);
        let b = cfg(ProblemKind::Quadratic, Algorithm::Adam, 10);
        assert!(matches!(compare(&[a.clone(), b], &[0]), Err(BenchError::Compare(_))));
        let mut c = a.clone();
        c.steps = 11;
        assert!(matches!(compare(&[a.clone(), c], &[0]), Err(BenchError::Compare(_))));
        assert!(compare(&[a], &[]).is_err());
        assert!(compare(&[], &[0]).is_err());
    }

    #[test]
    fn win_counts_are_consistent() {
        let a = cfg(ProblemKind::Quadratic, Algorithm::Adam, 50);
        let b = cfg(ProblemKind::Quadratic, Algorithm::Adafactor, 50);
        let cmp = compare(&[a, b], &[0, 1, 2, 3]).unwrap();
        assert!(cmp.wins[0][1] + cmp.wins[1][0] <= 4);
        assert_eq!(cmp.wins[0][0], 0);
        let text = cmp.to_string();
        assert!(text.contains("adam") && text.contains("adafactor"));
    }
}
