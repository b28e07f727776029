//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use came_bench::config::{ProblemKind, ProblemSpec, RunConfig};
use came_bench::compare;
use came_core::memory_model::{report, ShapeManifest, StateKind};
use came_core::optimizers::{Algorithm, OptimizerConfig, OptimizerState};
use came_core::problems::{
    gradient_check, make_logreg, make_mlp1_canonical, make_quadratic, make_rosenbrock, Problem,
};
use came_core::{generalized_kl, nmf_rank1, Layout, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn within(elapsed: Duration, budget_s: f64) -> bool {
    elapsed.as_secs_f64() < budget_s
}

fn nonnegative(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Matrix {
    loop {
        let data: Vec<f64> = (0..n * m)
            .map(|_| {
                if rng.random_bool(0.1) {
                    0.0
                } else {
                    rng.random_range(0.0..10.0)
                }
            })
            .collect();
        let v = Matrix::from_vec(n, m, data).unwrap();
        if v.sum() > 0.0 {
            return v;
        }
    }
}

fn marginal_error(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| {
            if *y == 0.0 {
                x.abs()
            } else {
                (x - y).abs() / y.abs()
            }
        })
        .fold(0.0, f64::max)
}

fn nmf_marginals() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_marginal, mut worst_rank1) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let (n, m) = (rng.random_range(1..=32), rng.random_range(1..=32));
        let v = nonnegative(&mut rng, n, m);
        let (w, h) = nmf_rank1(&v).unwrap();
        let wh = w.matmul(&h).unwrap();
        worst_marginal = worst_marginal
            .max(marginal_error(&wh.row_sums(), &v.row_sums()))
            .max(marginal_error(&wh.col_sums(), &v.col_sums()));

        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..10.0)).collect();
        let b: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..10.0)).collect();
        let r1 = Matrix::column(&a).matmul(&Matrix::row(&b)).unwrap();
        let (w, h) = nmf_rank1(&r1).unwrap();
        let back = w.matmul(&h).unwrap();
        worst_rank1 = worst_rank1.max(marginal_error(&back, &r1));
    }
    let elapsed = start.elapsed();
    outcome(
        worst_marginal <= 1e-12 && worst_rank1 <= 1e-14 && within(elapsed, 5.0),
        format!(
            "max marginal rel err {worst_marginal:.2e} (<= 1e-12), max rank-1 rel err {worst_rank1:.2e} (<= 1e-14), {elapsed:.2?} (< 5 s)"
        ),
    )
}

/// Multiplies every entry by an independent factor in `[0.99, 1.01]`.
fn jitter(rng: &mut ChaCha8Rng, m: &Matrix) -> Matrix {
    let data = m
        .as_slice()
        .iter()
        .map(|x| x * (1.0 + rng.random_range(-0.01..=0.01)))
        .collect();
    Matrix::from_vec(m.rows(), m.cols(), data).unwrap()
}

fn kl_optimality() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_gain = f64::NEG_INFINITY;
    for _ in 0..100 {
        let v = nonnegative(&mut rng, 16, 16);
        let (w, h) = nmf_rank1(&v).unwrap();
        let base = generalized_kl(&v, &w.matmul(&h).unwrap()).unwrap();
        for _ in 0..200 {
            let wp = jitter(&mut rng, &w);
            let hp = jitter(&mut rng, &h);
            let kl = generalized_kl(&v, &wp.matmul(&hp).unwrap()).unwrap();
            worst_gain = worst_gain.max(base - kl);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst_gain <= 1e-9 && within(elapsed, 10.0),
        format!(
            "largest KL reduction {worst_gain:.2e} (<= 1e-9), {elapsed:.2?} (< 10 s)"
        ),
    )
}

fn scalar_step(algorithm: Algorithm) -> f64 {
    let cfg = OptimizerConfig {
        eps3: 1e-16,
        ..OptimizerConfig::default()
    };
    let mut state = OptimizerState::new(algorithm, 1, 1, &cfg);
    state
        .step(&Matrix::scalar(1.0), &Matrix::scalar(2.0), &cfg)
        .unwrap()
        .get(0, 0)
}

fn scalar_examples() -> Outcome {
    // theta0 = 1, g = 2, defaults with eps3 = 1e-16: clipped update 1, m = 0.1,
    // residual 0.81.
    let cases = [
        (Algorithm::Adafactor, 0.9999),
        (Algorithm::Came, 1.0 - 1.0 / 90.0),
        (Algorithm::RawConfidence, 1.0 - 1.0 / 9000.0),
    ];
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (alg, want) in cases {
        let got = scalar_step(alg);
        worst = worst.max((got - want).abs());
        parts.push(format!("{alg} {got:.9}"));
    }
    outcome(
        worst <= 1e-9,
        format!("{}; max abs err {worst:.2e} (<= 1e-9)", parts.join(", ")),
    )
}

fn scalar_oracle() -> Outcome {
    let cfg = OptimizerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for run in 0..10 {
        let mut state =
            OptimizerState::with_layout(Algorithm::Adafactor, 1, 1, Layout::Factored, &cfg);
        let mut theta = Matrix::scalar(rng.random_range(-2.0..2.0));
        let mut x = theta.get(0, 0);
        let (mut v, mut m) = (0.0f64, 0.0f64);
        for _ in 0..100 {
            let g = if run == 0 { 0.0 } else { rng.random_range(-3.0..3.0) * x.abs().max(0.1) };
            theta = state.step(&theta, &Matrix::scalar(g), &cfg).unwrap();
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * (g * g + cfg.eps1);
            let u = g / v.sqrt();
            let clipped = u / f64::max(1.0, u.abs() / cfg.clip_d);
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * clipped;
            x -= cfg.lr * m;
            worst = worst.max((theta.get(0, 0) - x).abs());
        }
    }
    outcome(
        worst <= 1e-12,
        format!("10 runs x 100 steps, max per-step abs diff {worst:.2e} (<= 1e-12)"),
    )
}

fn gradient_checks() -> Outcome {
    let start = Instant::now();
    let problems: Vec<(Box<dyn Problem>, f64)> = vec![
        (Box::new(make_quadratic(8, 10.0, 0)), 1e-8),
        (Box::new(make_rosenbrock()), 1e-8),
        (Box::new(make_logreg(256, 8, 0)), 1e-6),
        (Box::new(make_mlp1_canonical(0)), 1e-6),
    ];
    let mut passed = true;
    let mut parts = Vec::new();
    for (p, tol) in &problems {
        let rep = gradient_check(p.as_ref(), 10, 0, *tol);
        passed &= rep.passed;
        parts.push(format!("{} {:.1e} (< {tol:.0e})", rep.problem, rep.max_relative_error()));
    }
    let elapsed = start.elapsed();
    outcome(
        passed && within(elapsed, 5.0),
        format!("{}; {elapsed:.2?} (< 5 s)", parts.join(", ")),
    )
}

fn protocol(kind: ProblemKind, optimizer: Algorithm) -> RunConfig {
    RunConfig {
        problem: ProblemSpec::new(kind),
        optimizer,
        hyper: OptimizerConfig::default(),
        steps: 2000,
        ..RunConfig::default()
    }
}

fn convergence_ordering() -> Outcome {
    let start = Instant::now();
    let seeds: Vec<u64> = (0..10).collect();
    let mlp = compare(
        &[
            protocol(ProblemKind::Mlp1, Algorithm::Came),
            protocol(ProblemKind::Mlp1, Algorithm::Adafactor),
        ],
        &seeds,
    )
    .unwrap();
    let logreg = compare(
        &[
            protocol(ProblemKind::Logreg, Algorithm::Came),
            protocol(ProblemKind::Logreg, Algorithm::Adam),
        ],
        &seeds,
    )
    .unwrap();
    let elapsed = start.elapsed();
    let came_mlp = mlp.result("came").unwrap().median_final_loss;
    let adafactor_mlp = mlp.result("adafactor").unwrap().median_final_loss;
    let came_lr = logreg.result("came").unwrap().median_final_loss;
    let adam_lr = logreg.result("adam").unwrap().median_final_loss;
    let excess = (came_lr - adam_lr) / adam_lr;
    outcome(
        came_mlp <= adafactor_mlp && excess <= 0.10 && within(elapsed, 120.0),
        format!(
            "mlp1 median came {came_mlp:.3e} <= adafactor {adafactor_mlp:.3e}; logreg median came {came_lr:.4e} vs adam {adam_lr:.4e} (excess {:+.1}%, <= +10%); {elapsed:.2?} (< 120 s)",
            excess * 100.0
        ),
    )
}

fn memory_model() -> Outcome {
    let start = Instant::now();
    let bert = ShapeManifest::bert_large();
    let rep = report(&bert, StateKind::Adam).unwrap();
    let (adafactor, came, adam, lamb) = (
        rep.total(StateKind::Adafactor),
        rep.total(StateKind::Came),
        rep.total(StateKind::Adam),
        rep.total(StateKind::Lamb),
    );
    let overhead = (came - adafactor) as f64 / adafactor as f64;
    let ratio = came as f64 / adam as f64;
    let scaled = report(&bert.scaled(4), StateKind::Adam).unwrap();
    let reduction = 1.0 - scaled.get(StateKind::Came).ratio_to_baseline;
    let elapsed = start.elapsed();
    outcome(
        adafactor < came
            && came < adam
            && adam == lamb
            && overhead <= 0.015
            && ratio <= 0.55
            && reduction > 0.45
            && within(elapsed, 1.0),
        format!(
            "adafactor {adafactor} < came {came} < adam {adam} = lamb {lamb}; overhead {:.3}% (<= 1.5%); came/adam {ratio:.4} (<= 0.55); 4x reduction {:.2}% (> 45%); {elapsed:.2?} (< 1 s)",
            overhead * 100.0,
            reduction * 100.0
        ),
    )
}

fn run_cli(dir: &Path, name: &str, args: &[&str]) -> Vec<u8> {
    let prefix = dir.join(name);
    let status = Command::new(env!("CARGO_BIN_EXE_came-bench"))
        .arg("run")
        .args(args)
        .arg("--strict-determinism")
        .arg("--out")
        .arg(&prefix)
        .output()
        .expect("binary runs");
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    std::fs::read(dir.join(format!("{name}.trace.csv"))).unwrap()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 4] = [
        &["--problem", "mlp1", "--optimizer", "came", "--steps", "200", "--seed", "3"],
        &["--problem", "logreg", "--optimizer", "adam", "--steps", "300", "--seed", "7"],
        &["--problem", "rosenbrock", "--optimizer", "adafactor", "--steps", "300"],
        &["--problem", "quadratic", "--optimizer", "raw-confidence", "--steps", "300", "--warmup", "50"],
    ];
    let mut identical = 0;
    for (i, args) in cases.iter().enumerate() {
        let a = run_cli(dir.path(), &format!("a{i}"), args);
        let b = run_cli(dir.path(), &format!("b{i}"), args);
        if a == b && !a.is_empty() {
            identical += 1;
        }
    }
    outcome(
        identical == cases.len(),
        format!("{identical}/{} configurations byte-identical across repeated runs", cases.len()),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 nmf marginals", nmf_marginals),
        ("2 kl optimality", kl_optimality),
        ("3 scalar examples", scalar_examples),
        ("4 scalar oracle", scalar_oracle),
        ("5 gradient checks", gradient_checks),
        ("6 convergence ordering", convergence_ordering),
        ("7 memory model", memory_model),
        ("8 determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failures = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let result = check();
        let tag = if result.passed { "PASS" } else { "FAIL" };
        println!("acceptance {name}: {tag} | {}", result.detail);
        if !result.passed {
            failures += 1;
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criterion(s) failed");
        ExitCode::FAILURE
    }
}
