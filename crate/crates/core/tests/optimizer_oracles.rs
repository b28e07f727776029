use came_core::memory_model::{state_elements, StateKind};
use came_core::optimizers::{Algorithm, OptimizerConfig, OptimizerState};
use came_core::problems::{make_logreg, make_mlp1, make_quadratic, make_rosenbrock, Problem};
use came_core::{Layout, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Unfactored scalar Adafactor written without any library types.
struct ScalarAdafactor {
    v: f64,
    m: f64,
}

impl ScalarAdafactor {
    fn step(&mut self, theta: f64, g: f64, cfg: &OptimizerConfig) -> f64 {
        self.v = cfg.beta2 * self.v + (1.0 - cfg.beta2) * (g * g + cfg.eps1);
        let u = g / self.v.sqrt();
        let clipped = u / f64::max(1.0, u.abs() / cfg.clip_d);
        self.m = cfg.beta1 * self.m + (1.0 - cfg.beta1) * clipped;
        theta - cfg.lr * self.m
    }
}

#[test]
fn factored_scalar_tracks_unfactored_reference() {
    let cfg = OptimizerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut state = OptimizerState::with_layout(Algorithm::Adafactor, 1, 1, Layout::Factored, &cfg);
    let mut reference = ScalarAdafactor { v: 0.0, m: 0.0 };
    let mut theta = Matrix::scalar(0.7);
    let mut theta_ref = 0.7;
    for _ in 0..100 {
        let x = theta_ref;
        let g = x * x * x - 1.0 + rng.random_range(-0.5..0.5);
        theta = state.step(&theta, &Matrix::scalar(g), &cfg).unwrap();
        theta_ref = reference.step(theta_ref, g, &cfg);
        assert!((theta.get(0, 0) - theta_ref).abs() <= 1e-12);
    }
}

#[test]
fn live_state_matches_memory_model() {
    let cfg = OptimizerConfig::default();
    let shapes = [(1, 1), (1, 7), (7, 1), (2, 2), (3, 5), (16, 32), (64, 3)];
    let kinds = [
        (Algorithm::Adam, StateKind::Adam),
        (Algorithm::Adafactor, StateKind::Adafactor),
        (Algorithm::RawConfidence, StateKind::Adafactor),
        (Algorithm::Came, StateKind::Came),
    ];
    for (rows, cols) in shapes {
        for (alg, kind) in kinds {
            let live = OptimizerState::new(alg, rows, cols, &cfg).state_elements() as u64;
            let model = state_elements(kind, &[rows, cols]).unwrap();
            assert_eq!(live, model, "{alg} on {rows}x{cols}");
        }
    }
}

fn problems() -> Vec<Box<dyn Problem>> {
    vec![
        Box::new(make_quadratic(8, 10.0, 3)),
        Box::new(make_rosenbrock()),
        Box::new(make_logreg(128, 6, 3)),
        Box::new(make_mlp1(16, 32, 1, 3)),
    ]
}

#[test]
fn live_state_matches_memory_model_per_problem() {
    let cfg = OptimizerConfig::default();
    for p in problems() {
        let manifest = p.manifest();
        let live: usize = manifest
            .iter()
            .map(|s| OptimizerState::new(Algorithm::Came, s.rows, s.cols, &cfg).state_elements())
            .sum();
        let model: u64 = manifest
            .iter()
            .map(|s| state_elements(StateKind::Came, &s.dims()).unwrap())
            .sum();
        assert_eq!(live as u64, model, "{}", p.name());
    }
}

fn train(problem: &dyn Problem, alg: Algorithm, steps: usize, cfg: &OptimizerConfig) -> (f64, f64) {
    let mut params = problem.init_params(0);
    let mut states: Vec<OptimizerState> = params
        .iter()
        .map(|p| OptimizerState::new(alg, p.rows(), p.cols(), cfg))
        .collect();
    let initial = problem.loss(&params);
    for _ in 0..steps {
        let grads = problem.grad(&params);
        params = params
            .iter()
            .zip(&grads)
            .zip(states.iter_mut())
            .map(|((p, g), s)| s.step(p, g, cfg).unwrap())
            .collect();
    }
    (initial, problem.loss(&params))
}

#[test]
fn every_optimizer_reduces_mlp_loss() {
    let cfg = OptimizerConfig::default();
    for seed in 0..3 {
        let problem = make_mlp1(16, 32, 1, seed);
        for alg in Algorithm::ALL {
            let (initial, last) = train(&problem, alg, 200, &cfg);
            assert!(last < initial, "{alg} seed {seed}: {initial} -> {last}");
        }
    }
}

#[test]
fn adam_solves_quadratic() {
    let cfg = OptimizerConfig {
        lr: 1e-2,
        ..OptimizerConfig::default()
    };
    let (_, last) = train(&make_quadratic(8, 10.0, 0), Algorithm::Adam, 500, &cfg);
    assert!(last < 1e-6, "{last}");
}
