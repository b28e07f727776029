//! Desk-scale objectives with hand-derived gradients.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64(seed)`. Independent draws for the same seed use separate
//! ChaCha streams: stream 0 generates problem data, stream 1 the initial
//! parameters, and stream 2 the gradient-check probe points. Uniform draws use
//! `rand`'s `random_range` and Gaussian draws `rand_distr::StandardNormal`, so
//! every value is a pure function of the seed on any platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

const DATA_STREAM: u64 = 0;
const INIT_STREAM: u64 = 1;
const PROBE_STREAM: u64 = 2;

/// Half-width of the default uniform initialization.
pub const INIT_SCALE: f64 = 0.1;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("positive dims")
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, half_width: f64) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-half_width..=half_width))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("positive dims")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Self {
            name: name.into(),
            rows,
            cols,
        }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Logical dimensions: one entry for vectors and scalars, two otherwise.
    pub fn dims(&self) -> Vec<usize> {
        if self.rows == 1 || self.cols == 1 {
            vec![self.len()]
        } else {
            vec![self.rows, self.cols]
        }
    }
}

/// A differentiable objective over a fixed list of matrix parameters.
pub trait Problem: Send + Sync {
    fn name(&self) -> &str;

    fn manifest(&self) -> Vec<ParamSpec>;

    fn loss(&self, params: &[Matrix]) -> f64;

    /// Analytic gradient, one matrix per manifest entry.
    fn grad(&self, params: &[Matrix]) -> Vec<Matrix>;

    fn loss_and_grad(&self, params: &[Matrix]) -> (f64, Vec<Matrix>) {
        (self.loss(params), self.grad(params))
    }

    /// Central-difference gradient used by [`gradient_check`]. Overrides
    /// must evaluate the same differences as [`finite_diff_grad`].
    fn numeric_grad(&self, params: &[Matrix], h: Option<f64>) -> Vec<Matrix> {
        finite_diff_grad(self, params, h)
    }

    /// Minimum loss value, when known in closed form.
    fn known_optimum(&self) -> Option<f64> {
        None
    }

    /// Seeded starting point; uniform in `[-0.1, 0.1]` unless overridden.
    fn init_params(&self, seed: u64) -> Vec<Matrix> {
        let mut rng = stream_rng(seed, INIT_STREAM);
        self.manifest()
            .iter()
            .map(|p| uniform_matrix(&mut rng, p.rows, p.cols, INIT_SCALE))
            .collect()
    }
}

/// Checks that `params` matches the problem's manifest.
pub fn check_params(problem: &dyn Problem, params: &[Matrix]) -> Result<()> {
    let manifest = problem.manifest();
    if manifest.len() != params.len() {
        return Err(Error::ParamCount {
            expected: manifest.len(),
            actual: params.len(),
        });
    }
    for (spec, p) in manifest.iter().zip(params) {
        if p.shape() != (spec.rows, spec.cols) {
            return Err(Error::ShapeMismatch {
                op: "problem parameters",
                expected: (spec.rows, spec.cols),
                actual: p.shape(),
            });
        }
    }
    Ok(())
}

/// `f(theta) = 0.5 theta^T A theta` with diagonal `A`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    eigenvalues: Vec<f64>,
}

/// Diagonal quadratic whose eigenvalues are log-spaced over
/// `[1, condition_number]`; the seed shuffles their assignment to coordinates.
pub fn make_quadratic(dim: usize, condition_number: f64, seed: u64) -> Quadratic {
    assert!(dim >= 1, "make_quadratic: dim must be at least 1");
    assert!(condition_number >= 1.0, "make_quadratic: condition number below 1");
    let mut eigenvalues: Vec<f64> = (0..dim)
        .map(|i| {
            if dim == 1 {
                1.0
            } else {
                condition_number.powf(i as f64 / (dim - 1) as f64)
            }
        })
        .collect();
    let mut rng = stream_rng(seed, DATA_STREAM);
    for i in (1..dim).rev() {
        let j = rng.random_range(0..=i);
        eigenvalues.swap(i, j);
    }
    Quadratic { eigenvalues }
}

impl Quadratic {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
}

impl Problem for Quadratic {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn manifest(&self) -> Vec<ParamSpec> {
        vec![ParamSpec::new("theta", self.eigenvalues.len(), 1)]
    }

    fn loss(&self, params: &[Matrix]) -> f64 {
        0.5 * params[0]
            .as_slice()
            .iter()
            .zip(&self.eigenvalues)
            .map(|(x, l)| l * x * x)
            .sum::<f64>()
    }

    fn grad(&self, params: &[Matrix]) -> Vec<Matrix> {
        let g: Vec<f64> = params[0]
            .as_slice()
            .iter()
            .zip(&self.eigenvalues)
            .map(|(x, l)| l * x)
            .collect();
        vec![Matrix::column(&g)]
    }

    fn known_optimum(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// `f(x, y) = (1 - x)^2 + 100 (y - x^2)^2`, one `2 x 1` parameter.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rosenbrock;

pub fn make_rosenbrock() -> Rosenbrock {
    Rosenbrock
}

impl Problem for Rosenbrock {
    fn name(&self) -> &str {
        "rosenbrock"
    }

    fn manifest(&self) -> Vec<ParamSpec> {
        vec![ParamSpec::new("xy", 2, 1)]
    }

    fn loss(&self, params: &[Matrix]) -> f64 {
        let (x, y) = (params[0].get(0, 0), params[0].get(1, 0));
        (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2)
    }

    fn grad(&self, params: &[Matrix]) -> Vec<Matrix> {
        let (x, y) = (params[0].get(0, 0), params[0].get(1, 0));
        let r = y - x * x;
        vec![Matrix::column(&[
            -2.0 * (1.0 - x) - 400.0 * x * r,
            200.0 * r,
        ])]
    }

    fn known_optimum(&self) -> Option<f64> {
        Some(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub inputs: Matrix,
    pub targets: Matrix,
    pub seed: u64,
}

/// Binary logistic regression, parameters `weight (d x 1)` and `bias (1 x 1)`.
#[derive(Debug, Clone)]
pub struct LogisticRegression {
    data: SyntheticDataset,
}

/// Labels come from a random separating hyperplane with Gaussian label noise.
pub fn make_logreg(n_samples: usize, n_features: usize, seed: u64) -> LogisticRegression {
    assert!(n_samples >= 1 && n_features >= 1, "make_logreg: empty dataset");
    let mut rng = stream_rng(seed, DATA_STREAM);
    let inputs = normal_matrix(&mut rng, n_samples, n_features, 1.0);
    let truth = normal_matrix(&mut rng, n_features, 1, 1.0);
    let margins = inputs.matmul(&truth).expect("shapes agree");
    let labels: Vec<f64> = margins
        .as_slice()
        .iter()
        .map(|&z| {
            let noise: f64 = rng.sample(StandardNormal);
            if z + 0.5 * noise > 0.0 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    LogisticRegression {
        data: SyntheticDataset {
            inputs,
            targets: Matrix::column(&labels),
            seed,
        },
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl LogisticRegression {
    pub fn from_dataset(data: SyntheticDataset) -> Self {
        assert_eq!(data.inputs.rows(), data.targets.rows());
        assert_eq!(data.targets.cols(), 1);
        Self { data }
    }

    pub fn dataset(&self) -> &SyntheticDataset {
        &self.data
    }

    fn logits(&self, params: &[Matrix]) -> Matrix {
        let b = params[1].get(0, 0);
        self.data
            .inputs
            .matmul(&params[0])
            .expect("weight shape")
            .add_scalar(b)
    }
}

impl Problem for LogisticRegression {
    fn name(&self) -> &str {
        "logreg"
    }

    fn manifest(&self) -> Vec<ParamSpec> {
        vec![
            ParamSpec::new("weight", self.data.inputs.cols(), 1),
            ParamSpec::new("bias", 1, 1),
        ]
    }

    fn loss(&self, params: &[Matrix]) -> f64 {
        let z = self.logits(params);
        let n = z.len() as f64;
        z.as_slice()
            .iter()
            .zip(self.data.targets.as_slice())
            .map(|(&z, &y)| (1.0 - y) * softplus(z) + y * softplus(-z))
            .sum::<f64>()
            / n
    }

    fn grad(&self, params: &[Matrix]) -> Vec<Matrix> {
        let z = self.logits(params);
        let n = z.len() as f64;
        let residual = z
            .zip_map(&self.data.targets, "logreg", |z, y| (sigmoid(z) - y) / n)
            .expect("target shape");
        let gw = self
            .data
            .inputs
            .transpose()
            .matmul(&residual)
            .expect("shapes agree");
        vec![gw, Matrix::scalar(residual.sum())]
    }
}

/// One-hidden-layer tanh network with squared-error loss
/// `1/(2N) sum (f(x) - y)^2`.
#[derive(Debug, Clone)]
pub struct Mlp1 {
    in_dim: usize,
    hidden_dim: usize,
    out_dim: usize,
    data: SyntheticDataset,
}

pub const MLP1_IN_DIM: usize = 16;
pub const MLP1_HIDDEN_DIM: usize = 32;
pub const MLP1_OUT_DIM: usize = 1;
pub const MLP1_SAMPLES: usize = 512;

/// Regression onto a random teacher network of the same architecture plus
/// small Gaussian noise, with [`MLP1_SAMPLES`] samples.
pub fn make_mlp1(in_dim: usize, hidden_dim: usize, out_dim: usize, seed: u64) -> Mlp1 {
    make_mlp1_with_samples(in_dim, hidden_dim, out_dim, MLP1_SAMPLES, seed)
}

pub fn make_mlp1_with_samples(
    in_dim: usize,
    hidden_dim: usize,
    out_dim: usize,
    n_samples: usize,
    seed: u64,
) -> Mlp1 {
    assert!(
        in_dim >= 1 && hidden_dim >= 1 && out_dim >= 1 && n_samples >= 1,
        "make_mlp1: dimensions must be positive"
    );
    let mut rng = stream_rng(seed, DATA_STREAM);
    let inputs = normal_matrix(&mut rng, n_samples, in_dim, 1.0);
    let w1 = normal_matrix(&mut rng, in_dim, hidden_dim, 1.0 / (in_dim as f64).sqrt());
    let w2 = normal_matrix(&mut rng, hidden_dim, out_dim, 1.0 / (hidden_dim as f64).sqrt());
    let noise = normal_matrix(&mut rng, n_samples, out_dim, 0.05);
    let targets = inputs
        .matmul(&w1)
        .and_then(|h| h.map(f64::tanh).matmul(&w2))
        .and_then(|y| y.add(&noise))
        .expect("shapes agree");
    Mlp1 {
        in_dim,
        hidden_dim,
        out_dim,
        data: SyntheticDataset {
            inputs,
            targets,
            seed,
        },
    }
}

/// `Mlp1` with the canonical widths 16-32-1.
pub fn make_mlp1_canonical(seed: u64) -> Mlp1 {
    make_mlp1(MLP1_IN_DIM, MLP1_HIDDEN_DIM, MLP1_OUT_DIM, seed)
}

/// `tanh` via a single `exp`; absolute error stays within a few ulps of 1.
fn tanh(x: f64) -> f64 {
    1.0 - 2.0 / ((2.0 * x).exp() + 1.0)
}

struct MlpForward {
    hidden: Matrix,
    output: Matrix,
}

impl Mlp1 {
    pub fn from_dataset(hidden_dim: usize, data: SyntheticDataset) -> Self {
        assert_eq!(data.inputs.rows(), data.targets.rows());
        Self {
            in_dim: data.inputs.cols(),
            hidden_dim,
            out_dim: data.targets.cols(),
            data,
        }
    }

    pub fn dataset(&self) -> &SyntheticDataset {
        &self.data
    }

    fn forward(&self, params: &[Matrix]) -> MlpForward {
        let (w1, b1, w2, b2) = (&params[0], &params[1], &params[2], &params[3]);
        let mut hidden = self.data.inputs.matmul(w1).expect("W1 shape");
        for row in hidden.as_mut_slice().chunks_exact_mut(self.hidden_dim) {
            for (h, b) in row.iter_mut().zip(b1.as_slice()) {
                *h = tanh(*h + b);
            }
        }
        let mut output = hidden.matmul(w2).expect("W2 shape");
        for row in output.as_mut_slice().chunks_exact_mut(self.out_dim) {
            for (o, b) in row.iter_mut().zip(b2.as_slice()) {
                *o += b;
            }
        }
        MlpForward { hidden, output }
    }
}

/// Cached forward quantities for central differences on [`Mlp1`].
struct MlpCache<'a> {
    pre: Vec<f64>,
    act: Vec<f64>,
    resid: Vec<f64>,
    w2: &'a [f64],
    hid: usize,
    out: usize,
    scale: f64,
}

impl MlpCache<'_> {
    /// Loss after adding `d * coeff(s)` to the pre-activation of hidden unit `j`.
    fn hidden_shift(&self, j: usize, d: f64, coeff: impl Fn(usize) -> f64) -> f64 {
        let w_row = &self.w2[j * self.out..(j + 1) * self.out];
        let mut total = 0.0;
        for (s, r_row) in self.resid.chunks_exact(self.out).enumerate() {
            let idx = s * self.hid + j;
            let change = tanh(self.pre[idx] + d * coeff(s)) - self.act[idx];
            total += r_row
                .iter()
                .zip(w_row)
                .map(|(r, w)| {
                    let e = r + change * w;
                    e * e
                })
                .sum::<f64>();
        }
        total * self.scale
    }

    /// Loss after adding `d * coeff(s)` to output `o`.
    fn output_shift(&self, o: usize, d: f64, coeff: impl Fn(usize) -> f64) -> f64 {
        let mut total = 0.0;
        for (s, r_row) in self.resid.chunks_exact(self.out).enumerate() {
            for (q, &r) in r_row.iter().enumerate() {
                let e = if q == o { r + d * coeff(s) } else { r };
                total += e * e;
            }
        }
        total * self.scale
    }
}

impl Problem for Mlp1 {
    fn name(&self) -> &str {
        "mlp1"
    }

    fn manifest(&self) -> Vec<ParamSpec> {
        vec![
            ParamSpec::new("W1", self.in_dim, self.hidden_dim),
            ParamSpec::new("b1", 1, self.hidden_dim),
            ParamSpec::new("W2", self.hidden_dim, self.out_dim),
            ParamSpec::new("b2", 1, self.out_dim),
        ]
    }

    /// Row-at-a-time forward pass without materializing the hidden layer.
    fn loss(&self, params: &[Matrix]) -> f64 {
        let (w1, b1, w2, b2) = (
            params[0].as_slice(),
            params[1].as_slice(),
            params[2].as_slice(),
            params[3].as_slice(),
        );
        let (hid, out) = (self.hidden_dim, self.out_dim);
        let mut h = vec![0.0; hid];
        let mut o = vec![0.0; out];
        let mut total = 0.0;
        let rows = self
            .data
            .inputs
            .as_slice()
            .chunks_exact(self.in_dim)
            .zip(self.data.targets.as_slice().chunks_exact(out));
        for (x, y) in rows {
            h.copy_from_slice(b1);
            for (&a, w_row) in x.iter().zip(w1.chunks_exact(hid)) {
                for (hj, &w) in h.iter_mut().zip(w_row) {
                    *hj += a * w;
                }
            }
            o.copy_from_slice(b2);
            for (&hj, w_row) in h.iter().zip(w2.chunks_exact(out)) {
                let t = tanh(hj);
                for (oj, &w) in o.iter_mut().zip(w_row) {
                    *oj += t * w;
                }
            }
            total += o.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>();
        }
        total / (2.0 * self.data.inputs.rows() as f64)
    }

    fn grad(&self, params: &[Matrix]) -> Vec<Matrix> {
        self.loss_and_grad(params).1
    }

    /// Same central differences as [`finite_diff_grad`], evaluated by
    /// recomputing only the hidden unit or output a coordinate feeds.
    fn numeric_grad(&self, params: &[Matrix], h: Option<f64>) -> Vec<Matrix> {
        let h = h.unwrap_or(FD_STEP);
        let (din, hid, out) = (self.in_dim, self.hidden_dim, self.out_dim);
        let x = self.data.inputs.as_slice();
        let mut pre = self.data.inputs.matmul(&params[0]).expect("W1 shape").into_vec();
        for row in pre.chunks_exact_mut(hid) {
            for (p, b) in row.iter_mut().zip(params[1].as_slice()) {
                *p += b;
            }
        }
        let act: Vec<f64> = pre.iter().map(|&p| tanh(p)).collect();
        let act_m = Matrix::from_vec(self.data.inputs.rows(), hid, act.clone()).expect("shape");
        let mut resid = act_m.matmul(&params[2]).expect("W2 shape").into_vec();
        for (row, y) in resid
            .chunks_exact_mut(out)
            .zip(self.data.targets.as_slice().chunks_exact(out))
        {
            for ((r, b), t) in row.iter_mut().zip(params[3].as_slice()).zip(y) {
                *r += b - t;
            }
        }
        let cache = MlpCache {
            pre,
            act,
            resid,
            w2: params[2].as_slice(),
            hid,
            out,
            scale: 1.0 / (2.0 * self.data.inputs.rows() as f64),
        };
        let central = |theta: f64, eval: &dyn Fn(f64) -> f64| {
            let step = h * theta.abs().max(1.0);
            (eval(step) - eval(-step)) / (2.0 * step)
        };

        let mut g_w1 = Matrix::zeros(din, hid);
        for k in 0..din {
            for j in 0..hid {
                let v = central(params[0].get(k, j), &|d| {
                    cache.hidden_shift(j, d, |s| x[s * din + k])
                });
                g_w1.set(k, j, v);
            }
        }
        let mut g_b1 = Matrix::zeros(1, hid);
        for j in 0..hid {
            g_b1.set(0, j, central(params[1].get(0, j), &|d| cache.hidden_shift(j, d, |_| 1.0)));
        }
        let mut g_w2 = Matrix::zeros(hid, out);
        for j in 0..hid {
            for o in 0..out {
                let v = central(params[2].get(j, o), &|d| {
                    cache.output_shift(o, d, |s| cache.act[s * hid + j])
                });
                g_w2.set(j, o, v);
            }
        }
        let mut g_b2 = Matrix::zeros(1, out);
        for o in 0..out {
            g_b2.set(0, o, central(params[3].get(0, o), &|d| cache.output_shift(o, d, |_| 1.0)));
        }
        vec![g_w1, g_b1, g_w2, g_b2]
    }

    fn loss_and_grad(&self, params: &[Matrix]) -> (f64, Vec<Matrix>) {
        let fwd = self.forward(params);
        let n = self.data.inputs.rows() as f64;
        let diff = fwd.output.sub(&self.data.targets).expect("target shape");
        let loss = diff.as_slice().iter().map(|d| d * d).sum::<f64>() / (2.0 * n);

        let d_out = diff.scale(1.0 / n);
        let g_w2 = fwd.hidden.transpose().matmul(&d_out).expect("shapes agree");
        let g_b2 = d_out.col_sums();
        let d_hidden = d_out
            .matmul(&params[2].transpose())
            .and_then(|dh| dh.zip_map(&fwd.hidden, "tanh'", |d, h| d * (1.0 - h * h)))
            .expect("shapes agree");
        let g_w1 = self
            .data
            .inputs
            .transpose()
            .matmul(&d_hidden)
            .expect("shapes agree");
        let g_b1 = d_hidden.col_sums();
        (loss, vec![g_w1, g_b1, g_w2, g_b2])
    }
}

const FD_STEP: f64 = 1e-6;

/// Central-difference gradient. Coordinate `i` is perturbed by
/// `h * max(1, |theta_i|)`; `h` defaults to `1e-6`.
pub fn finite_diff_grad<P: Problem + ?Sized>(
    problem: &P,
    params: &[Matrix],
    h: Option<f64>,
) -> Vec<Matrix> {
    let h = h.unwrap_or(FD_STEP);
    let mut work: Vec<Matrix> = params.to_vec();
    let mut grads = Vec::with_capacity(params.len());
    for k in 0..params.len() {
        let mut g = Matrix::zeros(params[k].rows(), params[k].cols());
        for i in 0..params[k].len() {
            let x = params[k].as_slice()[i];
            let step = h * x.abs().max(1.0);
            work[k].as_mut_slice()[i] = x + step;
            let plus = problem.loss(&work);
            work[k].as_mut_slice()[i] = x - step;
            let minus = problem.loss(&work);
            work[k].as_mut_slice()[i] = x;
            g.as_mut_slice()[i] = (plus - minus) / (2.0 * step);
        }
        grads.push(g);
    }
    grads
}

/// `max|a - b| / max(max|a|, max|b|)`, zero when both are zero.
pub fn relative_error(a: &Matrix, b: &Matrix) -> f64 {
    let diff = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
    let scale = a.max_abs().max(b.max_abs());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGradError {
    pub name: String,
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub problem: String,
    pub points: usize,
    pub tolerance: f64,
    pub params: Vec<ParamGradError>,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.max_relative_error)
            .fold(0.0, f64::max)
    }

    pub fn failing(&self) -> impl Iterator<Item = &ParamGradError> {
        self.params
            .iter()
            .filter(move |p| p.max_relative_error.is_nan() || p.max_relative_error >= self.tolerance)
    }
}

/// Seeded probe points, uniform in `[-1, 1]` per entry.
pub fn probe_points(problem: &dyn Problem, points: usize, seed: u64) -> Vec<Vec<Matrix>> {
    let mut rng = stream_rng(seed, PROBE_STREAM);
    let manifest = problem.manifest();
    (0..points)
        .map(|_| {
            manifest
                .iter()
                .map(|p| uniform_matrix(&mut rng, p.rows, p.cols, 1.0))
                .collect()
        })
        .collect()
}

/// Compares analytic gradients against [`Problem::numeric_grad`] at `points`
/// probe points and records the worst relative error per parameter.
///
/// A parameter's error at a point is its largest absolute difference divided
/// by the largest gradient entry over all parameters at that point.
pub fn gradient_check(
    problem: &dyn Problem,
    points: usize,
    seed: u64,
    tolerance: f64,
) -> GradCheckReport {
    let manifest = problem.manifest();
    let mut worst = vec![0.0f64; manifest.len()];
    for point in probe_points(problem, points, seed) {
        let analytic = problem.grad(&point);
        let numeric = problem.numeric_grad(&point, None);
        let scale = analytic
            .iter()
            .chain(&numeric)
            .map(Matrix::max_abs)
            .fold(0.0, f64::max);
        for (k, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
            let err = if a.shape() != n.shape() {
                f64::INFINITY
            } else {
                let diff = a.sub(n).map(|d| d.max_abs()).unwrap_or(f64::INFINITY);
                if scale > 0.0 {
                    diff / scale
                } else {
                    diff
                }
            };
            worst[k] = if err.is_nan() { f64::INFINITY } else { worst[k].max(err) };
        }
    }
    let params: Vec<ParamGradError> = manifest
        .into_iter()
        .zip(worst)
        .map(|(spec, err)| ParamGradError {
            name: spec.name,
            max_relative_error: err,
        })
        .collect();
    let passed = params.iter().all(|p| p.max_relative_error < tolerance);
    GradCheckReport {
        problem: problem.name().to_string(),
        points,
        tolerance,
        params,
        passed,
    }
}
