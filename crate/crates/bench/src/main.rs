use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use came_bench::checks::{self, BUNDLED_MANIFEST};
use came_bench::config::{parse_seeds, RunConfig};
use came_bench::error::{BenchError, Result};
use came_bench::runner::{run, write_atomic, write_outputs};
use came_core::memory_model::StateKind;

const PRECEDENCE: &str = "Settings are resolved as: command-line flags, then the --config file, \
then built-in defaults. Config files hold one `key = value` per line (`#` starts a comment) \
using the flag names without the leading dashes, e.g. `lr = 0.001`.";

#[derive(Parser)]
#[command(name = "came-bench", version, about = "Seeded optimizer experiments, gradient checks and memory reports.", after_help = PRECEDENCE)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one problem with one optimizer and write trace/summary files.
    #[command(after_help = PRECEDENCE)]
    Run(RunArgs),
    /// Run several optimizers over several seeds and compare them.
    #[command(after_help = PRECEDENCE)]
    Compare(CompareArgs),
    /// Compare analytic gradients against central differences.
    GradCheck(GradCheckArgs),
    /// Optimizer-state element counts for a parameter shape manifest.
    Memory(MemoryArgs),
}

#[derive(Args, Default)]
struct ProblemArgs {
    /// quadratic | rosenbrock | logreg | mlp1
    #[arg(long)]
    problem: Option<String>,
    /// Quadratic dimension.
    #[arg(long)]
    dim: Option<String>,
    /// Quadratic condition number.
    #[arg(long)]
    condition: Option<String>,
    /// Logistic regression sample count.
    #[arg(long)]
    samples: Option<String>,
    /// Logistic regression feature count.
    #[arg(long)]
    features: Option<String>,
    #[arg(long)]
    in_dim: Option<String>,
    #[arg(long)]
    hidden_dim: Option<String>,
    #[arg(long)]
    out_dim: Option<String>,
}

impl ProblemArgs {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("problem", &self.problem),
            ("dim", &self.dim),
            ("condition", &self.condition),
            ("samples", &self.samples),
            ("features", &self.features),
            ("in-dim", &self.in_dim),
            ("hidden-dim", &self.hidden_dim),
            ("out-dim", &self.out_dim),
        ]
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Key-value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    beta1: Option<String>,
    #[arg(long)]
    beta2: Option<String>,
    #[arg(long)]
    beta3: Option<String>,
    #[arg(long)]
    eps1: Option<String>,
    #[arg(long)]
    eps2: Option<String>,
    #[arg(long)]
    eps3: Option<String>,
    /// RMS clipping threshold.
    #[arg(long)]
    clip_d: Option<String>,
    /// Linear warmup length in steps.
    #[arg(long)]
    warmup: Option<String>,
    #[arg(long)]
    adam_eps: Option<String>,
    /// Instability residual: updated | previous
    #[arg(long)]
    residual: Option<String>,
    /// Loss level for steps-to-threshold.
    #[arg(long)]
    threshold: Option<String>,
    /// Output path prefix.
    #[arg(long)]
    out: Option<String>,
    /// Drop wall-clock timing from the trace (written to a sidecar instead).
    #[arg(long)]
    strict_determinism: bool,
}

impl TrainArgs {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        let mut v = self.problem.pairs();
        v.extend([
            ("steps", &self.steps),
            ("lr", &self.lr),
            ("beta1", &self.beta1),
            ("beta2", &self.beta2),
            ("beta3", &self.beta3),
            ("eps1", &self.eps1),
            ("eps2", &self.eps2),
            ("eps3", &self.eps3),
            ("clip-d", &self.clip_d),
            ("warmup", &self.warmup),
            ("adam-eps", &self.adam_eps),
            ("residual", &self.residual),
            ("threshold", &self.threshold),
            ("out", &self.out),
        ]);
        v
    }

    /// Defaults, then the config file, then flags.
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for (key, value) in self.pairs() {
            if let Some(v) = value {
                cfg.apply(key, v)?;
            }
        }
        if self.strict_determinism {
            cfg.strict_determinism = true;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    train: TrainArgs,
    /// adafactor | came | adam | raw-confidence
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    seed: Option<String>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    train: TrainArgs,
    /// Comma-separated optimizer list, e.g. `came,adafactor,adam`.
    #[arg(long)]
    optimizer: Option<String>,
    /// Seeds, e.g. `0..10` or `1,2,5`.
    #[arg(long)]
    seeds: Option<String>,
}

#[derive(Args)]
struct GradCheckArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 10)]
    points: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Seed for the problem data and the probe points.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the report as JSON to this path.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct MemoryArgs {
    /// Manifest file (`name dims...` per line) or `bert-large`.
    #[arg(long, default_value = BUNDLED_MANIFEST)]
    manifest: String,
    /// adam | lamb | adafactor | sm3 | came
    #[arg(long, default_value = "adam")]
    baseline: String,
    /// Multiply every dimension by this factor.
    #[arg(long, default_value_t = 1)]
    scale: usize,
    /// Also write the report as JSON to this path.
    #[arg(long)]
    json: Option<PathBuf>,
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut cfg = args.train.resolve()?;
    if let Some(o) = &args.optimizer {
        cfg.apply("optimizer", o)?;
    }
    if let Some(s) = &args.seed {
        cfg.apply("seed", s)?;
    }
    let out = run(&cfg)?;
    if let Some(prefix) = &cfg.out {
        write_outputs(&out, prefix, cfg.strict_determinism)?;
    }
    emit(&format!(
        "{}\n",
        serde_json::to_string_pretty(&out.summary).expect("summary serializes")
    ));
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let base = args.train.resolve()?;
    let optimizers = args
        .optimizer
        .clone()
        .unwrap_or_else(|| base.optimizer.to_string());
    let mut configs = Vec::new();
    for name in optimizers.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let mut c = base.clone();
        c.apply("optimizer", name)?;
        configs.push(c);
    }
    let seeds = match &args.seeds {
        Some(s) => parse_seeds(s)?,
        None => vec![base.seed],
    };
    let cmp = came_bench::compare(&configs, &seeds)?;
    if let Some(prefix) = &base.out {
        let mut csv = prefix.as_os_str().to_os_string();
        csv.push(".compare.csv");
        write_atomic(&PathBuf::from(csv), cmp.to_csv().as_bytes())?;
        let mut json = prefix.as_os_str().to_os_string();
        json.push(".compare.json");
        checks::write_json(&PathBuf::from(json), &cmp)?;
    }
    emit(&cmp.to_string());
    Ok(())
}

fn cmd_grad_check(args: GradCheckArgs) -> Result<()> {
    let mut cfg = RunConfig::default();
    for (key, value) in args.problem.pairs() {
        if let Some(v) = value {
            cfg.apply(key, v)?;
        }
    }
    cfg.problem.validate()?;
    let problem = cfg.problem.build(args.seed);
    let result = checks::grad_check(problem.as_ref(), args.points, args.seed, args.tol);
    if let (Some(path), Ok(rep)) = (&args.json, &result) {
        checks::write_json(path, rep)?;
    }
    emit(&checks::render_grad_check(&result?));
    Ok(())
}

fn cmd_memory(args: MemoryArgs) -> Result<()> {
    let baseline: StateKind = args
        .baseline
        .parse()
        .map_err(|e: String| BenchError::invalid("baseline", e))?;
    let rep = checks::memory(&args.manifest, baseline, args.scale)?;
    if let Some(path) = &args.json {
        checks::write_json(path, &rep)?;
    }
    emit(&rep.to_string());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            let json = serde_json::json!({
                "error": { "kind": "usage", "message": msg.trim_end() }
            });
            eprintln!("{json}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::GradCheck(a) => cmd_grad_check(a),
        Command::Memory(a) => cmd_memory(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
