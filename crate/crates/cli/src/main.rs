use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use langlab::experiments::{
    self, build_training_set, run_sweep, run_trial_on, trial_csv, write_atomic,
};
use langlab::tracing::{
    detect_counters, phase_correlations, predictions_csv, probe_failure_mode, trace_csv,
    trace_sequence, PhaseSegmentation,
};
use langlab::{
    evaluation, DistributionSpec, EvalConfig, ExperimentConfig, Language, LengthWindow,
    LstmParameters, OptimizerKind,
};

#[derive(Parser)]
#[command(
    name = "langlab",
    version,
    about = "LSTM counting experiments on aⁿbⁿ-style languages"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print language members with their target sets.
    Gen(GenArgs),
    /// Train one trial; write its per-epoch CSV and final checkpoint.
    Train(TrainArgs),
    /// Run a grid of experiments (config file or preset).
    Sweep(SweepArgs),
    /// Compute the first-k-error profile of a checkpoint.
    Evaluate(EvaluateArgs),
    /// Compare BPTT gradients with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Record hidden and cell states on a probe sequence.
    Trace(TraceArgs),
}

/// Flags that override fields of an `ExperimentConfig`.
#[derive(Args, Default)]
struct ConfigArgs {
    /// JSON experiment config; explicit flags take precedence.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long)]
    language: Option<Language>,
    /// uniform, u-shaped, right-tailed, left-tailed or beta-binomial:A,B
    #[arg(long = "dist", value_name = "DIST")]
    distribution: Option<DistributionSpec>,
    #[arg(long, value_name = "LO:HI")]
    window: Option<LengthWindow>,
    #[arg(long, value_name = "H")]
    hidden: Option<usize>,
    /// Training samples per epoch.
    #[arg(long, value_name = "N")]
    samples: Option<usize>,
    #[arg(long, value_name = "E")]
    epochs: Option<usize>,
    #[arg(long, value_name = "T")]
    trials: Option<usize>,
    #[arg(long, value_name = "K")]
    k: Option<usize>,
    #[arg(long = "max-n", value_name = "M")]
    max_n: Option<usize>,
    /// Base of the per-trial initialization seeds.
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    #[arg(long = "data-seed", value_name = "D")]
    data_seed: Option<u64>,
    #[arg(long)]
    optimizer: Option<OptimizerKind>,
    #[arg(long = "lr", value_name = "X")]
    learning_rate: Option<f64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        self.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(v) = self.language {
            cfg.language = v;
        }
        if let Some(v) = self.distribution {
            cfg.distribution = v;
        }
        if let Some(v) = self.window {
            cfg.window = v;
        }
        if let Some(v) = self.hidden {
            cfg.hidden_units = v;
        }
        if let Some(v) = self.samples {
            cfg.training_set_size = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.k {
            cfg.k = v;
        }
        if let Some(v) = self.max_n {
            cfg.max_n = v;
        }
        if let Some(v) = self.seed {
            cfg.trial_seed_base = v;
        }
        if let Some(v) = self.data_seed {
            cfg.data_seed = v;
        }
        if let Some(v) = self.optimizer {
            cfg.optimizer = v;
            if self.learning_rate.is_none() {
                cfg.learning_rate = v.default_learning_rate();
            }
        }
        if let Some(v) = self.learning_rate {
            cfg.learning_rate = v;
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Print only the member with this n instead of a sampled training set.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Trial index; the trial is initialized from seed + trial.
    #[arg(long, default_value_t = 0)]
    trial: usize,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Distributions,
    Windows,
    Capacity,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON file with one config or an array of configs. Explicit flags
    /// override the matching field in every cell.
    #[arg(long, value_name = "FILE", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in grid for --language.
    #[arg(long, required_unless_present = "config")]
    preset: Option<Preset>,
    #[command(flatten)]
    overrides: SweepOverrides,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

/// The subset of config flags that make sense across a whole grid.
#[derive(Args)]
struct SweepOverrides {
    #[arg(long)]
    language: Option<Language>,
    #[arg(long, value_name = "N")]
    samples: Option<usize>,
    #[arg(long, value_name = "E")]
    epochs: Option<usize>,
    #[arg(long, value_name = "T")]
    trials: Option<usize>,
    #[arg(long, value_name = "K")]
    k: Option<usize>,
    #[arg(long = "max-n", value_name = "M")]
    max_n: Option<usize>,
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    #[arg(long = "data-seed", value_name = "D")]
    data_seed: Option<u64>,
    #[arg(long)]
    optimizer: Option<OptimizerKind>,
    #[arg(long = "lr", value_name = "X")]
    learning_rate: Option<f64>,
}

impl SweepOverrides {
    fn as_config_args(&self) -> ConfigArgs {
        ConfigArgs {
            language: self.language,
            samples: self.samples,
            epochs: self.epochs,
            trials: self.trials,
            k: self.k,
            max_n: self.max_n,
            seed: self.seed,
            data_seed: self.data_seed,
            optimizer: self.optimizer,
            learning_rate: self.learning_rate,
            ..ConfigArgs::default()
        }
    }
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long, value_name = "FILE")]
    checkpoint: PathBuf,
    /// Defaults to the language matching the checkpoint's input size.
    #[arg(long)]
    language: Option<Language>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long = "max-n", default_value_t = 1000)]
    max_n: usize,
    /// Also print the decoded outputs on this member, run-length encoded.
    #[arg(long, value_name = "N")]
    probe: Option<usize>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value = "anbn")]
    language: Language,
    #[arg(long, default_value_t = 2)]
    hidden: usize,
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    /// Fail if the max relative error exceeds this.
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long, value_name = "FILE")]
    checkpoint: PathBuf,
    #[arg(long)]
    language: Option<Language>,
    #[arg(long, default_value_t = 50)]
    n: usize,
    /// Minimum |Spearman ρ| per phase for a unit to count as a counter.
    #[arg(long = "rho-min", default_value_t = 0.9)]
    rho_min: f64,
    /// Directory for trace.csv and predictions.csv.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            ExitCode::FAILURE
        }
    }
}

/// The error chain joined with `: `, skipping causes whose text the outer
/// messages already include.
fn one_line(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if msg.contains(&text) {
            continue;
        }
        if !msg.is_empty() {
            msg.push_str(": ");
        }
        msg.push_str(&text);
    }
    msg
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(args) => gen(args),
        Command::Train(args) => train(args),
        Command::Sweep(args) => sweep(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Gradcheck(args) => gradcheck(args),
        Command::Trace(args) => trace(args),
    }
}

fn print_resolved<T: serde::Serialize + ?Sized>(what: &str, value: &T) -> Result<()> {
    eprintln!("{what}: {}", serde_json::to_string(value)?);
    Ok(())
}

fn gen(args: GenArgs) -> Result<()> {
    let cfg = args.cfg.resolve()?;
    if let Some(n) = args.n {
        eprintln!("gen: language={} n={n}", cfg.language);
        println!("{}", cfg.language.generate_sample(n)?.dump_line());
        return Ok(());
    }
    print_resolved("config", &cfg)?;
    for sample in build_training_set(&cfg) {
        println!("{}", sample.dump_line());
    }
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let cfg = args.cfg.resolve()?;
    if args.trial >= cfg.trials {
        bail!(
            "--trial {} is out of range for {} trials",
            args.trial,
            cfg.trials
        );
    }
    print_resolved("config", &cfg)?;
    let out = &args.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_atomic(
        &out.join("config.json"),
        serde_json::to_string_pretty(&cfg)?.as_bytes(),
    )?;

    let set = build_training_set(&cfg);
    let outcome = run_trial_on(&cfg, args.trial, &set, |r| {
        eprintln!(
            "epoch {:>4}  loss {:.6}  {}",
            r.epoch, r.training_loss, r.error_profile
        );
    })?;
    let t = args.trial;
    write_atomic(
        &out.join(format!("trial_{t}.csv")),
        &trial_csv(&outcome.records, cfg.k)?,
    )?;
    let ckpt = out.join(format!("trial_{t}.ckpt"));
    outcome.parameters.save(&ckpt)?;
    match outcome.records.last() {
        Some(r) => println!("{}", r.error_profile),
        None => println!("no epochs run"),
    }
    eprintln!("wrote {}", ckpt.display());
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let overrides = args.overrides.as_config_args();
    let mut grid = match (&args.config, args.preset) {
        (Some(path), _) => read_grid(path)?,
        (None, Some(preset)) => {
            let base = ExperimentConfig::default();
            let language = args.overrides.language.unwrap_or(base.language);
            match preset {
                Preset::Distributions => experiments::distribution_sweep(language, &base),
                Preset::Windows => experiments::window_sweep(language, &base),
                Preset::Capacity => experiments::capacity_sweep(language, &base),
            }
        }
        (None, None) => unreachable!("clap requires --config or --preset"),
    };
    for cfg in &mut grid {
        overrides.apply(cfg);
        cfg.validate()
            .with_context(|| format!("cell {}", cfg.label()))?;
    }
    print_resolved("grid", &grid)?;
    let summary = run_sweep(&grid, &args.out)?;
    for cell in &summary.cells {
        println!(
            "{}: {} trials completed, {} failed",
            cell.label,
            cell.completed_trials,
            cell.failures.len()
        );
    }
    if summary.failed_trials() > 0 {
        bail!(
            "{} trial(s) failed; see errors.txt in the cell directories",
            summary.failed_trials()
        );
    }
    Ok(())
}

fn read_grid(path: &Path) -> Result<Vec<ExperimentConfig>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))?;
    let cells = match value {
        serde_json::Value::Array(items) => items,
        single => vec![single],
    };
    cells
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            serde_json::from_value(v)
                .with_context(|| format!("config {} entry {i}", path.display()))
        })
        .collect()
}

fn load_model(path: &Path, language: Option<Language>) -> Result<(LstmParameters, Language)> {
    let params = LstmParameters::load(path)?;
    let d = params.input_dim();
    let language = match language {
        Some(lang) if lang.input_dim() != d => bail!(
            "checkpoint {} has input size {d}, but {lang} needs {}",
            path.display(),
            lang.input_dim()
        ),
        Some(lang) => lang,
        None => Language::from_input_dim(d).with_context(|| {
            format!(
                "checkpoint {} has input size {d}, matching no language",
                path.display()
            )
        })?,
    };
    Ok((params, language))
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let (params, language) = load_model(&args.checkpoint, args.language)?;
    let eval = EvalConfig {
        k: args.k,
        max_n: args.max_n,
    };
    if eval.k == 0 || eval.max_n == 0 {
        bail!("--k and --max-n must be at least 1");
    }
    eprintln!(
        "evaluate: checkpoint={} language={language} hidden={} k={} max_n={}",
        args.checkpoint.display(),
        params.hidden(),
        eval.k,
        eval.max_n
    );
    let profile = evaluation::evaluate_parallel(&params, language, eval);
    println!("{profile}");
    if let Some(n) = args.probe {
        println!("n={n}: {}", probe_failure_mode(&params, language, n)?);
    }
    Ok(())
}

fn gradcheck(args: GradcheckArgs) -> Result<()> {
    if args.hidden == 0 {
        bail!("--hidden must be at least 1");
    }
    eprintln!(
        "gradcheck: language={} hidden={} n={} seed={} eps={:e}",
        args.language, args.hidden, args.n, args.seed, args.eps
    );
    let params = LstmParameters::init(args.language.input_dim(), args.hidden, args.seed);
    let sample = args.language.generate_sample(args.n)?;
    let (exact, loss) = params.backward(&sample);
    let numeric = params.finite_difference_grad(&sample, args.eps)?;
    let err = exact.max_relative_error(&numeric, 1e-4);
    println!("loss {loss:.12}");
    println!("max relative error {err:.3e}");
    if err.is_nan() || err > args.tol {
        bail!(
            "max relative error {err:.3e} exceeds tolerance {:.1e}",
            args.tol
        );
    }
    Ok(())
}

fn trace(args: TraceArgs) -> Result<()> {
    let (params, language) = load_model(&args.checkpoint, args.language)?;
    eprintln!(
        "trace: checkpoint={} language={language} n={} rho_min={}",
        args.checkpoint.display(),
        args.n,
        args.rho_min
    );
    let records = trace_sequence(&params, language, args.n)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_atomic(&args.out.join("trace.csv"), &trace_csv(&records)?)?;
    write_atomic(
        &args.out.join("predictions.csv"),
        &predictions_csv(&records)?,
    )?;

    let seg = PhaseSegmentation::for_sample(language, args.n);
    for (unit, rho) in phase_correlations(&records, &seg).iter().enumerate() {
        let cols: Vec<String> = rho.iter().map(|r| format!("{r:+.3}")).collect();
        println!("unit {unit}: rho per phase [{}]", cols.join(", "));
    }
    let counters = detect_counters(&records, &seg, args.rho_min);
    if counters.is_empty() {
        println!("no unit is monotone in every phase");
    }
    for c in counters {
        println!("counter: unit {} {:?}", c.unit, c.directions);
    }
    Ok(())
}
