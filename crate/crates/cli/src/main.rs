use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rtb_rerank::dataset::{
    fingerprint, generate_dataset, load_dataset, save_dataset, BetaParams, BidDistribution, DatasetFormat, GeneratorConfig, UniformRange,
};
use rtb_rerank::harness::{default_theta1_grid, emit_report, evaluate, prepare_all, run_sweep, selections_csv, ReportFormat, SweepConfig};
use rtb_rerank::optimizer::{optimize_weights, DEFAULT_GRID_STEP};
use rtb_rerank::{AuctionRecord, Error, OptimizationResult, TradeoffThresholds, WeightVector, METRIC_COUNT};

const OUT_DIR_ENV: &str = "RTBSIM_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "rtbsim",
    version,
    about = "Two-stage RTB re-ranking: generate data, search weights, sweep revenue-loss thresholds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic auction dataset.
    Generate(GenerateArgs),
    /// Search the weight simplex for one set of thresholds.
    Optimize(OptimizeArgs),
    /// Sweep the revenue-loss threshold with k-fold cross-validation.
    Sweep(SweepArgs),
    /// Apply saved weights to a dataset.
    Evaluate(EvaluateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Jsonl,
    Csv,
}

impl From<FormatArg> for DatasetFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Jsonl => DatasetFormat::Jsonl,
            FormatArg::Csv => DatasetFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BidKind {
    Lognormal,
    Uniform,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportArg {
    Csv,
    Json,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 5_000)]
    n_auctions: usize,
    #[arg(long, default_value_t = 3)]
    min_candidates: usize,
    #[arg(long, default_value_t = 8)]
    max_candidates: usize,
    #[arg(long, value_enum, default_value_t = BidKind::Lognormal)]
    bid_dist: BidKind,
    /// lognormal: mu,sigma; uniform: lo,hi
    #[arg(long, value_parser = pair, default_value = "0,1")]
    bid_params: (f64, f64),
    /// CTR beta distribution: alpha,beta
    #[arg(long, value_parser = pair, default_value = "2,8")]
    ctr_beta: (f64, f64),
    #[arg(long, value_parser = pair, default_value = "0,1")]
    memorability: (f64, f64),
    #[arg(long, value_parser = pair, default_value = "0,1")]
    relevance: (f64, f64),
    #[arg(long, value_parser = pair, default_value = "0,1")]
    saliency: (f64, f64),
    #[arg(long, default_value_t = 0.0)]
    bid_ctr_correlation: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output file; format follows the extension unless --format is given.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    /// Defaults to the input file's extension.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long, default_value_t = 0.0)]
    reserve: f64,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SearchArgs {
    /// Lower bounds on the utility, memorability, ctr, relevance and saliency change ratios.
    #[arg(long, value_parser = others, default_value = "0,0,0,0,0", allow_hyphen_values = true)]
    theta_others: [f64; METRIC_COUNT - 1],
    #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
    grid_step: f64,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    io: InputArgs,
    #[command(flatten)]
    search: SearchArgs,
    /// Largest tolerated relative revenue loss (|xi_revenue| <= |theta1|).
    #[arg(long, allow_hyphen_values = true)]
    theta1: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    io: InputArgs,
    #[command(flatten)]
    search: SearchArgs,
    /// Comma-separated theta1 values; defaults to 0, -0.05, ..., -0.5.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta1_grid: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "csv,json")]
    report: Vec<ReportArg>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    io: InputArgs,
    /// Six comma-separated weights, a JSON file holding a weight array, or an optimization.json.
    /// Omit to evaluate the highest-bid baseline.
    #[arg(long)]
    weights: Option<String>,
}

fn list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect()
}

fn pair(s: &str) -> Result<(f64, f64), String> {
    match list(s)?[..] {
        [a, b] => Ok((a, b)),
        _ => Err("expected two comma-separated numbers".into()),
    }
}

fn others(s: &str) -> Result<[f64; METRIC_COUNT - 1], String> {
    list(s)?
        .try_into()
        .map_err(|v: Vec<f64>| format!("expected {} values, got {}", METRIC_COUNT - 1, v.len()))
}

#[derive(Debug)]
enum Failure {
    Core(Error),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(e) if !e.is_validation() => 1,
            _ => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Usage(m) => f.write_str(m),
        }
    }
}

type Outcome = Result<(), Failure>;

fn resolve_format(path: &Path, explicit: Option<FormatArg>) -> Result<DatasetFormat, Failure> {
    explicit
        .map(DatasetFormat::from)
        .or_else(|| DatasetFormat::from_path(path))
        .ok_or_else(|| Failure::Usage(format!("cannot infer dataset format of {}; pass --format", path.display())))
}

fn load(io: &InputArgs) -> Result<Vec<AuctionRecord>, Failure> {
    let format = resolve_format(&io.input, io.format)?;
    Ok(load_dataset(&io.input, format)?)
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    let path = dir.join(name);
    fs::create_dir_all(dir)
        .and_then(|_| fs::write(&path, contents))
        .map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
    Ok(path)
}

fn to_json<S: serde::Serialize>(value: &S) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

fn generate(args: GenerateArgs) -> Outcome {
    let (a, b) = args.bid_params;
    let range = |(lo, hi)| UniformRange { lo, hi };
    let cfg = GeneratorConfig {
        n_auctions: args.n_auctions,
        min_candidates: args.min_candidates,
        max_candidates: args.max_candidates,
        bids: match args.bid_dist {
            BidKind::Lognormal => BidDistribution::LogNormal { mu: a, sigma: b },
            BidKind::Uniform => BidDistribution::Uniform { lo: a, hi: b },
        },
        ctr: BetaParams {
            alpha: args.ctr_beta.0,
            beta: args.ctr_beta.1,
        },
        memorability: range(args.memorability),
        relevance: range(args.relevance),
        saliency: range(args.saliency),
        bid_ctr_correlation: args.bid_ctr_correlation,
        seed: args.seed,
    };
    let format = resolve_format(&args.out, args.format)?;
    let records = generate_dataset(&cfg)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    save_dataset(&records, &args.out, format)?;
    eprintln!(
        "wrote {} auctions to {} (sha256 {})",
        records.len(),
        args.out.display(),
        fingerprint(&records)
    );
    Ok(())
}

fn optimize(args: OptimizeArgs) -> Outcome {
    let thresholds = TradeoffThresholds::from_parts(args.theta1, args.search.theta_others)?;
    let records = load(&args.io)?;
    let train = prepare_all(&records, args.io.reserve)?;
    let result = optimize_weights(&train, &thresholds, args.search.grid_step)?;
    let path = write_out(&args.io.out, "optimization.json", &to_json(&result))?;
    match &result.weights {
        Some(w) => eprintln!(
            "feasible: weights {:?}, objective {}",
            w.values(),
            result.objective.unwrap_or_default()
        ),
        None => eprintln!("infeasible: {} admissible grid points, none changes a selection", result.admissible),
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn sweep(args: SweepArgs) -> Outcome {
    let config = SweepConfig {
        theta1_grid: if args.theta1_grid.is_empty() {
            default_theta1_grid()
        } else {
            args.theta1_grid
        },
        theta_others: args.search.theta_others,
        folds: args.folds,
        grid_step: args.search.grid_step,
        seed: args.seed,
        reserve: args.io.reserve,
    };
    let records = load(&args.io)?;
    let report = run_sweep(&records, &config)?;
    let formats: Vec<ReportFormat> = args
        .report
        .iter()
        .map(|r| match r {
            ReportArg::Csv => ReportFormat::Csv,
            ReportArg::Json => ReportFormat::Json,
        })
        .collect();
    for path in emit_report(&report, &args.io.out, &formats)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn read_weights(arg: &str) -> Result<Option<WeightVector>, Failure> {
    let path = Path::new(arg);
    if !path.is_file() {
        let values: [f64; METRIC_COUNT] = list(arg)
            .map_err(Failure::Usage)?
            .try_into()
            .map_err(|_| Failure::Usage(format!("--weights needs {METRIC_COUNT} values or a JSON file")))?;
        return Ok(Some(WeightVector::new(values)?));
    }
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |e: serde_json::Error| Failure::Usage(format!("{}: {e}", path.display()));
    let value: serde_json::Value = serde_json::from_str(&text).map_err(bad)?;
    if value.is_array() {
        return Ok(Some(serde_json::from_value(value).map_err(bad)?));
    }
    let result: OptimizationResult = serde_json::from_value(value).map_err(bad)?;
    Ok(result.weights)
}

fn evaluate_cmd(args: EvaluateArgs) -> Outcome {
    let weights = args.weights.as_deref().map(read_weights).transpose()?.flatten();
    let records = load(&args.io)?;
    let eval = evaluate(&records, weights.as_ref(), args.io.reserve)?;
    write_out(&args.io.out, "evaluation.json", &to_json(&eval))?;
    write_out(&args.io.out, "selections.csv", &selections_csv(&eval.selections))?;
    eprintln!(
        "revenue {} vs baseline {}; xi {:?}",
        eval.revenue, eval.baseline_revenue, eval.changes.xi
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Optimize(a) => optimize(a),
        Command::Sweep(a) => sweep(a),
        Command::Evaluate(a) => evaluate_cmd(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
