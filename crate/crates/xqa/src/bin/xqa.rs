use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use xqa::adapter::AdapterDescriptor;
use xqa::corpus::{load_corpus, Corpus, Strictness};
use xqa::coupling::{FailPolicy, LocateOptions, ProbeOptions};
use xqa::fixture::{fixture_corpus, micro_corpus};
use xqa::reference::{RefMode, ReferenceModel, DEFAULT_TOP_M};
use xqa::regularizer::{
    j_reg, j_reg_grad, p_answer, p_expl_product, p_expl_sum, p_expl_sum_raw, FactProbabilities,
    RegConfig,
};
use xqa::report::{
    curve_to_csv, load_predictions, load_score_column, run_agree, run_evaluate, run_probe,
    to_canonical_json, MissingPolicy, ReportError,
};

#[derive(Parser)]
#[command(
    name = "xqa",
    version,
    about = "Evaluation harness for explainable QA: standard scores plus the FaRM and LocA coupling scores"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a prediction file against a corpus (answer/SP/joint EM, F1, P, R)
    Evaluate(EvaluateArgs),
    /// Probe a model with fact removal (FaRM) and answer location (LocA)
    Probe(ProbeArgs),
    /// Compare two model score columns: rank relation and Pearson r
    Agree(AgreeArgs),
    /// Evaluate the answer-fact coupling cost on supplied probabilities
    Regcost(RegcostArgs),
    /// Host the bundled reference model over stdio or HTTP
    Serve(ServeArgs),
    /// Write a bundled fixture corpus to disk
    Fixture(FixtureArgs),
}

#[derive(Args)]
struct EvaluateArgs {
    /// HotpotQA-format corpus JSON
    #[arg(long)]
    corpus: PathBuf,
    /// Prediction file: {"answer": {id: str}, "sp": {id: [[title, idx], ...]}}
    #[arg(long)]
    pred: PathBuf,
    /// Abort when an instance has no prediction instead of scoring it zero
    #[arg(long)]
    strict: bool,
    /// Skip records with dangling gold facts instead of aborting the load
    #[arg(long)]
    skip_dangling: bool,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FailPolicyArg {
    /// Count a failed re-query as a changed answer
    Changed,
    /// Abort the probe on the first failure
    Abort,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Model to probe: ref:coupled | ref:decoupled | http:URL | cmd:ARGV
    #[arg(long)]
    adapter: String,
    /// Maximum number of facts to remove
    #[arg(long, default_value_t = 4)]
    kmax: usize,
    /// Concurrent probe workers (capped by the adapter's declared capacity)
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, value_enum, default_value_t = FailPolicyArg::Changed)]
    fail_policy: FailPolicyArg,
    /// Per-call timeout for remote transports, in seconds
    #[arg(long, default_value_t = 30)]
    timeout_secs: u64,
    /// Seed passed through to adapters that honor one
    #[arg(long)]
    seed: Option<u64>,
    /// Relevance binarization threshold for scores-only responses
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Fact budget for the reference model's selector
    #[arg(long, default_value_t = DEFAULT_TOP_M)]
    top_m: usize,
    /// Count spans crossing sentence boundaries as inside when every covered
    /// sentence is predicted relevant
    #[arg(long)]
    relaxed_spans: bool,
    #[arg(long)]
    skip_dangling: bool,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the removal curve as CSV (k, c_rel, c_irr, farm)
    #[arg(long)]
    curve_csv: Option<PathBuf>,
}

#[derive(Args)]
struct AgreeArgs {
    /// First score column: CSV rows of `model,score` (header optional)
    #[arg(long)]
    a: PathBuf,
    /// Second score column over the same models
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PeModeArg {
    /// Product of gold-fact probabilities
    Product,
    /// Mean of gold-fact probabilities (stays in [0, 1])
    Sum,
    /// Raw sum of gold-fact probabilities (can exceed 1)
    SumRaw,
}

#[derive(Args)]
struct RegcostArgs {
    /// Answer probability in [0, 1]; alternative to --json
    #[arg(long, conflicts_with = "json")]
    pa: Option<f64>,
    /// Explanation probability in [0, 1]; alternative to --json
    #[arg(long, conflicts_with = "json", requires = "pa")]
    pe: Option<f64>,
    /// JSON file with probability arrays: {"start_probs": [..], "end_probs":
    /// [..], "gold_start": n, "gold_end": n, "s_p": [..], "s_t": [0|1, ..]}
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = PeModeArg::Product)]
    pe_mode: PeModeArg,
    #[arg(long)]
    c1: f64,
    #[arg(long)]
    c2: f64,
    #[arg(long)]
    c3: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransportArg {
    Stdio,
    Http,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Coupled,
    Decoupled,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, value_enum)]
    transport: TransportArg,
    /// Bind address for the HTTP transport
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    /// Reference model mode; defaults to $XQA_REF_MODE, then coupled
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, default_value_t = DEFAULT_TOP_M)]
    top_m: usize,
}

#[derive(Args)]
struct FixtureArgs {
    /// Where to write the corpus JSON
    #[arg(long)]
    out: PathBuf,
    /// Write the 5-instance micro fixture instead of the 20-instance one
    #[arg(long)]
    micro: bool,
}

fn log_enabled() -> bool {
    std::env::var("XQA_LOG").is_ok_and(|v| !v.is_empty() && v != "0")
}

fn log(message: impl AsRef<str>) {
    if log_enabled() {
        eprintln!("xqa: {}", message.as_ref());
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), ReportError> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_corpus_arg(path: &PathBuf, skip_dangling: bool) -> Result<Corpus, ReportError> {
    let strictness = if skip_dangling {
        Strictness::SkipInvalid
    } else {
        Strictness::Strict
    };
    let corpus = load_corpus(path, strictness)?;
    for skipped in &corpus.skipped {
        log(format!("skipped record {}: {}", skipped.id, skipped.reason));
    }
    Ok(corpus)
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), ReportError> {
    let corpus = load_corpus_arg(&args.corpus, args.skip_dangling)?;
    let predictions = load_predictions(&args.pred)?;
    let policy = if args.strict {
        MissingPolicy::Abort
    } else {
        MissingPolicy::ZeroWithWarning
    };
    let report = run_evaluate(&corpus, &predictions, policy)?;
    if report.missing_answer + report.missing_sp > 0 {
        log(format!(
            "{} missing answer entries, {} missing sp entries scored as zero",
            report.missing_answer, report.missing_sp
        ));
    }
    emit(&args.out, &to_canonical_json(&report))
}

fn cmd_probe(args: &ProbeArgs) -> Result<(), ReportError> {
    let corpus = load_corpus_arg(&args.corpus, args.skip_dangling)?;
    let mut descriptor = AdapterDescriptor::parse(&args.adapter)?;
    descriptor.timeout = std::time::Duration::from_secs(args.timeout_secs);
    descriptor.seed = args.seed;
    descriptor.relevance_threshold = args.threshold;
    descriptor.top_m = args.top_m;
    let model = descriptor.build()?;
    let opts = ProbeOptions {
        k_max: args.kmax,
        workers: args.workers,
        fail_policy: match args.fail_policy {
            FailPolicyArg::Changed => FailPolicy::CountAsChanged,
            FailPolicyArg::Abort => FailPolicy::Abort,
        },
        locate: LocateOptions {
            relaxed_boundaries: args.relaxed_spans,
        },
    };
    log(format!(
        "probing {} instances, k_max {}, {} worker(s)",
        corpus.len(),
        opts.k_max,
        opts.workers
    ));
    let report = run_probe(&corpus, model.as_ref(), &args.adapter, &opts)?;
    if let Some(path) = &args.curve_csv {
        let curve = xqa::coupling::RemovalCurve {
            k_max: report.k_max,
            c_rel: report.curve.iter().map(|r| r.c_rel).collect(),
            c_irr: report.curve.iter().map(|r| r.c_irr).collect(),
        };
        std::fs::write(path, curve_to_csv(&curve))?;
    }
    emit(&args.out, &to_canonical_json(&report))
}

fn cmd_agree(args: &AgreeArgs) -> Result<(), ReportError> {
    let a = load_score_column(&args.a)?;
    let b = load_score_column(&args.b)?;
    let report = run_agree(&a, &b)?;
    emit(&args.out, &to_canonical_json(&report))
}

#[derive(serde::Deserialize)]
struct RegcostInput {
    start_probs: Vec<f64>,
    end_probs: Vec<f64>,
    gold_start: usize,
    gold_end: usize,
    s_p: Vec<f64>,
    s_t: Vec<u8>,
}

#[derive(serde::Serialize)]
struct RegcostReport {
    c1: f64,
    c2: f64,
    c3: f64,
    grad_pa: f64,
    grad_pe: f64,
    j_reg: f64,
    p_a: f64,
    p_e: f64,
}

fn cmd_regcost(args: &RegcostArgs) -> Result<(), ReportError> {
    let cfg =
        RegConfig::new(args.c1, args.c2, args.c3).map_err(|e| ReportError::Input(e.to_string()))?;
    let (p_a, p_e) = match (&args.json, args.pa, args.pe) {
        (Some(path), None, None) => {
            let text = std::fs::read_to_string(path)?;
            let input: RegcostInput =
                serde_json::from_str(&text).map_err(|e| ReportError::Input(e.to_string()))?;
            let fp = FactProbabilities::new(
                input.s_p,
                input.s_t.into_iter().map(|g| g != 0).collect(),
            )
            .map_err(|e| ReportError::Input(e.to_string()))?;
            let p_a = p_answer(
                &input.start_probs,
                &input.end_probs,
                input.gold_start,
                input.gold_end,
            )
            .map_err(|e| ReportError::Input(e.to_string()))?;
            let p_e = match args.pe_mode {
                PeModeArg::Product => p_expl_product(&fp),
                PeModeArg::Sum => p_expl_sum(&fp),
                PeModeArg::SumRaw => p_expl_sum_raw(&fp),
            }
            .map_err(|e| ReportError::Input(e.to_string()))?;
            (p_a, p_e)
        }
        (None, Some(pa), Some(pe)) => (pa, pe),
        _ => {
            return Err(ReportError::Input(
                "supply either --pa and --pe, or --json".into(),
            ))
        }
    };
    if !(0.0..=1.0).contains(&p_e) {
        return Err(ReportError::Input(format!(
            "p_e = {p_e} is outside [0, 1]; the cost is defined on the unit square \
             (use --pe-mode sum for the normalized form)"
        )));
    }
    let cost = j_reg(p_a, p_e, &cfg).map_err(|e| ReportError::Input(e.to_string()))?;
    let (grad_pa, grad_pe) =
        j_reg_grad(p_a, p_e, &cfg).map_err(|e| ReportError::Input(e.to_string()))?;
    let report = RegcostReport {
        c1: cfg.c1,
        c2: cfg.c2,
        c3: cfg.c3,
        grad_pa,
        grad_pe,
        j_reg: cost,
        p_a,
        p_e,
    };
    emit(&args.out, &to_canonical_json(&report))
}

fn cmd_serve(args: &ServeArgs) -> Result<(), ReportError> {
    let mode = match args.mode {
        Some(ModeArg::Coupled) => RefMode::Coupled,
        Some(ModeArg::Decoupled) => RefMode::Decoupled,
        None => RefMode::from_env(),
    };
    let model = ReferenceModel::new(mode).with_top_m(args.top_m);
    match args.transport {
        TransportArg::Stdio => {
            let stdin = std::io::stdin();
            let stdout = std::io::stdout();
            xqa::server::run_stdio(&model, stdin.lock(), stdout.lock())?;
            Ok(())
        }
        TransportArg::Http => xqa::server::run_http_blocking(Arc::new(model), &args.addr)
            .map_err(ReportError::Input),
    }
}

fn cmd_fixture(args: &FixtureArgs) -> Result<(), ReportError> {
    let corpus = if args.micro {
        micro_corpus()
    } else {
        fixture_corpus()
    };
    xqa::corpus::save_corpus(&corpus, &args.out)?;
    log(format!(
        "wrote {} instances to {}",
        corpus.len(),
        args.out.display()
    ));
    Ok(())
}

fn run(cli: &Cli) -> Result<(), ReportError> {
    match &cli.command {
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Probe(args) => cmd_probe(args),
        Command::Agree(args) => cmd_agree(args),
        Command::Regcost(args) => cmd_regcost(args),
        Command::Serve(args) => cmd_serve(args),
        Command::Fixture(args) => cmd_fixture(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("xqa: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
