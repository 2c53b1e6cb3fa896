//! Certifies network outputs when the input ranges over a line segment:
//! deterministic verdicts, guaranteed probability bounds, and a benchmark
//! table comparing bounding methods.

use std::env;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use approxline::certify::{
    certify_deterministic, interval_baseline, prob_bounds, refine_with_schedule, BoundMethod,
    OutputProperty, ProbBound, RunStatus, Schedule, Verdict,
};
use approxline::domain::{propagate_network, AbstractState, Mode, RelaxConfig};
use approxline::golden;
use approxline::network::Network;
use approxline::oracle::{sample_probability, InputLine, SampleSettings};
use approxline::tensor::Tensor;
use approxline_cli::input;
use approxline_cli::record::{RunRecord, CSV_HEADER};
use clap::{ArgAction, Args, Parser, Subcommand};
use rayon::prelude::*;

const BUDGET_ENV: &str = "APPROXLINE_REGION_BUDGET";

#[derive(Parser)]
#[command(
    name = "approxline",
    version,
    about = "Certify network outputs over input line segments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prove that every reachable output satisfies a property.
    Certify(CertifyArgs),
    /// Bound the probability that the property holds along the input line.
    Bounds(BoundsArgs),
    /// Run several bounding methods over a pair list and tabulate them.
    Compare(CompareArgs),
    /// Replay the built-in worked example against its pinned values.
    Fig2,
    /// Concrete forward pass.
    Eval(EvalArgs),
}

#[derive(Args)]
struct RelaxFlags {
    /// Fraction of a long chain's shortest segments to relax into boxes.
    #[arg(long, default_value_t = 0.0)]
    p: f64,

    /// Cluster count for the relaxed boxes.
    #[arg(long, default_value_t = 25)]
    k: usize,

    /// Chains with more nodes than this are eligible for relaxation.
    #[arg(long, default_value_t = 1000)]
    chain_threshold: usize,

    /// Region cap; propagation reports a budget failure beyond it.
    /// Falls back to APPROXLINE_REGION_BUDGET, then to 1000000.
    #[arg(long)]
    budget: Option<usize>,

    /// Relax in front of every weighted layer, not only convolutions.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    relax_before_dense: bool,
}

impl RelaxFlags {
    fn config(&self) -> Result<RelaxConfig> {
        let cfg = RelaxConfig {
            p: self.p,
            k: self.k,
            chain_threshold: self.chain_threshold,
            region_budget: resolve_budget(self.budget)?,
            relax_before_dense: self.relax_before_dense,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn resolve_budget(flag: Option<usize>) -> Result<usize> {
    if let Some(b) = flag {
        return Ok(b);
    }
    match env::var(BUDGET_ENV) {
        Ok(v) => v
            .parse()
            .with_context(|| format!("parsing {BUDGET_ENV}={v:?}")),
        Err(_) => Ok(RelaxConfig::default().region_budget),
    }
}

fn parse_method(s: &str) -> Result<BoundMethod> {
    match s {
        "exact-mass" | "exact" => Ok(BoundMethod::ExactMass),
        "coarse" | "coarse-indicator" => Ok(BoundMethod::CoarseIndicator),
        other => bail!("unknown method {other:?}; expected exact-mass or coarse"),
    }
}

/// Builds the input state from the flags: an explicit chain file, a pair
/// of endpoint vectors, or the input chain a builtin model ships with.
fn input_state(
    model: &str,
    input_a: &Option<PathBuf>,
    input_b: &Option<PathBuf>,
    chain: &Option<PathBuf>,
    mode: Mode,
) -> Result<AbstractState> {
    if let Some(path) = chain {
        return Ok(AbstractState::from_chain(input::chain(path)?, mode)?);
    }
    match (input_a, input_b) {
        (Some(a), Some(b)) => Ok(AbstractState::segment(
            input::vector(a)?,
            input::vector(b)?,
            mode,
        )?),
        (None, None) if model == input::BUILTIN_FIG2 => {
            Ok(AbstractState::from_chain(golden::input_chain(), mode)?)
        }
        _ => bail!("provide --input-a with --input-b, a --chain file, or a builtin model"),
    }
}

#[derive(Args)]
struct CertifyArgs {
    /// Model file, or builtin:fig2.
    #[arg(long)]
    model: String,

    /// Segment start vector (JSON).
    #[arg(long, requires = "input_b")]
    input_a: Option<PathBuf>,

    /// Segment end vector (JSON).
    #[arg(long, requires = "input_a")]
    input_b: Option<PathBuf>,

    /// argmax:<t>, sign:<i>:<+|->, or linear:<conjunct file>.
    #[arg(long)]
    property: String,

    #[command(flatten)]
    relax: RelaxFlags,
}

fn cmd_certify(args: CertifyArgs) -> Result<u8> {
    let net = input::network(&args.model)?;
    let state = input_state(
        &args.model,
        &args.input_a,
        &args.input_b,
        &None,
        Mode::Deterministic,
    )?;
    let prop = OutputProperty::parse_spec(&args.property)?;
    let cfg = args.relax.config()?;
    let out = propagate_network(&state, &net, &cfg)?;
    match certify_deterministic(&out, &prop)? {
        Verdict::Verified => {
            println!("Verified: every reachable output satisfies {prop}");
            Ok(0)
        }
        Verdict::Unknown(witness) => {
            println!("Unknown: found {witness} violating {prop}");
            Ok(1)
        }
    }
}

#[derive(Args)]
struct BoundsArgs {
    /// Model file, or builtin:fig2.
    #[arg(long)]
    model: String,

    /// Segment start vector (JSON).
    #[arg(long, requires = "input_b", conflicts_with = "chain")]
    input_a: Option<PathBuf>,

    /// Segment end vector (JSON).
    #[arg(long, requires = "input_a", conflicts_with = "chain")]
    input_b: Option<PathBuf>,

    /// Weighted chain file instead of segment endpoints.
    #[arg(long)]
    chain: Option<PathBuf>,

    /// argmax:<t>, sign:<i>:<+|->, or linear:<conjunct file>.
    #[arg(long)]
    property: String,

    /// Bound arithmetic: exact-mass or coarse.
    #[arg(long, default_value = "exact-mass")]
    method: String,

    /// Retry policy after budget failures: a (gentle) or b (aggressive).
    #[arg(long)]
    schedule: Option<String>,

    /// Wall-clock limit in seconds, spanning all retries.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,

    /// Print the result as CSV (header plus one row) instead of the report.
    #[arg(long)]
    csv: bool,

    #[command(flatten)]
    relax: RelaxFlags,
}

/// Single attempt; a budget failure becomes a vacuous [0, 1] result.
fn run_once(
    mut job: impl FnMut(&RelaxConfig) -> approxline::Result<ProbBound>,
    cfg: &RelaxConfig,
    method: BoundMethod,
) -> Result<ProbBound> {
    let start = Instant::now();
    match job(cfg) {
        Ok(b) => Ok(b),
        Err(approxline::Error::BudgetExceeded { .. }) => Ok(ProbBound {
            lower: 0.0,
            upper: 1.0,
            method,
            region_count: 0,
            runtime: start.elapsed(),
            status: RunStatus::BudgetExceeded,
        }),
        Err(e) => Err(e.into()),
    }
}

fn print_bound_report(b: &ProbBound) {
    println!("method:  {}", b.method);
    println!("lower:   {}", b.lower);
    println!("upper:   {}", b.upper);
    println!("width:   {}", b.width());
    println!("regions: {}", b.region_count);
    println!("millis:  {}", b.runtime.as_millis());
    println!("status:  {}", b.status);
}

fn cmd_bounds(args: BoundsArgs) -> Result<u8> {
    let net = input::network(&args.model)?;
    let state = input_state(
        &args.model,
        &args.input_a,
        &args.input_b,
        &args.chain,
        Mode::Probabilistic,
    )?;
    let prop = OutputProperty::parse_spec(&args.property)?;
    let cfg = args.relax.config()?;
    let method = parse_method(&args.method)?;
    let timeout = Duration::from_secs_f64(args.timeout);

    let job = |cfg: &RelaxConfig| {
        let out = propagate_network(&state, &net, cfg)?;
        prob_bounds(&out, &prop, method)
    };
    let bound = match &args.schedule {
        Some(s) => refine_with_schedule(job, s.parse::<Schedule>()?, &cfg, timeout, method)?.bound,
        None => run_once(job, &cfg, method)?,
    };

    let label = if cfg.p == 0.0 { "exact" } else { "approxline" };
    let record = RunRecord::from_bound(&args.model, prop.to_string(), label, cfg.p, cfg.k, &bound);
    if args.csv {
        println!("{CSV_HEADER}");
        println!("{}", record.to_csv_line());
    } else {
        print_bound_report(&bound);
    }
    Ok(0)
}

#[derive(Args)]
struct CompareArgs {
    /// Model file, or builtin:fig2.
    #[arg(long)]
    model: String,

    /// JSON list of {a, b} vector pairs.
    #[arg(long)]
    pairs: PathBuf,

    /// Output indices whose detection sign is checked for consistency.
    #[arg(long, value_delimiter = ',', required = true)]
    attrs: Vec<usize>,

    /// Methods to run: exact, approxline[:p[:k]], interval, sampling.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "exact,approxline:0.5:25,interval,sampling"
    )]
    methods: Vec<String>,

    /// Chains with more nodes than this are eligible for relaxation.
    #[arg(long, default_value_t = 1000)]
    chain_threshold: usize,

    /// Region cap per run; beyond it the row is recorded as a budget failure.
    #[arg(long)]
    budget: Option<usize>,

    /// Base seed; each sampling row adds its own row index.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Clopper-Pearson confidence for sampling rows.
    #[arg(long, default_value_t = 0.9999)]
    confidence: f64,

    /// Target interval width for sampling rows.
    #[arg(long, default_value_t = 0.002)]
    width: f64,

    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Also write per-method aggregates as a gnuplot data file.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum MethodSpec {
    Exact,
    ApproxLine { p: f64, k: usize },
    Interval,
    Sampling,
}

impl MethodSpec {
    fn parse(s: &str) -> Result<MethodSpec> {
        let mut parts = s.split(':');
        let spec = match parts.next().unwrap_or_default() {
            "exact" => MethodSpec::Exact,
            "interval" => MethodSpec::Interval,
            "sampling" => MethodSpec::Sampling,
            "approxline" => {
                let p = parts
                    .next()
                    .map(str::parse)
                    .transpose()
                    .with_context(|| format!("p in {s:?}"))?
                    .unwrap_or(0.5);
                let k = parts
                    .next()
                    .map(str::parse)
                    .transpose()
                    .with_context(|| format!("k in {s:?}"))?
                    .unwrap_or(25);
                MethodSpec::ApproxLine { p, k }
            }
            other => bail!("unknown method {other:?}; expected exact, approxline, interval, or sampling"),
        };
        if parts.next().is_some() {
            bail!("too many parameters in method {s:?}");
        }
        Ok(spec)
    }

    fn label(self) -> &'static str {
        match self {
            MethodSpec::Exact => "exact",
            MethodSpec::ApproxLine { .. } => "approxline",
            MethodSpec::Interval => "interval",
            MethodSpec::Sampling => "sampling",
        }
    }

    fn p(self) -> f64 {
        match self {
            MethodSpec::ApproxLine { p, .. } => p,
            _ => 0.0,
        }
    }

    fn k(self) -> usize {
        match self {
            MethodSpec::ApproxLine { k, .. } => k,
            _ => 0,
        }
    }
}

struct CompareOpts {
    chain_threshold: usize,
    budget: usize,
    confidence: f64,
    width: f64,
}

/// Consistency target: the sign the detector assigns at the first endpoint
/// (zero counts as negative).
fn detection_property(net: &Network, a: &Tensor, attr: usize) -> approxline::Result<OutputProperty> {
    let scores = net.forward(a)?;
    let score = scores.data().get(attr).copied().ok_or_else(|| {
        approxline::Error::InvalidArgument(format!(
            "attribute {attr} out of range for {} outputs",
            scores.len()
        ))
    })?;
    let sign = if score > 0.0 { 1 } else { -1 };
    Ok(OutputProperty::SignIs { index: attr, sign })
}

fn method_outcome(
    net: &Network,
    a: &Tensor,
    b: &Tensor,
    attr: usize,
    method: MethodSpec,
    opts: &CompareOpts,
    seed: u64,
) -> approxline::Result<(f64, f64, usize, RunStatus)> {
    let prop = detection_property(net, a, attr)?;
    match method {
        MethodSpec::Interval => {
            let bound = interval_baseline(a, b, net, &prop)?;
            Ok((bound.lower, bound.upper, bound.region_count, bound.status))
        }
        MethodSpec::Sampling => {
            let settings = SampleSettings {
                confidence: opts.confidence,
                target_width: opts.width,
                seed,
                max_duration: None,
            };
            let line = InputLine::segment(a.clone(), b.clone());
            let report = sample_probability(&line, net, &prop, &settings)?;
            Ok((report.lower, report.upper, 0, RunStatus::Ok))
        }
        MethodSpec::Exact | MethodSpec::ApproxLine { .. } => {
            let cfg = RelaxConfig {
                p: method.p(),
                k: method.k().max(1),
                chain_threshold: opts.chain_threshold,
                region_budget: opts.budget,
                relax_before_dense: true,
            };
            let state = AbstractState::segment(a.clone(), b.clone(), Mode::Probabilistic)?;
            let out = propagate_network(&state, net, &cfg)?;
            let bound = prob_bounds(&out, &prop, BoundMethod::ExactMass)?;
            Ok((bound.lower, bound.upper, bound.region_count, bound.status))
        }
    }
}

fn compare_row(
    net: &Network,
    a: &Tensor,
    b: &Tensor,
    (pair, attr, method): (usize, usize, MethodSpec),
    opts: &CompareOpts,
    seed: u64,
) -> RunRecord {
    let start = Instant::now();
    let (lower, upper, regions, status) = match method_outcome(net, a, b, attr, method, opts, seed)
    {
        Ok(outcome) => outcome,
        Err(approxline::Error::BudgetExceeded { .. }) => {
            (0.0, 1.0, 0, RunStatus::BudgetExceeded)
        }
        Err(approxline::Error::Timeout(_)) => (0.0, 1.0, 0, RunStatus::Timeout),
        Err(e) => {
            eprintln!("pair{pair} attribute {attr} {}: {e}", method.label());
            return RunRecord {
                item_id: format!("pair{pair}"),
                attribute: attr.to_string(),
                method: method.label().into(),
                p: method.p(),
                k: method.k(),
                lower: 0.0,
                upper: 1.0,
                width: 1.0,
                regions: 0,
                millis: start.elapsed().as_millis(),
                status: "error".into(),
            };
        }
    };
    RunRecord {
        item_id: format!("pair{pair}"),
        attribute: attr.to_string(),
        method: method.label().into(),
        p: method.p(),
        k: method.k(),
        lower,
        upper,
        width: upper - lower,
        regions,
        millis: start.elapsed().as_millis(),
        status: status.to_string(),
    }
}

fn aggregate_row(method: MethodSpec, rows: &[RunRecord]) -> RunRecord {
    let group: Vec<&RunRecord> = rows
        .iter()
        .filter(|r| r.method == method.label() && r.p == method.p() && r.k == method.k())
        .collect();
    let n = group.len().max(1) as f64;
    let mean = |f: fn(&RunRecord) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / n;
    RunRecord {
        item_id: "aggregate".into(),
        attribute: "all".into(),
        method: method.label().into(),
        p: method.p(),
        k: method.k(),
        lower: mean(|r| r.lower),
        upper: mean(|r| r.upper),
        width: mean(|r| r.width),
        regions: group.iter().map(|r| r.regions).max().unwrap_or(0),
        millis: (group.iter().map(|r| r.millis).sum::<u128>() / group.len().max(1) as u128),
        status: "ok".into(),
    }
}

fn cmd_compare(args: CompareArgs) -> Result<u8> {
    let net = input::network(&args.model)?;
    let pairs = input::pairs(&args.pairs)?;
    let methods: Vec<MethodSpec> = args
        .methods
        .iter()
        .map(|m| MethodSpec::parse(m))
        .collect::<Result<_>>()?;
    let opts = CompareOpts {
        chain_threshold: args.chain_threshold,
        budget: resolve_budget(args.budget)?,
        confidence: args.confidence,
        width: args.width,
    };

    // Row order is pair-major, then attribute, then method, independent of
    // which worker finishes first. Sampling seeds are tied to the row index
    // for the same reason.
    let mut jobs: Vec<(usize, usize, MethodSpec)> = Vec::new();
    for pair in 0..pairs.len() {
        for &attr in &args.attrs {
            for &m in &methods {
                jobs.push((pair, attr, m));
            }
        }
    }
    let rows: Vec<RunRecord> = jobs
        .par_iter()
        .enumerate()
        .map(|(row, &job)| {
            let (a, b) = &pairs[job.0];
            compare_row(&net, a, b, job, &opts, args.seed + row as u64)
        })
        .collect();

    let mut lines = vec![CSV_HEADER.to_string()];
    lines.push(format!(
        "# sampling confidence={} target_width={} base_seed={}",
        opts.confidence, opts.width, args.seed
    ));
    lines.extend(rows.iter().map(RunRecord::to_csv_line));
    lines.extend(methods.iter().map(|&m| aggregate_row(m, &rows).to_csv_line()));
    let text = lines.join("\n") + "\n";
    match &args.out {
        Some(path) => fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }

    if let Some(path) = &args.plot {
        write_plot(path, &methods, &rows)?;
    }
    Ok(0)
}

/// Space-separated aggregate table, one line per method, for gnuplot's
/// `plot "file" using ...`.
fn write_plot(path: &Path, methods: &[MethodSpec], rows: &[RunRecord]) -> Result<()> {
    let mut text = String::from("# method p k mean_width mean_millis\n");
    for &m in methods {
        let agg = aggregate_row(m, rows);
        text.push_str(&format!(
            "{} {} {} {} {}\n",
            agg.method, agg.p, agg.k, agg.width, agg.millis
        ));
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_fig2() -> Result<u8> {
    let report = golden::run()?;
    for check in &report.checks {
        if check.ok {
            println!("ok   {:<36} {}", check.name, check.actual);
        } else {
            println!(
                "FAIL {:<36} {} (pinned {})",
                check.name, check.actual, check.expected
            );
        }
    }
    println!();
    let show = |name: &str, b: &ProbBound| {
        println!("{name:<22} [{}, {}]  ({} regions)", b.lower, b.upper, b.region_count);
    };
    show("coarse bounds:", &report.coarse);
    show("exact-mass (relaxed):", &report.exact_relaxed);
    show("exact-mass (p=0):", &report.exact_unrelaxed);
    show("interval baseline:", &report.baseline);
    match &report.verdict {
        Verdict::Verified => println!("deterministic check:   verified"),
        Verdict::Unknown(w) => println!("deterministic check:   unknown, {w}"),
    }
    println!("elapsed: {:?}", report.elapsed);
    Ok(if report.all_ok() { 0 } else { 1 })
}

#[derive(Args)]
struct EvalArgs {
    /// Model file, or builtin:fig2.
    #[arg(long)]
    model: String,

    /// Input vector file (JSON).
    #[arg(long)]
    input: PathBuf,
}

fn cmd_eval(args: EvalArgs) -> Result<u8> {
    let net = input::network(&args.model)?;
    let x = input::vector(&args.input)?;
    let y = net.forward(&x)?;
    println!("{}", serde_json::to_string(&y)?);
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Certify(a) => cmd_certify(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Fig2 => cmd_fig2(),
        Command::Eval(a) => cmd_eval(a),
    }
}

/// Joins the cause chain with ": ", skipping causes a parent already quotes.
fn render_error(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if out.ends_with(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {}", render_error(&err));
            ExitCode::from(2)
        }
    }
}
