//! `levelbound` — bound analysis for elitist evolutionary algorithms on
//! fitness-level models: model generation, bound/scheme grids, shortcut
//! scans, Monte Carlo validation, and exhaustive chain cross-checks, with
//! CSV or JSON output suitable for plotting.

mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use levelbound::bounds::{
    compare_schemes, detect_shortcuts, exact_hitting_time, linear_bound, BoundVector, Direction,
    Scheme,
};
use levelbound::model::{load_model, LevelModel};
use levelbound::oracle::{enumerate_chain, monte_carlo, Problem};
use levelbound::Error;

use report::{render, BoundRow, OracleRow, ShortcutRow, SimulateRow};

#[derive(Parser)]
#[command(
    name = "levelbound",
    about = "Hitting-time bounds for elitist evolutionary algorithms from fitness-level models",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute one bound (scheme + direction) on a model.
    Analyze(AnalyzeArgs),
    /// Compute the full scheme grid over a list of instance sizes.
    Compare(CompareArgs),
    /// Scan a model for fitness-landscape shortcuts.
    Shortcuts(ShortcutsArgs),
    /// Simulate the (1+1) algorithm and compare against the exact time.
    Simulate(SimulateArgs),
    /// Cross-check a generator model against full chain enumeration.
    Oracle(OracleArgs),
}

/// Model selection shared by the model-driven subcommands: exactly one of
/// a built-in problem (with its size list) or a model file.
#[derive(Args, Clone)]
struct ModelSelection {
    /// Built-in landscape: "onemax" or "twomax1".
    #[arg(long)]
    problem: Option<String>,
    /// Path to a model JSON file.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Comma-separated instance sizes, e.g. "16,32,64" (with --problem).
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Output format: "csv" or "json".
    #[arg(long, default_value = "csv")]
    format: String,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    selection: ModelSelection,
    /// Coefficient scheme: type0|type1|c|cl|ckl|product|pathsum.
    #[arg(long)]
    scheme: String,
    /// Bound direction: lower|upper.
    #[arg(long, default_value = "lower")]
    direction: String,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    selection: ModelSelection,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ShortcutsArgs {
    #[command(flatten)]
    selection: ModelSelection,
    /// Shortcut threshold in (0, 1).
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Built-in landscape: "onemax" or "twomax1".
    #[arg(long)]
    problem: String,
    /// Comma-separated instance sizes.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Start level; defaults to the worst level K of each instance.
    #[arg(long)]
    start_level: Option<usize>,
    /// Number of independent runs.
    #[arg(long, default_value_t = 10_000)]
    runs: u64,
    /// Master seed for the per-run random streams.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct OracleArgs {
    /// Built-in landscape: "onemax" or "twomax1".
    #[arg(long)]
    problem: String,
    /// Comma-separated instance sizes (each at most 14).
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) {
                print!("{err}");
                return ExitCode::SUCCESS;
            }
            let rendered = err.render().to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("ERROR: {}", first.trim_start_matches("error: "));
            for line in rendered.lines().skip(1) {
                eprintln!("{line}");
            }
            return ExitCode::from(1);
        }
    };

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("ERROR: {err}");
            ExitCode::from(if err.is_numeric() { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Analyze(args) => {
            let text = run_analyze(&args)?;
            emit(&args.output, &text)
        }
        Command::Compare(args) => {
            let text = run_compare(&args)?;
            emit(&args.output, &text)
        }
        Command::Shortcuts(args) => {
            let text = run_shortcuts(&args)?;
            emit(&args.output, &text)
        }
        Command::Simulate(args) => {
            let text = run_simulate(&args)?;
            emit(&args.output, &text)
        }
        Command::Oracle(args) => {
            let text = run_oracle(&args)?;
            emit(&args.output, &text)
        }
    }
}

fn emit(output: &OutputArgs, text: &str) -> Result<(), Error> {
    match &output.out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn want_json(output: &OutputArgs) -> Result<bool, Error> {
    match output.format.as_str() {
        "csv" => Ok(false),
        "json" => Ok(true),
        other => Err(Error::InvalidParameter(format!(
            "unknown format \"{other}\"; expected csv or json"
        ))),
    }
}

fn parse_problem(name: &str, n: usize) -> Result<Problem, Error> {
    let problem = match name {
        "onemax" => Problem::OneMax { n },
        "twomax1" => Problem::TwoMax1 { n },
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown problem \"{other}\"; expected onemax or twomax1"
            )))
        }
    };
    problem.validate()?;
    Ok(problem)
}

/// Resolves the model selection to `(instance size, model)` pairs. Models
/// loaded from a file report their level count as the size column.
fn resolve_models(selection: &ModelSelection) -> Result<Vec<(usize, LevelModel)>, Error> {
    match (&selection.problem, &selection.model) {
        (Some(name), None) => {
            if selection.n.is_empty() {
                return Err(Error::InvalidParameter(
                    "--problem requires a non-empty --n list".into(),
                ));
            }
            let mut sizes = selection.n.clone();
            sizes.sort_unstable();
            sizes.dedup();
            sizes
                .into_iter()
                .map(|n| Ok((n, parse_problem(name, n)?.generator_model()?)))
                .collect()
        }
        (None, Some(path)) => {
            if !selection.n.is_empty() {
                return Err(Error::InvalidParameter(
                    "--n applies only to --problem selections".into(),
                ));
            }
            let model = load_model(path)?;
            Ok(vec![(model.levels(), model)])
        }
        _ => Err(Error::InvalidParameter(
            "select exactly one of --problem or --model".into(),
        )),
    }
}

fn parse_direction(name: &str) -> Result<Direction, Error> {
    match name {
        "lower" => Ok(Direction::Lower),
        "upper" => Ok(Direction::Upper),
        other => Err(Error::InvalidParameter(format!(
            "unknown direction \"{other}\"; expected lower or upper"
        ))),
    }
}

fn parse_scheme(name: &str) -> Result<Scheme, Error> {
    Scheme::from_cli_name(name).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "unknown scheme \"{name}\"; expected type0, type1, c, cl, ckl, product, or pathsum"
        ))
    })
}

fn bound_rows(n: usize, bound: &BoundVector, exact: Option<&BoundVector>) -> Vec<BoundRow> {
    (1..=bound.levels())
        .map(|k| {
            let exact_value = exact.map(|e| e.level(k));
            BoundRow {
                label: bound.label().to_string(),
                n,
                scheme: bound.provenance().tag(),
                direction: bound.direction().as_str(),
                level: k,
                bound: bound.level(k),
                exact: exact_value,
                ratio: exact_value.map(|e| bound.level(k) / e),
            }
        })
        .collect()
}

fn run_analyze(args: &AnalyzeArgs) -> Result<String, Error> {
    let json = want_json(&args.output)?;
    let scheme = parse_scheme(&args.scheme)?;
    let direction = parse_direction(&args.direction)?;
    let mut rows = Vec::new();
    for (n, model) in resolve_models(&args.selection)? {
        let exact = model
            .is_exact()
            .then(|| exact_hitting_time(&model))
            .transpose()?;
        let bound = linear_bound(&model, scheme, direction)?;
        rows.extend(bound_rows(n, &bound, exact.as_ref()));
    }
    Ok(render(&rows, BoundRow::HEADER, BoundRow::csv, json))
}

fn run_compare(args: &CompareArgs) -> Result<String, Error> {
    let json = want_json(&args.output)?;
    let models = resolve_models(&args.selection)?;
    let per_model = parallel_map(models, |(n, model)| {
        let comparison = compare_schemes(&model)?;
        let mut rows = Vec::new();
        for bound in &comparison.bounds {
            rows.extend(bound_rows(n, bound, comparison.exact.as_ref()));
        }
        Ok(rows)
    })?;
    let rows: Vec<BoundRow> = per_model.into_iter().flatten().collect();
    Ok(render(&rows, BoundRow::HEADER, BoundRow::csv, json))
}

fn run_shortcuts(args: &ShortcutsArgs) -> Result<String, Error> {
    let json = want_json(&args.output)?;
    let mut rows = Vec::new();
    for (n, model) in resolve_models(&args.selection)? {
        let report = detect_shortcuts(&model, args.eps)?;
        for entry in &report.entries {
            rows.push(ShortcutRow {
                label: model.label().to_string(),
                n,
                k: entry.level_from,
                l: entry.target,
                ratio: entry.ratio,
                epsilon: args.eps,
            });
        }
    }
    Ok(render(&rows, ShortcutRow::HEADER, ShortcutRow::csv, json))
}

fn run_simulate(args: &SimulateArgs) -> Result<String, Error> {
    let json = want_json(&args.output)?;
    if args.n.is_empty() {
        return Err(Error::InvalidParameter(
            "simulate requires a non-empty --n list".into(),
        ));
    }
    let mut sizes = args.n.clone();
    sizes.sort_unstable();
    sizes.dedup();
    let mut rows = Vec::new();
    for n in sizes {
        let problem = parse_problem(&args.problem, n)?;
        let start_level = args.start_level.unwrap_or_else(|| problem.level_count());
        let result = monte_carlo(&problem, start_level, args.runs, args.seed)?;
        let model = problem.generator_model()?;
        let exact = exact_hitting_time(&model)?;
        let exact_value = if start_level == 0 {
            0.0
        } else {
            exact.level(start_level)
        };
        let se = result.standard_error();
        rows.push(SimulateRow {
            label: model.label().to_string(),
            n,
            start_level,
            runs: args.runs,
            mean: result.mean,
            stddev: result.std_dev,
            exact: Some(exact_value),
            z_score: (se > 0.0).then(|| (result.mean - exact_value) / se),
        });
    }
    Ok(render(&rows, SimulateRow::HEADER, SimulateRow::csv, json))
}

fn run_oracle(args: &OracleArgs) -> Result<String, Error> {
    let json = want_json(&args.output)?;
    if args.n.is_empty() {
        return Err(Error::InvalidParameter(
            "oracle requires a non-empty --n list".into(),
        ));
    }
    let mut sizes = args.n.clone();
    sizes.sort_unstable();
    sizes.dedup();
    let mut rows = Vec::new();
    for n in sizes {
        let problem = parse_problem(&args.problem, n)?;
        let oracle = enumerate_chain(&problem)?;
        let model = problem.generator_model()?;
        let exact = exact_hitting_time(&model)?;
        let label = model.label().to_string();
        for k in 1..=model.levels() {
            for l in 0..k {
                let q_model = model.q_lo().get(k, l);
                let q_oracle = oracle.q(k, l);
                rows.push(OracleRow {
                    label: label.clone(),
                    n,
                    record: "q",
                    k,
                    l: Some(l),
                    q_model: Some(q_model),
                    q_oracle: Some(q_oracle),
                    q_diff: Some((q_model - q_oracle).abs()),
                    m_oracle: None,
                    m_model: None,
                    m_rel_diff: None,
                });
            }
        }
        for k in 1..=model.levels() {
            let m_oracle = oracle.level_time(k);
            let m_model = exact.level(k);
            rows.push(OracleRow {
                label: label.clone(),
                n,
                record: "m",
                k,
                l: None,
                q_model: None,
                q_oracle: None,
                q_diff: None,
                m_oracle: Some(m_oracle),
                m_model: Some(m_model),
                m_rel_diff: Some((m_oracle - m_model).abs() / m_model.abs()),
            });
        }
    }
    Ok(render(&rows, OracleRow::HEADER, OracleRow::csv, json))
}

/// Maps `work` over `items` on up to `LEVELBOUND_THREADS` worker threads
/// (0 or unset: all available cores), preserving input order in the output
/// regardless of scheduling.
fn parallel_map<T, R, F>(items: Vec<T>, work: F) -> Result<Vec<R>, Error>
where
    T: Send,
    R: Send,
    F: Fn(T) -> Result<R, Error> + Sync,
{
    let threads = thread_count().min(items.len().max(1));
    if threads <= 1 {
        return items.into_iter().map(work).collect();
    }
    let jobs: Vec<Mutex<Option<T>>> = items.into_iter().map(|t| Mutex::new(Some(t))).collect();
    let results: Vec<Mutex<Option<Result<R, Error>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    let cursor = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let index = cursor.fetch_add(1, Ordering::Relaxed);
                if index >= jobs.len() {
                    break;
                }
                let item = jobs[index].lock().unwrap().take().unwrap();
                *results[index].lock().unwrap() = Some(work(item));
            });
        }
    });
    results
        .into_iter()
        .map(|cell| cell.into_inner().unwrap().expect("worker completed"))
        .collect()
}

fn thread_count() -> usize {
    match std::env::var("LEVELBOUND_THREADS") {
        Ok(value) => match value.trim().parse::<usize>() {
            Ok(0) | Err(_) => default_threads(),
            Ok(t) => t,
        },
        Err(_) => default_threads(),
    }
}

fn default_threads() -> usize {
    std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1)
}
