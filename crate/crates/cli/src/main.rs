//! `clmda` command-line front end.
//!
//! Exit codes: 0 success, 2 input or validation error, 3 numerical failure,
//! 64 usage error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use clmda::biplot::{self, Format, SceneOptions};
use clmda::data::{recode, write_atomic, write_ordinal};
use clmda::driver::{baseline_row, dimension_scan, predictor_drop_scan, ScanRow};
use clmda::simulate::{records_to_csv, run_study, summarize, Population, StudyDesign, StudyOptions};
use clmda::{
    fit, load_ordinal, load_predictors, read_ordinal, validate, FitResult, ModelConfig, ModelKind,
    OrdinalDataset, PredictorMatrix,
};
use serde::{Deserialize, Serialize};

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_USAGE: u8 = 64;

/// Environment variable with the default worker thread count.
const THREADS_ENV: &str = "CLMDA_THREADS";

#[derive(Parser, Debug)]
#[command(name = "clmda", version, about = "Cumulative-logit multidimensional analysis of ordinal data")]
struct Cli {
    /// Worker threads (default: $CLMDA_THREADS, else all cores for
    /// simulate/scan and one for fit unless --starts > 1).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one model and write the model artifact.
    Fit(FitArgs),
    /// Compare dimensionalities or predictor subsets by AIC/BIC.
    Scan(ScanArgs),
    /// Write biplot geometry as SVG or JSON.
    Biplot(BiplotArgs),
    /// Run a recovery study.
    Simulate(SimulateArgs),
    /// Collapse unobserved categories.
    Recode(RecodeArgs),
    /// Report category frequencies and problems of a response file.
    Validate(DataArgs),
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Response CSV: header of variable names, integer codes 1..C.
    #[arg(long)]
    responses: PathBuf,
    /// JSON sidecar `{"cats": [...]}` with the number of categories per variable.
    #[arg(long)]
    cats: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Predictor CSV: names, types (`numeric` or `categorical:<reference>`), data.
    #[arg(long)]
    predictors: Option<PathBuf>,
    #[arg(long, value_parser = parse_model)]
    model: ModelKind,
    /// Number of random starts (default 1 for dominance, 10 for proximity).
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    tol_outer: Option<f64>,
    #[arg(long)]
    tol_inner: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long)]
    max_inner: Option<usize>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    dims: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("scan").required(true).args(["dims_range", "drop_groups"])))]
struct ScanArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Dimensionalities to compare, e.g. `1..3` (inclusive).
    #[arg(long, value_parser = parse_range)]
    dims_range: Option<(usize, usize)>,
    /// JSON list of `{"name": ..., "columns": [...]}` groups to leave out.
    #[arg(long)]
    drop_groups: Option<PathBuf>,
    /// Dimensionality for --drop-groups.
    #[arg(long)]
    dims: Option<usize>,
    /// CSV output for the table.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BiplotArgs {
    /// Model artifact written by `fit`.
    #[arg(long = "model")]
    model_path: PathBuf,
    /// Dimension pair to show, e.g. `1,2`.
    #[arg(long, value_parser = parse_pair, default_value = "1,2")]
    dims: (usize, usize),
    /// Restrict circles to these proximity variables.
    #[arg(long, value_delimiter = ',')]
    circles: Option<Vec<String>>,
    /// Variables to add a predicted-category field for.
    #[arg(long, value_delimiter = ',')]
    regions: Vec<String>,
    /// Grid points per side of a category field.
    #[arg(long, default_value_t = 60)]
    grid: usize,
    /// Leave out the row points.
    #[arg(long)]
    no_rows: bool,
    #[arg(long, value_parser = parse_format)]
    format: Format,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("pop").required(true).args(["population", "builtin"])))]
struct SimulateArgs {
    /// Population JSON.
    #[arg(long)]
    population: Option<PathBuf>,
    /// Use the built-in study population for `dominance` or `proximity`.
    #[arg(long)]
    builtin: Option<String>,
    /// Design JSON: n_levels, c_levels, r_levels, replications, seed.
    #[arg(long)]
    design: PathBuf,
    #[arg(long, default_value_t = 1)]
    starts: usize,
    /// Fill the `seconds` column (makes reruns differ).
    #[arg(long)]
    record_timing: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RecodeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
    /// JSON file for the old-to-new code maps.
    #[arg(long)]
    map: Option<PathBuf>,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: clmda::Error| e.to_string())
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: clmda::Error| e.to_string())
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once("..").ok_or("expected a range like 1..3")?;
    let a: usize = a.trim().parse().map_err(|_| format!("bad range start {a:?}"))?;
    let b: usize = b.trim().parse().map_err(|_| format!("bad range end {b:?}"))?;
    if a == 0 || b < a {
        return Err(format!("empty or invalid range {s:?}"));
    }
    Ok((a, b))
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected a pair like 1,2")?;
    let a = a.trim().parse().map_err(|_| format!("bad dimension {a:?}"))?;
    let b = b.trim().parse().map_err(|_| format!("bad dimension {b:?}"))?;
    Ok((a, b))
}

enum Failure {
    Usage(String),
    Lib(clmda::Error),
}

impl From<clmda::Error> for Failure {
    fn from(e: clmda::Error) -> Self {
        Self::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Lib(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::Lib(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    if let Err(msg) = configure_threads(&cli) {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    let result = match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Scan(args) => cmd_scan(args),
        Command::Biplot(args) => cmd_biplot(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Recode(args) => cmd_recode(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { EXIT_INPUT } else { EXIT_NUMERICAL })
        }
    }
}

fn configure_threads(cli: &Cli) -> Result<(), String> {
    let from_env = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(v.parse::<usize>().map_err(|_| format!("{THREADS_ENV}={v:?} is not a count"))?),
        Err(_) => None,
    };
    let default = match &cli.command {
        Command::Fit(args) if args.model.starts.unwrap_or(1) <= 1 => Some(1),
        Command::Fit(_) | Command::Scan(_) | Command::Simulate(_) => None,
        _ => Some(1),
    };
    let threads = cli.threads.or(from_env).or(default);
    if threads == Some(0) {
        return Err("thread count must be at least 1".into());
    }
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

struct Inputs {
    data: OrdinalDataset,
    x: Option<PredictorMatrix>,
}

fn load_inputs(args: &ModelArgs) -> Result<Inputs, Failure> {
    let data = load_ordinal(&args.data.responses, args.data.cats.as_deref())?;
    let x = match (&args.predictors, args.model.restricted()) {
        (Some(p), true) => Some(load_predictors(p)?),
        (None, true) => {
            return Err(Failure::Usage(format!("{} requires --predictors", args.model)));
        }
        (Some(_), false) => {
            return Err(Failure::Usage(format!("{} takes no predictors", args.model)));
        }
        (None, false) => None,
    };
    Ok(Inputs { data, x })
}

fn resolve_config(args: &ModelArgs, dims: usize) -> ModelConfig {
    let mut config = ModelConfig::new(args.model, dims);
    config.seed = args.seed;
    if let Some(k) = args.starts {
        config.n_starts = k;
    }
    if let Some(t) = args.tol_outer {
        config.tol_outer = t;
    }
    if let Some(t) = args.tol_inner {
        config.tol_inner = t;
    }
    if let Some(k) = args.max_outer {
        config.max_outer = k;
    }
    if let Some(k) = args.max_inner {
        config.max_inner = k;
    }
    config
}

fn cmd_fit(args: FitArgs) -> CmdResult {
    let inputs = load_inputs(&args.model)?;
    let config = resolve_config(&args.model, args.dims);
    let result = fit(&inputs.data, &config, inputs.x.as_ref())?;
    write_atomic(&args.out, result.to_json()?.as_bytes())?;
    println!("{}", summary_line(&result));
    Ok(())
}

fn summary_line(fit: &FitResult) -> String {
    format!(
        "{} S={}: deviance {:.2} npar {} AIC {:.2} BIC {:.2} ({} after {} iterations, start {})",
        fit.model(),
        fit.dims(),
        fit.deviance,
        fit.npar,
        fit.aic,
        fit.bic,
        if fit.converged { "converged" } else { "not converged" },
        fit.iterations,
        fit.start_index
    )
}

#[derive(Debug, Deserialize)]
struct DropGroup {
    name: String,
    columns: Vec<String>,
}

/// Record of how a table or study file was produced, written next to it.
#[derive(Serialize)]
struct RunRecord<'a, T: Serialize> {
    version: &'static str,
    command: &'a str,
    settings: T,
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".run.json");
    PathBuf::from(name)
}

fn write_run_record<T: Serialize>(out: &Path, command: &str, settings: T) -> CmdResult {
    let record = RunRecord {
        version: clmda::VERSION,
        command,
        settings,
    };
    let mut text = serde_json::to_string_pretty(&record)?;
    text.push('\n');
    write_atomic(&sidecar_path(out), text.as_bytes())?;
    Ok(())
}

fn cmd_scan(args: ScanArgs) -> CmdResult {
    let inputs = load_inputs(&args.model)?;
    let (rows, first_column) = if let Some((a, b)) = args.dims_range {
        let dims: Vec<usize> = (a..=b).collect();
        let config = resolve_config(&args.model, a);
        let rows = dimension_scan(&inputs.data, &config, &dims, inputs.x.as_ref())?;
        (rows, "dims")
    } else {
        let path = args.drop_groups.as_ref().expect("clap enforces one of the two");
        let dims = args
            .dims
            .ok_or_else(|| Failure::Usage("--drop-groups needs --dims".into()))?;
        let Some(x) = inputs.x.as_ref() else {
            return Err(Failure::Usage("--drop-groups needs a model with predictors".into()));
        };
        let groups: Vec<DropGroup> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let groups: Vec<(String, Vec<String>)> = groups.into_iter().map(|g| (g.name, g.columns)).collect();
        let config = resolve_config(&args.model, dims);
        let full = fit(&inputs.data, &config, Some(x))?;
        let mut rows = vec![baseline_row(&full)];
        rows.extend(predictor_drop_scan(&inputs.data, &config, x, &groups)?);
        (rows, "model")
    };
    print!("{}", scan_table(&rows, first_column));
    if let Some(out) = &args.out {
        write_atomic(out, scan_csv(&rows, first_column).as_bytes())?;
        let config = resolve_config(&args.model, rows.first().map_or(1, |r| r.dims));
        write_run_record(
            out,
            "scan",
            serde_json::json!({
                "config": config,
                "dims_range": args.dims_range,
                "drop_groups": args.drop_groups,
                "responses": args.model.data.responses,
                "predictors": args.model.predictors,
            }),
        )?;
    }
    Ok(())
}

fn scan_label(row: &ScanRow, first_column: &str) -> String {
    if first_column == "dims" {
        row.dims.to_string()
    } else {
        row.label.clone()
    }
}

fn scan_csv(rows: &[ScanRow], first_column: &str) -> String {
    let mut out = format!("{first_column},deviance,npar,aic,bic\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            scan_label(row, first_column),
            row.deviance,
            row.npar,
            row.aic,
            row.bic
        );
    }
    out
}

fn scan_table(rows: &[ScanRow], first_column: &str) -> String {
    let mut out = format!(
        "{first_column:>12} {:>14} {:>6} {:>14} {:>14}\n",
        "deviance", "npar", "AIC", "BIC"
    );
    for row in rows {
        let mark = |best: bool| if best { "*" } else { " " };
        let _ = writeln!(
            out,
            "{:>12} {:>14.2} {:>6} {:>13.2}{} {:>13.2}{}{}",
            scan_label(row, first_column),
            row.deviance,
            row.npar,
            row.aic,
            mark(row.aic_best),
            row.bic,
            mark(row.bic_best),
            if row.converged { "" } else { "  (not converged)" }
        );
    }
    out.push_str("* minimum\n");
    out
}

fn cmd_biplot(args: BiplotArgs) -> CmdResult {
    let model = FitResult::load(&args.model_path)?;
    let opts = SceneOptions {
        rows: !args.no_rows,
        circles: args.circles,
        regions: args.regions,
        grid_size: args.grid,
    };
    let scene = biplot::scene(&model, args.dims, &opts)?;
    biplot::render(&scene, args.format, &args.out)?;
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> CmdResult {
    let pop: Population = match (&args.population, args.builtin.as_deref()) {
        (Some(path), _) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        (None, Some(family)) => {
            let family = serde_json::from_value(serde_json::Value::String(family.to_string()))
                .map_err(|_| Failure::Usage(format!("unknown family {family:?}")))?;
            Population::appendix_c(family)
        }
        (None, None) => unreachable!("clap enforces one of the two"),
    };
    let design: StudyDesign = serde_json::from_str(&std::fs::read_to_string(&args.design)?)?;
    if design.replications == 0 {
        return Err(Failure::Usage("design.replications must be at least 1".into()));
    }
    if args.starts == 0 {
        return Err(Failure::Usage("--starts must be at least 1".into()));
    }
    let opts = StudyOptions {
        n_starts: args.starts,
        record_timing: args.record_timing,
    };
    let records = run_study(&pop, &design, &opts)?;
    write_atomic(&args.out, records_to_csv(&records).as_bytes())?;
    write_run_record(
        &args.out,
        "simulate",
        serde_json::json!({"population": pop, "design": design, "options": opts}),
    )?;
    println!("{:>6} {:>3} {:>3} {:>10} {:>12} {:>8}", "N", "R", "C", "family", "median_delta", "failed");
    for cell in summarize(&records) {
        println!(
            "{:>6} {:>3} {:>3} {:>10} {:>12} {:>8}",
            cell.n,
            cell.r,
            cell.c,
            serde_json::to_value(cell.family)?.as_str().unwrap_or("?"),
            cell.median_delta.map_or("NA".into(), |d| format!("{d:.4}")),
            cell.failures
        );
    }
    Ok(())
}

fn cmd_recode(args: RecodeArgs) -> CmdResult {
    let ds = read_ordinal(&args.data.responses, args.data.cats.as_deref())?;
    let (recoded, maps) = recode(&ds)?;
    let mut buf = Vec::new();
    write_ordinal(&recoded, &mut buf)?;
    write_atomic(&args.out, &buf)?;
    let changed = maps.iter().flatten().any(|(old, new)| old != new);
    for (name, map) in ds.var_names().iter().zip(&maps) {
        let pairs: Vec<String> = map.iter().map(|(o, n)| format!("{o}->{n}")).collect();
        println!("{name}: {}", pairs.join(" "));
    }
    if !changed {
        println!("no unobserved categories; codes unchanged");
    }
    if let Some(path) = &args.map {
        let table: serde_json::Map<String, serde_json::Value> = ds
            .var_names()
            .iter()
            .zip(&maps)
            .map(|(name, m)| (name.clone(), serde_json::json!(m)))
            .collect();
        let mut text = serde_json::to_string_pretty(&table)?;
        text.push('\n');
        write_atomic(path, text.as_bytes())?;
    }
    Ok(())
}

fn cmd_validate(args: DataArgs) -> CmdResult {
    let ds = read_ordinal(&args.responses, args.cats.as_deref())?;
    let report = validate(&ds);
    print!("{report}");
    if report.has_gaps() {
        return Err(Failure::Lib(clmda::Error::Validation(
            "unobserved categories; run `clmda recode`".into(),
        )));
    }
    Ok(())
}
