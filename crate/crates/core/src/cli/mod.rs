//! Command-line front end.
//!
//! Exit codes: 0 when every run finished with a proven optimum, 2 when a
//! budget ran out, 3 when `bench --compare-paper` found a value off from the
//! published one, 1 on any error.

pub mod published;
pub mod report;

use std::fs;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::heuristics::{mdp_values, recursive_values, HeuristicError, HeuristicKind};
use crate::model::{builtin, parse_model, DecPomdp, ModelError, ParseError};
use crate::policy::{tree_node_count, PolicyTree, PolicyVector};
use crate::search::{anytime_run, brute_force_capped, maa_star_with, Options, SearchError, DEFAULT_PAIR_CAP};

use report::{format_trace, save_reports, RunReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_BUDGET: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;

pub const DEFAULT_NODE_BUDGET: u64 = 1_000_000_000;

const POLICY_FORMAT: &str = "maastar-policy-v1";

#[derive(Debug, Parser)]
#[command(name = "maastar", version, about = "Optimal planning for finite-horizon decentralized POMDPs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem with best-first search.
    Solve(SolveArgs),
    /// Solve one problem by enumerating every policy vector.
    Brute(BruteArgs),
    /// Solve built-in problems over several horizons and heuristics.
    Bench(BenchArgs),
    /// Write a saved policy as one DOT graph per agent.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Model file.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Built-in problem: tiger-a, tiger-b or channel.
    #[arg(long, value_name = "NAME")]
    pub problem: Option<String>,
}

#[derive(Debug, Args)]
pub struct Budgets {
    /// Stop after this many evaluated policy vectors.
    #[arg(long, value_name = "N", default_value_t = DEFAULT_NODE_BUDGET)]
    pub node_budget: u64,
    /// Stop after this many seconds of search.
    #[arg(long, value_name = "SECONDS")]
    pub time_budget: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub horizon: u32,
    /// mdp or recursive.
    #[arg(long, default_value = "mdp")]
    pub heuristic: HeuristicKind,
    /// Heuristic weight in node selection, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub weight: f64,
    #[command(flatten)]
    pub budgets: Budgets,
    /// Stream incumbent improvements as `time,value` lines.
    #[arg(long)]
    pub anytime: bool,
    /// Write the report to a CSV file.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// Leave wall times out of the CSV report.
    #[arg(long)]
    pub no_timing: bool,
    /// Save the returned policy as JSON.
    #[arg(long, value_name = "PATH")]
    pub save_policy: Option<PathBuf>,
    /// Also write the returned policy as DOT files into this directory.
    #[arg(long, value_name = "DIR")]
    pub dot_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BruteArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub horizon: u32,
    /// Refuse to enumerate more policy vectors than this.
    #[arg(long, value_name = "N", default_value_t = DEFAULT_PAIR_CAP)]
    pub cap: u64,
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub no_timing: bool,
    #[arg(long, value_name = "PATH")]
    pub save_policy: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Built-in problems, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub problem: Vec<String>,
    /// Horizons, comma separated.
    #[arg(long, value_delimiter = ',', required = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub horizons: Vec<u32>,
    /// Heuristics, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "mdp")]
    pub heuristic: Vec<HeuristicKind>,
    #[arg(long, default_value_t = 1.0)]
    pub weight: f64,
    #[command(flatten)]
    pub budgets: Budgets,
    /// Show published values and counts next to each row and flag values
    /// that differ by more than 0.01.
    #[arg(long)]
    pub compare_paper: bool,
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Policy written by `solve --save-policy`.
    #[arg(long, value_name = "PATH")]
    pub policy: PathBuf,
    /// Directory for the `agent_<i>.dot` files.
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Heuristic(#[from] HeuristicError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {message}")]
    Policy { path: String, message: String },
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

/// Runs one command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Brute(args) => cmd_brute(&args),
        Command::Bench(args) => cmd_bench(&args),
        Command::Export(args) => cmd_export(&args).map(|()| EXIT_OK),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn load(source: &Source) -> Result<(String, DecPomdp), CliError> {
    match (&source.model, &source.problem) {
        (Some(path), None) => {
            let text = fs::read_to_string(path).map_err(io_error(path))?;
            let model =
                parse_model(&text).map_err(|source| CliError::Parse { path: path.display().to_string(), source })?;
            let name = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into());
            Ok((name, model))
        }
        (None, Some(name)) => Ok((name.clone(), builtin(name)?)),
        _ => Err(CliError::Usage("give exactly one of --model and --problem".into())),
    }
}

/// Settings shared by `solve` and `bench` runs.
struct SearchSetup<'a> {
    kind: HeuristicKind,
    weight: f64,
    budgets: &'a Budgets,
    timing: bool,
    anytime: bool,
}

/// Builds the table and searches. A budget that runs out, in the search or
/// in a recursive subsearch, gives a non-proven report rather than an error.
fn search_report(
    model: &DecPomdp,
    name: &str,
    horizon: usize,
    setup: &SearchSetup,
) -> Result<(RunReport, Option<PolicyVector>), CliError> {
    let mut report = RunReport::new("solve", name, horizon, &setup.kind.to_string(), setup.weight);
    let start = Instant::now();
    let time_budget = match setup.budgets.time_budget {
        Some(s) if !(s.is_finite() && s >= 0.0) => {
            return Err(CliError::Usage(format!("time budget {s} must be a nonnegative number of seconds")));
        }
        Some(s) => Some(Duration::from_secs_f64(s)),
        None => None,
    };
    let table = match setup.kind {
        HeuristicKind::Mdp => mdp_values(model, horizon),
        HeuristicKind::Recursive => match recursive_values(model, horizon, Some(setup.budgets.node_budget)) {
            Ok(table) => table,
            Err(HeuristicError::SubsearchUnfinished { state, horizon: k }) => {
                eprintln!("budget exhausted while building the recursive table (state {state}, horizon {k})");
                if setup.timing {
                    report.wall_time_s = Some(start.elapsed().as_secs_f64());
                }
                return Ok((report, None));
            }
            Err(e) => return Err(e.into()),
        },
        HeuristicKind::External => return Err(CliError::Usage("external tables cannot be built here".into())),
    };
    let options = Options {
        horizon,
        weight: setup.weight,
        node_budget: Some(setup.budgets.node_budget),
        time_budget: time_budget.map(|t| t.saturating_sub(start.elapsed())),
        prune: true,
    };
    let stream = |imp: &crate::search::Improvement| {
        if setup.anytime {
            println!("{:.6},{}", (start.elapsed()).as_secs_f64(), imp.value);
        }
    };
    let result = if setup.weight < 1.0 {
        anytime_run(model, &options, &table, stream)?
    } else {
        maa_star_with(model, &options, &table, stream)?
    };
    report.value = result.value;
    report.proven_optimal = result.proven_optimal;
    report.evaluated_count = result.stats.evaluated_count;
    report.subsearch_evaluated = result.stats.subsearch_evaluated;
    report.max_open_size = result.stats.max_open_size;
    report.trace = format_trace(&result.stats.incumbent_trace, setup.timing);
    if setup.timing {
        report.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    Ok((report, result.vector))
}

fn print_report(r: &RunReport) {
    let wall = r.wall_time_s.map_or_else(|| "-".to_string(), |t| format!("{t:.3} s"));
    println!("problem      {}", r.problem);
    println!("horizon      {}", r.horizon);
    println!("heuristic    {}", r.heuristic);
    println!("weight       {}", r.weight);
    println!("value        {}", format_value(r.value));
    println!("optimal      {}", if r.proven_optimal { "proven" } else { "not proven (budget exhausted)" });
    println!("evaluated    {}", r.evaluated_count);
    println!("subsearch    {}", r.subsearch_evaluated);
    println!("max open     {}", r.max_open_size);
    println!("wall time    {wall}");
}

fn format_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.2}")
    } else {
        "none".into()
    }
}

fn write_csv(path: &Option<PathBuf>, reports: &[RunReport]) -> Result<(), CliError> {
    if let Some(path) = path {
        save_reports(path, reports)?;
    }
    Ok(())
}

fn cmd_solve(args: &SolveArgs) -> Result<i32, CliError> {
    let (name, model) = load(&args.source)?;
    let setup = SearchSetup {
        kind: args.heuristic,
        weight: args.weight,
        budgets: &args.budgets,
        timing: !args.no_timing,
        anytime: args.anytime,
    };
    let (report, vector) = search_report(&model, &name, args.horizon as usize, &setup)?;
    print_report(&report);
    write_csv(&args.csv, std::slice::from_ref(&report))?;
    if let Some(vector) = &vector {
        if let Some(path) = &args.save_policy {
            save_policy(path, &model, &name, vector, report.value)?;
        }
        if let Some(dir) = &args.dot_dir {
            write_dot_files(dir, &saved_policy(&model, &name, vector, report.value))?;
        }
    }
    Ok(if report.proven_optimal { EXIT_OK } else { EXIT_BUDGET })
}

fn cmd_brute(args: &BruteArgs) -> Result<i32, CliError> {
    let (name, model) = load(&args.source)?;
    let horizon = args.horizon as usize;
    let start = Instant::now();
    let result = brute_force_capped(&model, horizon, args.cap)?;
    let mut report = RunReport::new("brute", &name, horizon, "none", 1.0);
    report.value = result.value;
    report.proven_optimal = true;
    report.evaluated_count = result.enumerated_count;
    if !args.no_timing {
        report.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    print_report(&report);
    write_csv(&args.csv, std::slice::from_ref(&report))?;
    if let Some(path) = &args.save_policy {
        save_policy(path, &model, &name, &result.vector, result.value)?;
    }
    Ok(EXIT_OK)
}

fn cmd_bench(args: &BenchArgs) -> Result<i32, CliError> {
    let mut models = Vec::new();
    for name in &args.problem {
        models.push((name.as_str(), builtin(name)?));
    }
    let mut reports = Vec::new();
    if args.compare_paper {
        println!(
            "{:<8} {:>2} {:<9} {:>8} {:>12} {:>10} {:>8} {:>8} {:>12} {:>8}  status",
            "problem", "T", "heuristic", "value", "evaluated", "max open", "time s", "pub", "pub eval", "pub open"
        );
    } else {
        println!(
            "{:<8} {:>2} {:<9} {:>8} {:>12} {:>10} {:>8}  status",
            "problem", "T", "heuristic", "value", "evaluated", "max open", "time s"
        );
    }
    let mut code = EXIT_OK;
    for (name, model) in &models {
        for &horizon in &args.horizons {
            for &kind in &args.heuristic {
                let setup = SearchSetup {
                    kind,
                    weight: args.weight,
                    budgets: &args.budgets,
                    timing: !args.no_timing,
                    anytime: false,
                };
                let (mut report, _) = search_report(model, name, horizon as usize, &setup)?;
                report.command = "bench".into();
                let mut status = if report.proven_optimal { "ok" } else { "budget exhausted" }.to_string();
                if !report.proven_optimal && code == EXIT_OK {
                    code = EXIT_BUDGET;
                }
                let time = report.wall_time_s.map_or_else(|| "-".to_string(), |t| format!("{t:.3}"));
                let mut line = format!(
                    "{:<8} {:>2} {:<9} {:>8} {:>12} {:>10} {:>8}",
                    report.problem,
                    report.horizon,
                    report.heuristic,
                    format_value(report.value),
                    report.evaluated_count,
                    report.max_open_size,
                    time
                );
                if args.compare_paper {
                    if let Some(row) = published::lookup(name, kind, horizon as usize) {
                        let matches = published::value_matches(row.value, report.value);
                        report.published_value = Some(row.value);
                        report.published_evaluated = Some(row.evaluated);
                        report.published_max_open = Some(row.max_open);
                        report.published_match = Some(matches);
                        write!(line, " {:>8.2} {:>12} {:>8}", row.value, row.evaluated, row.max_open).ok();
                        if !matches {
                            status = "VALUE MISMATCH".into();
                            code = EXIT_MISMATCH;
                        }
                    } else {
                        write!(line, " {:>8} {:>12} {:>8}", "-", "-", "-").ok();
                    }
                }
                println!("{line}  {status}");
                reports.push(report);
            }
        }
    }
    write_csv(&args.csv, &reports)?;
    Ok(code)
}

/// Policy file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedPolicy {
    pub format: String,
    pub problem: String,
    pub horizon: usize,
    pub value: f64,
    pub agents: Vec<SavedTree>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedTree {
    pub actions: Vec<String>,
    pub observations: Vec<String>,
    /// Level-ordered action indices.
    pub nodes: Vec<usize>,
}

pub fn saved_policy(model: &DecPomdp, name: &str, vector: &PolicyVector, value: f64) -> SavedPolicy {
    SavedPolicy {
        format: POLICY_FORMAT.into(),
        problem: name.into(),
        horizon: vector.depth(),
        value,
        agents: vector
            .trees()
            .iter()
            .enumerate()
            .map(|(i, t)| SavedTree {
                actions: model.actions(i).to_vec(),
                observations: model.observations(i).to_vec(),
                nodes: t.nodes().to_vec(),
            })
            .collect(),
    }
}

fn save_policy(path: &Path, model: &DecPomdp, name: &str, vector: &PolicyVector, value: f64) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(&saved_policy(model, name, vector, value)).expect("policy serializes");
    fs::write(path, json + "\n").map_err(io_error(path))
}

impl SavedPolicy {
    /// Rebuilds the trees, checking their shape against the stored names.
    pub fn trees(&self) -> Result<Vec<PolicyTree>, String> {
        self.agents
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let k = a.observations.len();
                if k == 0 || a.actions.is_empty() {
                    return Err(format!("agent {i} has no actions or observations"));
                }
                if a.nodes.len() != tree_node_count(k, self.horizon) {
                    return Err(format!("agent {i} has {} nodes, expected a depth-{} tree", a.nodes.len(), self.horizon));
                }
                if let Some(&bad) = a.nodes.iter().find(|&&n| n >= a.actions.len()) {
                    return Err(format!("agent {i} uses action index {bad} of {}", a.actions.len()));
                }
                Ok(PolicyTree::from_nodes_unchecked(i, k, self.horizon, a.nodes.clone()))
            })
            .collect()
    }
}

fn write_dot_files(dir: &Path, policy: &SavedPolicy) -> Result<Vec<PathBuf>, CliError> {
    let trees = policy.trees().map_err(|message| CliError::Policy { path: dir.display().to_string(), message })?;
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let mut written = Vec::new();
    for (i, (tree, names)) in trees.iter().zip(&policy.agents).enumerate() {
        let path = dir.join(format!("agent_{i}.dot"));
        let dot = tree.to_dot(&format!("{} agent {i}", policy.problem), &names.actions, &names.observations);
        fs::write(&path, dot).map_err(io_error(&path))?;
        written.push(path);
    }
    Ok(written)
}

fn cmd_export(args: &ExportArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.policy).map_err(io_error(&args.policy))?;
    let policy: SavedPolicy = serde_json::from_str(&text)
        .map_err(|e| CliError::Policy { path: args.policy.display().to_string(), message: e.to_string() })?;
    if policy.format != POLICY_FORMAT {
        return Err(CliError::Policy {
            path: args.policy.display().to_string(),
            message: format!("unknown policy format `{}`", policy.format),
        });
    }
    for path in write_dot_files(&args.out_dir, &policy)? {
        println!("{}", path.display());
    }
    Ok(())
}
