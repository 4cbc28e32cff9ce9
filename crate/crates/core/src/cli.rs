//! Command-line front end and experiment harness.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use crate::engine::{solve_with_schedule, Mode, SolveConfig, SolveTrace};
use crate::error::ParseError;
use crate::generate::{gen_complete, gen_potts_grid, sparsify};
use crate::io::{merged_csv, parse_model, serialize_model, trace_csv, Summary};
use crate::model::GraphicalModel;
use crate::schedule::{compute_schedule, schedule_stats, POOL_ORDER};
use crate::updates::Rule;
use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

/// Default sparsification fractions for `ablate`.
pub const DEFAULT_FRACTIONS: [f64; 8] = [1.0, 0.8, 0.6, 0.4, 0.2, 0.1, 0.05, 0.01];

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "error: {m}"),
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "seq" | "sequential" => Ok(Mode::Sequential),
            "par" | "parallel" => Ok(Mode::Parallel),
            other => Err(format!("unknown mode '{other}' (expected seq or par)")),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "minsum", version, about = "Dual block-coordinate ascent for pairwise MAP inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one model and write its trace and summary.
    Solve(SolveArgs),
    /// Run several rules from the same start and schedule.
    Compare(CompareArgs),
    /// Sparsify a model at several fractions and compare rules on each.
    Ablate(AblateArgs),
    /// Write a synthetic model file.
    Generate {
        #[command(subcommand)]
        kind: GenerateKind,
    },
    /// Validate a model file.
    Check {
        #[arg(long)]
        model: PathBuf,
    },
    /// Print edge schedule statistics as JSON.
    Schedule {
        #[arg(long)]
        model: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
struct SolverOpts {
    /// seq or par
    #[arg(long, default_value = "seq")]
    mode: Mode,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Cap on normalized iterations (oracle calls / |E|).
    #[arg(long = "max-iters", default_value_t = 1000.0)]
    max_iters: f64,
    /// Relative dual improvement per iteration below which solving stops.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Normalized iterations between checkpoints (0: every iteration).
    #[arg(long = "checkpoint-every", default_value_t = 0.0)]
    checkpoint_every: f64,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    model: PathBuf,
    /// u (uniform), m (MPLP) or h (MPLP++)
    #[arg(long, default_value = "h")]
    rule: Rule,
    #[command(flatten)]
    opts: SolverOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "u,m,h")]
    rules: Vec<String>,
    #[command(flatten)]
    opts: SolverOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1.0,0.8,0.6,0.4,0.2,0.1,0.05,0.01")]
    fractions: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "m,h")]
    rules: Vec<String>,
    #[command(flatten)]
    opts: SolverOpts,
    /// Seed of the edge shuffle.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum GenerateKind {
    /// Complete graph with uniform [0,1) costs.
    Complete {
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        labels: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep this fraction of edges (seeded shuffle with the same seed).
        #[arg(long)]
        keep: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// 4-connected grid with Potts pairwise costs.
    Grid {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long)]
        labels: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Solve(a) => cmd_solve(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Generate { kind } => cmd_generate(kind),
        Command::Check { model } => {
            let m = load_model(&model)?;
            println!(
                "ok: {} nodes, {} edges, max labels {}",
                m.num_nodes(),
                m.num_edges(),
                m.label_counts().iter().max().unwrap_or(&0)
            );
            Ok(())
        }
        Command::Schedule { model } => {
            let m = load_model(&model)?;
            let stats = schedule_stats(&compute_schedule(&m));
            let mut value = serde_json::to_value(&stats).expect("serializable");
            value["pool_order"] = POOL_ORDER.into();
            println!("{value}");
            Ok(())
        }
    }
}

pub fn load_model(path: &Path) -> Result<GraphicalModel, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    parse_model(&text).map_err(|ParseError { line, message }| {
        CliError::Data(if line == 0 {
            format!("{}: {message}", path.display())
        } else {
            format!("{}:{line}: {message}", path.display())
        })
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn to_json(summary: &Summary) -> String {
    serde_json::to_string_pretty(summary).expect("serializable") + "\n"
}

fn solve_config(rule: Rule, opts: &SolverOpts, seed: u64) -> Result<SolveConfig, CliError> {
    if opts.mode == Mode::Sequential && opts.workers != 1 {
        return Err(CliError::Usage("--workers requires --mode par".into()));
    }
    let config = SolveConfig {
        rule,
        mode: opts.mode,
        num_workers: opts.workers,
        max_normalized_iterations: opts.max_iters,
        rel_improvement_threshold: opts.tol,
        checkpoint_every: opts.checkpoint_every,
        seed,
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

fn parse_rules(raw: &[String]) -> Result<Vec<Rule>, CliError> {
    let rules = raw
        .iter()
        .filter(|r| !r.trim().is_empty())
        .map(|r| r.parse::<Rule>().map_err(CliError::Usage))
        .collect::<Result<Vec<_>, _>>()?;
    if rules.is_empty() {
        return Err(CliError::Usage("--rules must name at least one rule".into()));
    }
    let mut seen = Vec::new();
    for r in &rules {
        if seen.contains(r) {
            return Err(CliError::Usage(format!("rule '{r}' listed twice")));
        }
        seen.push(*r);
    }
    Ok(rules)
}

fn cmd_solve(a: SolveArgs) -> Result<(), CliError> {
    let config = solve_config(a.rule, &a.opts, a.seed)?;
    let model = load_model(&a.model)?;
    let schedule = compute_schedule(&model);
    let stats = schedule_stats(&schedule);
    let trace = solve_with_schedule(&model, &schedule, &config).map_err(|e| CliError::Usage(e.to_string()))?;
    let summary = Summary::new(&trace, a.rule, a.opts.mode, a.opts.workers, a.seed, &stats);
    if let Some(path) = &a.trace {
        write_file(path, &trace_csv(&trace.checkpoints))?;
    }
    if let Some(path) = &a.summary {
        write_file(path, &to_json(&summary))?;
    }
    print!("{}", to_json(&summary));
    Ok(())
}

/// Runs every rule on `model` from the same initial state and schedule and
/// writes `trace_<rule>.csv`, `summary_<rule>.json` and `merged.csv` to `out`.
pub fn compare_rules(
    model: &GraphicalModel,
    rules: &[Rule],
    base: &SolveConfig,
    out: &Path,
) -> Result<Vec<(Rule, SolveTrace)>, CliError> {
    let schedule = compute_schedule(model);
    let stats = schedule_stats(&schedule);
    let mut results = Vec::with_capacity(rules.len());
    for &rule in rules {
        let config = SolveConfig { rule, ..base.clone() };
        let trace = solve_with_schedule(model, &schedule, &config).map_err(|e| CliError::Usage(e.to_string()))?;
        write_file(&out.join(format!("trace_{rule}.csv")), &trace_csv(&trace.checkpoints))?;
        let summary = Summary::new(&trace, rule, config.mode, config.num_workers, config.seed, &stats);
        write_file(&out.join(format!("summary_{rule}.json")), &to_json(&summary))?;
        results.push((rule, trace));
    }
    let merged: Vec<_> = results.iter().map(|(r, t)| (*r, t.checkpoints.as_slice())).collect();
    write_file(&out.join("merged.csv"), &merged_csv(&merged))?;
    Ok(results)
}

fn cmd_compare(a: CompareArgs) -> Result<(), CliError> {
    let rules = parse_rules(&a.rules)?;
    let base = solve_config(rules[0], &a.opts, a.seed)?;
    let model = load_model(&a.model)?;
    for (rule, t) in compare_rules(&model, &rules, &base, &a.out)? {
        println!("{rule}: final_dual={} final_energy={} iterations={}", t.final_dual, t.final_energy, t.iterations);
    }
    Ok(())
}

/// Directory name used by `ablate` for one fraction.
pub fn fraction_dir(fraction: f64) -> String {
    format!("keep_{fraction}")
}

fn cmd_ablate(a: AblateArgs) -> Result<(), CliError> {
    let rules = parse_rules(&a.rules)?;
    if a.fractions.is_empty() {
        return Err(CliError::Usage("--fractions must not be empty".into()));
    }
    if let Some(f) = a.fractions.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
        return Err(CliError::Usage(format!("fraction {f} outside (0, 1]")));
    }
    let base = solve_config(rules[0], &a.opts, a.seed)?;
    let model = load_model(&a.model)?;
    let mut table = String::from("fraction,edges,rule,final_dual,final_energy,normalized_iterations\n");
    for &fraction in &a.fractions {
        let sub = sparsify(&model, fraction, a.seed);
        let dir = a.out.join(fraction_dir(fraction));
        for (rule, t) in compare_rules(&sub, &rules, &base, &dir)? {
            let last = t.checkpoints.last().expect("trace has checkpoints");
            table.push_str(&format!(
                "{fraction},{},{rule},{},{},{}\n",
                sub.num_edges(),
                t.final_dual,
                t.final_energy,
                last.normalized_iterations
            ));
        }
    }
    write_file(&a.out.join("ablation.csv"), &table)?;
    print!("{table}");
    Ok(())
}

fn cmd_generate(kind: GenerateKind) -> Result<(), CliError> {
    let (model, out) = match kind {
        GenerateKind::Complete { nodes, labels, seed, keep, out } => {
            if nodes == 0 || labels == 0 {
                return Err(CliError::Usage("--nodes and --labels must be positive".into()));
            }
            let mut m = gen_complete(nodes, labels, seed);
            if let Some(f) = keep {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(CliError::Usage(format!("--keep {f} outside (0, 1]")));
                }
                m = sparsify(&m, f, seed);
            }
            (m, out)
        }
        GenerateKind::Grid { rows, cols, labels, lambda, seed, out } => {
            if rows * cols == 0 || labels == 0 {
                return Err(CliError::Usage("--rows, --cols and --labels must be positive".into()));
            }
            if !lambda.is_finite() {
                return Err(CliError::Usage("--lambda must be finite".into()));
            }
            (gen_potts_grid(rows, cols, labels, lambda, seed), out)
        }
    };
    write_file(&out, &serialize_model(&model))
}
