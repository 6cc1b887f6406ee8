//! Command-line front end. Strategy indices on the command line and in
//! documents are 1-based; exit codes are 0 (ok), 1 (input), 2 (solver).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::applications::{exclusion_value, welfare_upper_bound, Verdict};
use crate::backend::SolverConfig;
use crate::error::Error;
use crate::game::{random_game, BimatrixGame, GameKind};
use crate::heuristics::{solve_nash, IterationRecord, Method, NashResult, RunConfig, Termination};
use crate::moment::StrategySet;
use crate::oracle::support_enumeration;
use crate::recovery::RecoveryCase;

pub const SCHEMA_VERSION: u32 = 1;
pub const CSV_HEADER: [&str; 11] =
    ["seed", "m", "n", "method", "iters", "eps", "rank", "lambda2", "bound_rank_k", "bound_diaggap", "solve_ms"];

#[derive(Debug, Parser)]
#[command(name = "nash-sdp", version, about = "Approximate Nash equilibria of bimatrix games via SDP relaxations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute an approximate equilibrium with certified bounds.
    Solve(SolveArgs),
    /// Run a method over seeded random games and summarize ε.
    Bench(BenchArgs),
    /// Upper bound on the welfare of any equilibrium.
    Welfare(GameArgs),
    /// Try to certify that every equilibrium uses one of the given strategies.
    Exclude(ExcludeArgs),
    /// Enumerate equilibria of a small game exactly.
    Oracle(GameArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[arg(long, default_value = "sqrt")]
    pub method: Method,
    #[arg(long, default_value_t = 20)]
    pub iters: usize,
    /// Use the symmetric model (requires B = Aᵀ).
    #[arg(long)]
    pub symmetric: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "sqrt")]
    pub method: Method,
    #[arg(long, default_value_t = 20)]
    pub iters: usize,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Also write the summary as JSON.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Games solved concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct GameArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExcludeArgs {
    #[arg(long)]
    pub game: PathBuf,
    /// Row strategies, 1-based, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub rows: Vec<usize>,
    /// Column strategies, 1-based, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub cols: Vec<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Solver(_) | Error::Numerical(_) => 2,
            _ => 1,
        };
        CliError { code, message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// On-disk game: `{"A": [[..]], "B": [[..]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
}

impl GameFile {
    pub fn from_game(game: &BimatrixGame<f64>) -> Self {
        GameFile { a: game.a().to_rows(), b: game.b().to_rows() }
    }

    pub fn to_game(&self) -> crate::error::Result<BimatrixGame<f64>> {
        BimatrixGame::from_rows(&self.a, &self.b)
    }

    /// sha256 of the compact JSON serialization.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("game serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

pub fn read_game(path: &Path) -> CliResult<(GameFile, BimatrixGame<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let file: GameFile =
        serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: invalid game file: {e}", path.display())))?;
    let game = file.to_game().map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok((file, game))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub l1: f64,
    pub rank_k: f64,
    pub diaggap: f64,
    pub payoff_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub schema_version: u32,
    pub game_digest: String,
    pub method: Method,
    pub effective_method: Method,
    pub game_class: GameKind,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Normalized units.
    pub eps: f64,
    pub eps_a: f64,
    pub eps_b: f64,
    /// Caller's payoff units.
    pub raw_eps_a: f64,
    pub raw_eps_b: f64,
    /// 1-based pure best responses to the returned profile.
    pub best_response_a: usize,
    pub best_response_b: usize,
    pub rank: usize,
    pub eigenvalues: Vec<f64>,
    /// Bounds hold for the last-column profile of the returned solution.
    pub bounds: Bounds,
    pub recovery: Option<RecoveryCase>,
    pub iterations: usize,
    pub termination: Termination,
    pub trace: Vec<IterationRecord<f64>>,
    pub status: String,
    pub wall_time: f64,
}

impl ResultDocument {
    pub fn new(file: &GameFile, r: &NashResult<f64>, wall_time: f64) -> Self {
        let c = &r.certificate;
        ResultDocument {
            schema_version: SCHEMA_VERSION,
            game_digest: file.digest(),
            method: r.method,
            effective_method: r.effective_method,
            game_class: r.class.kind,
            x: r.profile.x().to_vec(),
            y: r.profile.y().to_vec(),
            eps: r.report.eps,
            eps_a: r.report.eps_a,
            eps_b: r.report.eps_b,
            raw_eps_a: r.raw_eps.0,
            raw_eps_b: r.raw_eps.1,
            best_response_a: r.report.best_response_a + 1,
            best_response_b: r.report.best_response_b + 1,
            rank: c.rank,
            eigenvalues: c.eigenvalues.clone(),
            bounds: Bounds { l1: c.l1_bound, rank_k: c.rank_k_bound, diaggap: c.diaggap_bound, payoff_gap: c.payoff_gap_bound },
            recovery: r.recovery,
            iterations: r.trace.iterations.len(),
            termination: r.trace.termination,
            trace: r.trace.iterations.clone(),
            status: r.status.to_string(),
            wall_time,
        }
    }
}

fn run_config(iters: usize, symmetric: bool) -> CliResult<RunConfig> {
    let solver = SolverConfig::from_env()?;
    let cfg = RunConfig { max_iterations: iters, solver, symmetric, ..RunConfig::default() };
    cfg.validate()?;
    Ok(cfg)
}

fn emit<S: Serialize>(doc: &S, out: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(doc).expect("document serializes");
    match out {
        Some(path) => fs::write(path, text + "\n").map_err(|e| CliError::input(format!("{}: {e}", path.display()))),
        None => {
            // A closed pipe is not an error worth reporting.
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            Ok(())
        }
    }
}

pub fn cmd_solve(args: &SolveArgs) -> CliResult<ResultDocument> {
    let (file, game) = read_game(&args.game)?;
    let cfg = run_config(args.iters, args.symmetric)?;
    let start = Instant::now();
    let result = solve_nash(&game, args.method, &cfg)?;
    let doc = ResultDocument::new(&file, &result, start.elapsed().as_secs_f64());
    emit(&doc, args.out.as_deref())?;
    Ok(doc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub seed: u64,
    pub m: usize,
    pub n: usize,
    pub method: Method,
    pub iters: usize,
    pub eps: f64,
    pub rank: usize,
    pub lambda2: f64,
    pub bound_rank_k: f64,
    pub bound_diaggap: f64,
    pub solve_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsSummary {
    pub count: usize,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation (n − 1 denominator; 0 for one value).
    pub stdev: f64,
}

pub fn summarize(values: &[f64]) -> EpsSummary {
    let count = values.len();
    if count == 0 {
        return EpsSummary { count, max: f64::NAN, mean: f64::NAN, median: f64::NAN, stdev: f64::NAN };
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / count as f64;
    let median =
        if count % 2 == 1 { sorted[count / 2] } else { 0.5 * (sorted[count / 2 - 1] + sorted[count / 2]) };
    let stdev = if count > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
    } else {
        0.0
    };
    EpsSummary { count, max: sorted[count - 1], mean, median, stdev }
}

fn bench_one(args: &BenchArgs, cfg: &RunConfig, index: usize) -> CliResult<BenchRow> {
    let seed = args.seed + index as u64;
    let game = random_game::<f64>(args.m, args.n, seed)?;
    let start = Instant::now();
    let r = solve_nash(&game, args.method, cfg)?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let c = &r.certificate;
    Ok(BenchRow {
        seed,
        m: args.m,
        n: args.n,
        method: args.method,
        iters: r.trace.iterations.len(),
        eps: r.report.eps,
        rank: c.rank,
        lambda2: c.eigenvalues.get(1).copied().unwrap_or(0.0),
        bound_rank_k: c.rank_k_bound,
        bound_diaggap: c.diaggap_bound,
        solve_ms: elapsed,
    })
}

pub fn cmd_bench(args: &BenchArgs) -> CliResult<(Vec<BenchRow>, EpsSummary)> {
    if args.m == 0 || args.n == 0 || args.count == 0 || args.jobs == 0 {
        return Err(CliError::input("--m, --n, --count and --jobs must be positive"));
    }
    let cfg = run_config(args.iters, false)?;
    // Open the CSV first so an unwritable path fails before any solve.
    let mut writer = match &args.csv {
        Some(path) => Some(csv::Writer::from_path(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?),
        None => None,
    };
    let rows: Vec<CliResult<BenchRow>> = if args.jobs == 1 {
        (0..args.count).map(|k| bench_one(args, &cfg, k)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs)
            .build()
            .map_err(|e| CliError::input(format!("thread pool: {e}")))?;
        pool.install(|| (0..args.count).into_par_iter().map(|k| bench_one(args, &cfg, k)).collect())
    };
    let rows = rows.into_iter().collect::<CliResult<Vec<_>>>()?;
    if let Some(w) = writer.as_mut() {
        // serde's header comes from the field names, which equal CSV_HEADER.
        for row in &rows {
            w.serialize(row).map_err(|e| CliError::input(format!("csv: {e}")))?;
        }
        w.flush().map_err(|e| CliError::input(format!("csv: {e}")))?;
    }
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let summary = summarize(&eps);
    if let Some(path) = &args.summary {
        emit(&summary, Some(path))?;
    }
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{} {}x{}, {} games, {} iterations", args.method, args.m, args.n, summary.count, args.iters);
    let _ = writeln!(out, "max & mean & median & stdev");
    let _ = writeln!(out, "{:.4} & {:.4} & {:.4} & {:.4}", summary.max, summary.mean, summary.median, summary.stdev);
    Ok((rows, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareDocument {
    pub schema_version: u32,
    pub game_digest: String,
    /// Upper bound on xᵀ(A+B)y over all equilibria, in the file's units.
    pub value: f64,
    pub status: String,
}

pub fn cmd_welfare(args: &GameArgs) -> CliResult<WelfareDocument> {
    let (file, game) = read_game(&args.game)?;
    let bound = welfare_upper_bound(&game, &SolverConfig::from_env()?)?;
    let status = bound.solution.status.map(|s| s.to_string()).unwrap_or_default();
    let doc = WelfareDocument { schema_version: SCHEMA_VERSION, game_digest: file.digest(), value: bound.value, status };
    emit(&doc, args.out.as_deref())?;
    Ok(doc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionDocument {
    pub schema_version: u32,
    pub game_digest: String,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    /// Minimum mass the relaxation puts on the set.
    pub value: f64,
    pub verdict: Verdict,
}

fn zero_based(list: &[usize], what: &str) -> CliResult<Vec<usize>> {
    list.iter()
        .map(|&i| i.checked_sub(1).ok_or_else(|| CliError::input(format!("{what} indices are 1-based"))))
        .collect()
}

pub fn cmd_exclude(args: &ExcludeArgs) -> CliResult<ExclusionDocument> {
    let (file, game) = read_game(&args.game)?;
    let set = StrategySet::new(zero_based(&args.rows, "row")?, zero_based(&args.cols, "column")?);
    let r = exclusion_value(&game, &set, &SolverConfig::from_env()?)?;
    let doc = ExclusionDocument {
        schema_version: SCHEMA_VERSION,
        game_digest: file.digest(),
        rows: set.rows.iter().map(|i| i + 1).collect(),
        cols: set.cols.iter().map(|j| j + 1).collect(),
        value: r.value,
        verdict: r.verdict,
    };
    emit(&doc, args.out.as_deref())?;
    Ok(doc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumEntry {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub payoff_a: f64,
    pub payoff_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleDocument {
    pub schema_version: u32,
    pub game_digest: String,
    pub count: usize,
    pub equilibria: Vec<EquilibriumEntry>,
    /// The enumeration may be incomplete.
    pub degenerate: bool,
}

pub fn cmd_oracle(args: &GameArgs) -> CliResult<OracleDocument> {
    let (file, game) = read_game(&args.game)?;
    let set = support_enumeration(&game, None)?;
    let equilibria = set
        .equilibria
        .iter()
        .map(|p| {
            let (pa, pb) = game.payoffs(p)?;
            Ok(EquilibriumEntry { x: p.x().to_vec(), y: p.y().to_vec(), payoff_a: pa, payoff_b: pb })
        })
        .collect::<crate::error::Result<Vec<_>>>()?;
    let doc = OracleDocument {
        schema_version: SCHEMA_VERSION,
        game_digest: file.digest(),
        count: equilibria.len(),
        equilibria,
        degenerate: set.degenerate,
    };
    emit(&doc, args.out.as_deref())?;
    Ok(doc)
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Solve(a) => cmd_solve(a).map(drop),
        Command::Bench(a) => cmd_bench(a).map(drop),
        Command::Welfare(a) => cmd_welfare(a).map(drop),
        Command::Exclude(a) => cmd_exclude(a).map(drop),
        Command::Oracle(a) => cmd_oracle(a).map(drop),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
