//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on invalid input or configuration, 2 when
//! `verify` finds a solver/oracle mismatch. Logging goes to stderr and is
//! controlled by the `SPOTAR_LOG` environment variable (default `warn`).

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::bench::{aggregate, city_grid, emit_csv, run_bench, BenchConfig, BenchError, ALT_BUDGETS};
use crate::dist::Time;
use crate::heuristic::HeuristicKind;
use crate::network::{Network, NetworkError, Query};
use crate::oracle::{check_case, gen_case, MethodCheck, OracleError};
use crate::solver::{solve_with, SolveOptions};
use crate::weights::{
    build_store, load_trajectories, trajectories_to_csv, CostModel, ModelMode, StoreConfig, WeightStore, WeightsError,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_MISMATCH: u8 = 2;

/// Probability agreement required by `verify`.
pub const VERIFY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "spotar", version, about = "Most reliable routes under uncertain, correlated travel times")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Instantiate a weight store from trajectories.
    Build(BuildArgs),
    /// Find the path most likely to arrive within a budget.
    Query(QueryArgs),
    /// Run a benchmark configuration and write per-query CSV rows.
    Bench(BenchArgs),
    /// Cross-check the solver against exhaustive enumeration.
    Verify(VerifyArgs),
    /// Write a synthetic city grid and trajectory corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub trajectories: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub min_support: u64,
    #[arg(long, default_value_t = 8)]
    pub max_unit_len: usize,
    /// Time grid step; trajectory times are rounded to it.
    #[arg(long, default_value_t = 1)]
    pub resolution: Time,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub from: String,
    #[arg(long)]
    pub to: String,
    #[arg(long)]
    pub budget: Time,
    #[arg(long, default_value = "pace")]
    pub model: ModelMode,
    #[arg(long, default_value = "sp")]
    pub heuristic: HeuristicKind,
    /// Print the travel-time distribution of the returned path.
    #[arg(long)]
    pub dump_dist: bool,
    /// Write the explored edges as CSV with endpoint coordinates.
    #[arg(long)]
    pub explored_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Replace the config's budgets with the 400/600/800/1000 series.
    #[arg(long)]
    pub alt_budgets: bool,
    /// Override the config's per-solve label cap.
    #[arg(long)]
    pub max_labels: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 30)]
    pub instances: u64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(4..=12))]
    pub max_nodes: u64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Nodes per grid side.
    #[arg(long, default_value_t = 32)]
    pub side: usize,
    #[arg(long, default_value_t = 130.0)]
    pub spacing_m: f64,
    /// Share of 2-3 edge sub-paths given correlated traversals.
    #[arg(long, default_value_t = 0.1)]
    pub joint_fraction: f64,
    #[arg(long)]
    pub out_network: PathBuf,
    #[arg(long)]
    pub out_trajectories: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Network { path: PathBuf, source: NetworkError },
    #[error("{}: {source}", path.display())]
    Weights { path: PathBuf, source: WeightsError },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0} solver/oracle mismatches")]
    Mismatch(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Mismatch(_) => EXIT_MISMATCH,
            _ => EXIT_INVALID,
        }
    }
}

/// Parses `args` (program name first) and runs the command, writing normal
/// output to `out` and diagnostics to `err`. Returns the exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Build(a) => cmd_build(a, out, err),
        Command::Query(a) => cmd_query(a, out),
        Command::Bench(a) => cmd_bench(a, out),
        Command::Verify(a) => cmd_verify(a, out, err),
        Command::Synth(a) => cmd_synth(a, out),
    }
}

fn load_network(path: &PathBuf) -> Result<Network, CliError> {
    Network::load(path).map_err(|source| CliError::Network { path: path.clone(), source })
}

fn load_store(net: &Network, path: &PathBuf) -> Result<WeightStore, CliError> {
    WeightStore::load(net, path).map_err(|source| CliError::Weights { path: path.clone(), source })
}

fn stdout_err(source: std::io::Error) -> CliError {
    CliError::Io { path: PathBuf::from("<stdout>"), source }
}

fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn cmd_build(a: BuildArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let net = load_network(&a.network)?;
    let trajs = load_trajectories(&net, &a.trajectories, a.resolution)
        .map_err(|source| CliError::Weights { path: a.trajectories.clone(), source })?;
    if trajs.is_empty() {
        let _ = writeln!(
            err,
            "warning: {} holds no trajectories; every edge uses its free-flow time",
            a.trajectories.display()
        );
    }
    let cfg = StoreConfig { min_support: a.min_support, max_unit_len: a.max_unit_len, resolution: a.resolution };
    let store =
        build_store(&net, &trajs, cfg).map_err(|source| CliError::Weights { path: a.trajectories.clone(), source })?;
    store.save(&net, &a.out).map_err(|source| CliError::Weights { path: a.out.clone(), source })?;
    let s = store.summary();
    writeln!(
        out,
        "edges measured={} fallback={} path weights={} -> {}",
        s.measured_edges,
        s.fallback_edges,
        s.path_weights,
        a.out.display()
    )
    .map_err(stdout_err)?;
    Ok(())
}

fn cmd_query(a: QueryArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let net = load_network(&a.network)?;
    let store = load_store(&net, &a.store)?;
    let q = Query::by_ids(&net, &a.from, &a.to, a.budget).map_err(|e| CliError::Usage(e.to_string()))?;
    if !a.budget.is_multiple_of(store.resolution()) {
        return Err(CliError::Usage(format!(
            "budget {} is not a multiple of the store resolution {}",
            a.budget,
            store.resolution()
        )));
    }
    let model = CostModel::new(&net, &store, a.model);
    let res = solve_with(&model, a.heuristic, q, SolveOptions::default());
    match &res.best_path {
        Some(p) => writeln!(out, "{} p={:.2}", p.display(&net), res.probability),
        None => writeln!(out, "NONE p=0"),
    }
    .map_err(stdout_err)?;
    writeln!(
        out,
        "probability={} explored_edges={} expanded_labels={} wall_time_s={:.6}",
        res.probability, res.explored_edges, res.expanded_labels, res.wall_time_s
    )
    .map_err(stdout_err)?;
    if a.dump_dist {
        if let Some(cost) = &res.cost {
            out.write_all(cost.to_debug_string().as_bytes()).map_err(stdout_err)?;
        }
    }
    if let Some(path) = &a.explored_out {
        let mut csv = String::from("edge,from,to,from_lat,from_lon,to_lat,to_lon\n");
        for &e in &res.explored {
            let edge = net.edge(e);
            let (f, t) = (net.node(edge.from), net.node(edge.to));
            csv.push_str(&format!("{},{},{},{},{},{},{}\n", edge.id, f.id, t.id, f.lat, f.lon, t.lat, t.lon));
        }
        std::fs::write(path, csv).map_err(io(path))?;
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let net = load_network(&a.network)?;
    let store = load_store(&net, &a.store)?;
    let text = std::fs::read_to_string(&a.config).map_err(io(&a.config))?;
    let mut cfg = BenchConfig::parse(&text)?;
    if a.alt_budgets {
        cfg.budgets = ALT_BUDGETS.to_vec();
    }
    if a.max_labels.is_some() {
        cfg.max_labels = a.max_labels;
    }
    let rows = run_bench(&net, &store, &cfg)?;
    let agg_path = emit_csv(&rows, &a.out)?;
    writeln!(out, "{} rows -> {}, aggregates -> {}", rows.len(), a.out.display(), agg_path.display())
        .map_err(stdout_err)?;
    writeln!(
        out,
        "{:<8} {:>6} {:>9} {:>7} {:>10} {:>8} {:>12} {:>14}",
        "method", "budget", "km", "queries", "incomplete", "mean_p", "mean_time_s", "mean_explored"
    )
    .map_err(stdout_err)?;
    for c in aggregate(&rows) {
        writeln!(
            out,
            "{:<8} {:>6} {:>4}-{:<4} {:>7} {:>10} {:>8.4} {:>12.6} {:>14.1}",
            c.method.to_string(),
            c.budget,
            c.bucket_lo,
            c.bucket_hi,
            c.queries,
            c.incomplete,
            c.mean_probability,
            c.mean_wall_time_s,
            c.mean_explored_edges
        )
        .map_err(stdout_err)?;
    }
    Ok(())
}

fn cmd_verify(a: VerifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    if a.instances == 0 {
        let _ = writeln!(err, "warning: no instances requested; nothing verified");
        return Ok(());
    }
    writeln!(
        out,
        "{:>20} {:>5} {:>5}  {:<28} {:<28} {:<28} {:<28}",
        "seed", "nodes", "edges", "PACE/SP", "PACE/BA", "EDGE/SP", "EDGE/BA"
    )
    .map_err(stdout_err)?;
    let mut mismatches = 0;
    for i in 0..a.instances {
        let seed = a.seed.wrapping_add(i);
        let case = gen_case(seed, a.max_nodes as usize);
        let checks = check_case(&case)?;
        let cells: Vec<String> = checks.iter().map(verdict).collect();
        mismatches += checks.iter().filter(|c| !c.passes(VERIFY_TOLERANCE)).count();
        writeln!(
            out,
            "{seed:>20} {:>5} {:>5}  {:<28} {:<28} {:<28} {:<28}",
            case.instance.net.node_count(),
            case.instance.net.edge_count(),
            cells[0],
            cells[1],
            cells[2],
            cells[3]
        )
        .map_err(stdout_err)?;
    }
    writeln!(out, "{} instances, {} runs, {mismatches} mismatches", a.instances, a.instances * 4)
        .map_err(stdout_err)?;
    if mismatches > 0 {
        return Err(CliError::Mismatch(mismatches));
    }
    Ok(())
}

/// `pass p=...` or `FAIL solver=... oracle=...` for one method run.
pub fn verdict(c: &MethodCheck) -> String {
    if c.passes(VERIFY_TOLERANCE) {
        format!("pass p={:.6}", c.oracle_probability)
    } else {
        format!("FAIL solver={:.6} oracle={:.6}", c.solver_probability, c.oracle_probability)
    }
}

fn cmd_synth(a: SynthArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.side < 2 {
        return Err(CliError::Usage("--side must be at least 2".into()));
    }
    if !(0.0..=1.0).contains(&a.joint_fraction) {
        return Err(CliError::Usage("--joint-fraction must lie in [0, 1]".into()));
    }
    let inst = city_grid(a.seed, a.side, a.spacing_m, a.joint_fraction);
    inst.net.save(&a.out_network).map_err(|source| CliError::Network { path: a.out_network.clone(), source })?;
    std::fs::write(&a.out_trajectories, trajectories_to_csv(&inst.net, &inst.trajectories))
        .map_err(io(&a.out_trajectories))?;
    writeln!(
        out,
        "{} nodes, {} edges, {} trajectory groups -> {}, {}",
        inst.net.node_count(),
        inst.net.edge_count(),
        inst.trajectories.len(),
        a.out_network.display(),
        a.out_trajectories.display()
    )
    .map_err(stdout_err)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (u8, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_with(std::iter::once("spotar").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(&["query"]).0, EXIT_INVALID);
        assert_eq!(run(&["frobnicate"]).0, EXIT_INVALID);
        assert_eq!(run(&["verify", "--max-nodes", "40"]).0, EXIT_INVALID);
        assert_eq!(run(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn verify_with_no_instances_warns() {
        let (code, _, err) = run(&["verify", "--instances", "0"]);
        assert_eq!(code, EXIT_OK);
        assert!(err.contains("warning"));
    }

    #[test]
    fn mismatch_is_reported_with_exit_two() {
        let bad = MethodCheck {
            mode: ModelMode::Pace,
            heuristic: HeuristicKind::Sp,
            solver_probability: 0.5,
            oracle_probability: 0.7,
            path_probability: 0.5,
            explored_edges: 3,
        };
        assert_eq!(verdict(&bad), "FAIL solver=0.500000 oracle=0.700000");
        assert_eq!(CliError::Mismatch(1).exit_code(), EXIT_MISMATCH);
    }
}
