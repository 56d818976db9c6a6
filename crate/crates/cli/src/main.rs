//! `jumpdensity`: simulate jump processes on weighted graphs, extract path
//! statistics, evaluate joint densities and run Monte Carlo checks.
//!
//! Exit status is 0 on success, 1 when a verification fails and 2 on
//! configuration or input errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use jumpdensity::density::{prop1_log_density, sum_prop1_over_k, theorem1_log_density, DEFAULT_SERIES_TRUNCATION};
use jumpdensity::io::{CellFile, GraphFile, OutcomeFile, PathRecord, StatsRecord, TargetFile, TreeSpec, WilsonRecord};
use jumpdensity::simulate::simulate_batch;
use jumpdensity::special_fn::{bessel_i, log_bessel_i};
use jumpdensity::trees_cycles::{enumerate_spanning_trees, tree_weight, weighted_tree_sum};
use jumpdensity::verify::{
    verify_marginal_histogram, verify_prop1, verify_ray_knight, verify_theorem1, verify_total_mass, ChiSquareReport,
    CountsTarget, CurrentTarget, LocalTimeCell, VerificationReport, VerifyOptions, DEFAULT_CYCLE_TRUNCATION,
    DEFAULT_QUAD_NODES, DEFAULT_Z_THRESHOLD,
};
use jumpdensity::wilson::{
    loop_cycling_numbers, order_independence_check, tree_law_check, wilson_batch, KilledGraph,
    TREE_LAW_MAX_VERTICES,
};
use jumpdensity::{StoppingRule, WeightedGraph};

/// Largest fraction of histogram bins allowed outside 3 standard errors.
const MAX_FRACTION_OUTSIDE_3SE: f64 = 0.05;

#[derive(Parser)]
#[command(name = "jumpdensity", version, about = "Local times, crossings and last-exit trees of Markov jump processes")]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate paths and write one JSON record per path.
    Simulate(SimulateArgs),
    /// Local times, crossings, current and last-exit tree of each path.
    Stats(StatsArgs),
    /// Evaluate the joint density at an outcome.
    Density(DensityArgs),
    /// Modified Bessel function of the first kind of integer order.
    Bessel(BesselArgs),
    /// Count or list spanning trees oriented toward a root.
    Trees(TreesArgs),
    /// Monte Carlo check of the current/tree density at a fixed horizon.
    #[command(name = "verify-thm1")]
    VerifyThm1(VerifyArgs),
    /// Monte Carlo check of the crossing-count/tree density.
    #[command(name = "verify-prop1")]
    VerifyProp1(VerifyArgs),
    /// Monte Carlo check of the tree local-time density under inverse local time.
    #[command(name = "verify-ray-knight")]
    VerifyRayKnight(VerifyArgs),
    /// Monte Carlo check of the total mass of the joint density.
    #[command(name = "verify-total-mass")]
    VerifyTotalMass(VerifyArgs),
    /// Monte Carlo check of the marginal local-time density over one cell or a list of bins.
    Marginal(VerifyArgs),
    /// Sample Wilson's algorithm with killing and check the forest law.
    Wilson(WilsonArgs),
}

#[derive(Args)]
struct SeedArgs {
    /// Base seed; replica r uses random stream (seed, r).
    #[arg(long, env = "JUMPDENSITY_SEED")]
    seed: u64,
    /// Number of replicas.
    #[arg(short = 'n', long = "n")]
    n: usize,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Start vertex label.
    #[arg(long)]
    start: String,
    /// Fixed horizon.
    #[arg(long, conflicts_with = "inverse_local_time", required_unless_present = "inverse_local_time")]
    sigma: Option<f64>,
    /// Stop when the local time at a vertex reaches u, given as `label:u`.
    #[arg(long)]
    inverse_local_time: Option<String>,
    #[command(flatten)]
    seed: SeedArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Paths file written by `simulate`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum DensityMode {
    /// Bessel form; takes a current or counts.
    Thm1,
    /// Poisson form; takes counts.
    Prop1,
    /// Poisson form summed over counts with the given current.
    Sum,
}

#[derive(Args)]
struct DensityArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    outcome: PathBuf,
    #[arg(long, value_enum, default_value = "thm1")]
    mode: DensityMode,
    /// Largest reverse crossing count per edge in `sum` mode.
    #[arg(long = "M", default_value_t = DEFAULT_SERIES_TRUNCATION)]
    m: u64,
}

#[derive(Args)]
struct BesselArgs {
    #[arg(long, allow_negative_numbers = true)]
    nu: i64,
    #[arg(long)]
    z: f64,
    /// Print ln I_nu(z) instead.
    #[arg(long)]
    log: bool,
}

#[derive(Args)]
struct TreesArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    root: String,
    /// List every spanning tree with its weight.
    #[arg(long, conflicts_with = "count")]
    enumerate: bool,
    /// Only the matrix-tree sum (default).
    #[arg(long)]
    count: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// Local-time cell, or a list of bins for `marginal`. Not used by `verify-total-mass`.
    #[arg(long)]
    cell: Option<PathBuf>,
    #[command(flatten)]
    seed: SeedArgs,
    /// Cycling-number truncation for `verify-total-mass` and `marginal`.
    #[arg(long = "M", default_value_t = DEFAULT_CYCLE_TRUNCATION)]
    m: i64,
    #[arg(long, default_value_t = DEFAULT_Z_THRESHOLD)]
    z_threshold: f64,
    /// Gauss-Legendre nodes per free dimension.
    #[arg(long, default_value_t = DEFAULT_QUAD_NODES)]
    quad_nodes: usize,
    /// Multiplies the theoretical density; set away from 1 to confirm the check can fail.
    #[arg(long, default_value_t = 1.0)]
    density_scale: f64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Append one CSV row per cell to this file, writing a header if it is new.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct WilsonArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Killing rates as `{"label": rate}`; unlisted vertices get zero.
    #[arg(long)]
    kappa: PathBuf,
    /// Comma-separated vertex order.
    #[arg(long)]
    order: String,
    /// Second order for the order-independence test.
    #[arg(long)]
    compare_order: Option<String>,
    #[command(flatten)]
    seed: SeedArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Chi-square p-value threshold.
    #[arg(long, default_value_t = 1e-3)]
    p_threshold: f64,
}

enum CliError {
    Config(String),
    Failed,
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Config(e.to_string())
    }
}

type CliResult = Result<(), CliError>;

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config(format!("{}: {e}", path.display())))
}

fn load_graph(path: &Path) -> Result<WeightedGraph, CliError> {
    Ok(read_json::<GraphFile>(path)?.to_graph()?)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| config(format!("{}: {e}", path.display())))
}

fn write_jsonl<T: Serialize>(path: &Path, records: impl Iterator<Item = T>) -> CliResult {
    let mut w = create(path)?;
    for r in records {
        serde_json::to_writer(&mut w, &r)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> CliResult {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn simulate(a: SimulateArgs) -> CliResult {
    let g = load_graph(&a.graph)?;
    let start = g.vertex(&a.start)?;
    let rule = match (a.sigma, &a.inverse_local_time) {
        (Some(sigma), None) => StoppingRule::FixedTime { sigma },
        (None, Some(spec)) => {
            let (label, u) = spec
                .rsplit_once(':')
                .ok_or_else(|| config(format!("--inverse-local-time expects label:u, got `{spec}`")))?;
            let u: f64 = u.parse().map_err(|_| config(format!("bad local time `{u}`")))?;
            StoppingRule::InverseLocalTime { site: g.vertex(label)?, u }
        }
        _ => return Err(config("give exactly one of --sigma and --inverse-local-time")),
    };
    let paths = simulate_batch(&g, start, rule, a.seed.seed, a.seed.n)?;
    write_jsonl(&a.out, paths.iter().enumerate().map(|(r, p)| PathRecord::from_path(&g, r as u64, p)))
}

fn stats(a: StatsArgs) -> CliResult {
    let g = load_graph(&a.graph)?;
    let file = File::open(&a.input).map_err(|e| config(format!("{}: {e}", a.input.display())))?;
    let mut out = create(&a.out)?;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PathRecord =
            serde_json::from_str(&line).map_err(|e| config(format!("{}:{}: {e}", a.input.display(), lineno + 1)))?;
        let path = rec.to_path(&g)?;
        serde_json::to_writer(&mut out, &StatsRecord::from_path(&g, rec.replica, &path))?;
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct DensityOutput {
    mode: &'static str,
    log_density: f64,
    density: f64,
}

fn density(a: DensityArgs) -> CliResult {
    let g = load_graph(&a.graph)?;
    let file: OutcomeFile = read_json(&a.outcome)?;
    let o = file.to_outcome(&g)?;
    let (mode, d) = match a.mode {
        DensityMode::Thm1 => ("thm1", theorem1_log_density(&g, &o)?),
        DensityMode::Prop1 => ("prop1", prop1_log_density(&g, &o)?),
        DensityMode::Sum => ("sum", sum_prop1_over_k(&g, &o, a.m)?),
    };
    print_json(&DensityOutput { mode, log_density: d.ln(), density: d.density() })
}

fn bessel(a: BesselArgs) -> CliResult {
    let v = if a.log { log_bessel_i(a.nu, a.z)? } else { bessel_i(a.nu, a.z)? };
    println!("{v:e}");
    Ok(())
}

#[derive(Serialize)]
struct TreeEntry {
    tree: TreeSpec,
    weight: f64,
}

#[derive(Serialize)]
struct TreesOutput {
    root: String,
    weighted_sum: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    trees: Option<Vec<TreeEntry>>,
}

fn trees(a: TreesArgs) -> CliResult {
    let g = load_graph(&a.graph)?;
    let root = g.vertex(&a.root)?;
    let trees = if a.enumerate {
        let list = enumerate_spanning_trees(&g, root)?;
        Some(
            list.iter()
                .map(|t| TreeEntry { tree: TreeSpec::from_tree(&g, t), weight: tree_weight(&g, t) })
                .collect(),
        )
    } else {
        None
    };
    print_json(&TreesOutput { root: a.root, weighted_sum: weighted_tree_sum(&g, root)?, trees })
}

#[derive(Clone, Copy, PartialEq)]
enum Check {
    Thm1,
    Prop1,
    RayKnight,
    TotalMass,
    Marginal,
}

impl Check {
    fn name(self) -> &'static str {
        match self {
            Check::Thm1 => "verify-thm1",
            Check::Prop1 => "verify-prop1",
            Check::RayKnight => "verify-ray-knight",
            Check::TotalMass => "verify-total-mass",
            Check::Marginal => "marginal",
        }
    }
}

/// Report shared by every verify subcommand.
#[derive(Serialize)]
struct CheckReport {
    check: &'static str,
    seed: u64,
    n_paths: usize,
    pass: bool,
    reports: Vec<VerificationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fraction_outside_3se: Option<f64>,
}

fn one_cell(cells: Vec<LocalTimeCell>) -> Result<LocalTimeCell, CliError> {
    let mut cells = cells;
    if cells.len() != 1 {
        return Err(config(format!("expected a single cell, got {}", cells.len())));
    }
    Ok(cells.pop().expect("one cell"))
}

fn verify(check: Check, a: VerifyArgs) -> CliResult {
    let g = load_graph(&a.graph)?;
    let target: TargetFile = read_json(&a.target)?;
    let cells = match (&a.cell, check) {
        (Some(p), _) => read_json::<CellFile>(p)?.cells(&g)?,
        (None, Check::TotalMass) => Vec::new(),
        (None, _) => return Err(config("--cell is required")),
    };
    let opts = VerifyOptions { z_threshold: a.z_threshold, quad_nodes: a.quad_nodes, density_scale: a.density_scale };
    if !(opts.density_scale > 0.0) || opts.quad_nodes == 0 || !(opts.z_threshold > 0.0) {
        return Err(config("--density-scale, --quad-nodes and --z-threshold must be positive"));
    }
    let (seed, n) = (a.seed.seed, a.seed.n);
    if n == 0 {
        return Err(config("-n must be positive"));
    }
    let i0 = target.start(&g)?;
    let mut fraction_outside_3se = None;
    let reports = match check {
        Check::Thm1 => {
            let t = CurrentTarget { current: target.current(&g)?, tree: target.tree(&g)? };
            vec![verify_theorem1(&g, i0, target.sigma()?, &t, &one_cell(cells)?, n, seed, &opts)?]
        }
        Check::Prop1 => {
            let t = CountsTarget { counts: target.counts(&g)?, tree: target.tree(&g)? };
            vec![verify_prop1(&g, i0, target.sigma()?, &t, &one_cell(cells)?, n, seed, &opts)?]
        }
        Check::RayKnight => vec![verify_ray_knight(&g, i0, target.u()?, &one_cell(cells)?, n, seed, &opts)?],
        Check::TotalMass => {
            vec![verify_total_mass(&g, i0, target.end(&g)?, target.sigma()?, n, seed, a.m, &opts)?]
        }
        Check::Marginal => {
            let h = verify_marginal_histogram(&g, i0, target.end(&g)?, target.sigma()?, &cells, n, seed, a.m, &opts)?;
            if h.bins.len() > 1 {
                fraction_outside_3se = Some(h.fraction_outside_3se);
            }
            h.bins
        }
    };
    let pass = match fraction_outside_3se {
        Some(f) => f <= MAX_FRACTION_OUTSIDE_3SE,
        None => reports.iter().all(|r| r.pass),
    };
    let report = CheckReport { check: check.name(), seed, n_paths: n, pass, reports, fraction_outside_3se };
    match &a.report {
        Some(p) => {
            let mut w = create(p)?;
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
            w.flush()?;
        }
        None => print_json(&report)?,
    }
    if let Some(p) = &a.csv {
        append_csv(p, check, seed, &report.reports)?;
    }
    if pass {
        Ok(())
    } else {
        Err(CliError::Failed)
    }
}

fn append_csv(path: &Path, check: Check, seed: u64, reports: &[VerificationReport]) -> CliResult {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| config(format!("{}: {e}", path.display())))?;
    if fresh {
        writeln!(f, "check,seed,cell,{}", VerificationReport::csv_header())?;
    }
    for (i, r) in reports.iter().enumerate() {
        writeln!(f, "{},{seed},{i},{}", check.name(), r.csv_row())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct WilsonSummary {
    n_samples: usize,
    zero_divergence: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    tree_law: Option<ChiSquareReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    order_independence: Option<ChiSquareReport>,
    pass: bool,
}

fn parse_order(g: &WeightedGraph, s: &str) -> Result<Vec<usize>, CliError> {
    s.split(',').map(|l| Ok(g.vertex(l.trim())?)).collect()
}

fn wilson(a: WilsonArgs) -> CliResult {
    let g = load_graph(&a.graph)?;
    let kappa = jumpdensity::io::kappa_vector(&g, &read_json(&a.kappa)?)?;
    let order = parse_order(&g, &a.order)?;
    let compare = a.compare_order.as_deref().map(|s| parse_order(&g, s)).transpose()?;
    let kg = KilledGraph::new(g.clone(), kappa)?;
    let (seed, n) = (a.seed.seed, a.seed.n);
    let samples = wilson_batch(&kg, &order, n, seed)?;
    let zero_divergence = samples.iter().all(|s| loop_cycling_numbers(&g, s).divergence(&g).iter().all(|&d| d == 0));
    if let Some(p) = &a.out {
        write_jsonl(p, samples.iter().enumerate().map(|(r, s)| WilsonRecord::from_output(&g, r as u64, s)))?;
    }
    // Regenerated from the same streams, so the test sees exactly the samples above.
    let tree_law = if kg.extended().n() <= TREE_LAW_MAX_VERTICES {
        Some(tree_law_check(&kg, &order, n, seed, a.p_threshold)?)
    } else {
        None
    };
    let order_independence = match &compare {
        Some(b) => Some(order_independence_check(&kg, &order, b, n, seed, a.p_threshold)?),
        None => None,
    };
    let pass = zero_divergence
        && tree_law.as_ref().is_none_or(|r| r.pass)
        && order_independence.as_ref().is_none_or(|r| r.pass);
    print_json(&WilsonSummary { n_samples: n, zero_divergence, tree_law, order_independence, pass })?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Failed)
    }
}

fn run(cli: Cli) -> CliResult {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(config("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Stats(a) => stats(a),
        Command::Density(a) => density(a),
        Command::Bessel(a) => bessel(a),
        Command::Trees(a) => trees(a),
        Command::VerifyThm1(a) => verify(Check::Thm1, a),
        Command::VerifyProp1(a) => verify(Check::Prop1, a),
        Command::VerifyRayKnight(a) => verify(Check::RayKnight, a),
        Command::VerifyTotalMass(a) => verify(Check::TotalMass, a),
        Command::Marginal(a) => verify(Check::Marginal, a),
        Command::Wilson(a) => wilson(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Failed) => ExitCode::from(1),
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
