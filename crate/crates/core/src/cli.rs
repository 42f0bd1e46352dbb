//! Command-line front end. Exit codes: 0 success, 1 usage or configuration,
//! 2 bad input files, 3 runtime failure.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{frozen_psa, rrcc_harness, RrccMeasurement};
use crate::error::Error;
use crate::insertion::InsertionCase;
use crate::model::{load_requests, write_requests, GatingMode, Request, SimConfig};
use crate::roadnet::{gen_grid, load_network, RoadNetwork};
use crate::scheduler::{EpochCounters, SchedulerRegistry};
use crate::simulator::{assignments_csv, run, write_outputs, SimRun, SimSummary};
use crate::util::{rng_for, sha256_file, write_atomic, Stream};
use crate::workload::{generate_requests, Arrivals, WorkloadSpec};

#[derive(Debug, Parser)]
#[command(name = "rideshare", version, about = "Ride-sharing dispatch simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a rectangular grid network as nodes.csv and edges.csv.
    GenGrid(GenGridArgs),
    /// Draw a synthetic request table over a network.
    GenRequests(GenRequestsArgs),
    /// Check a network and, optionally, a request table.
    Validate(ValidateArgs),
    /// Run one scheduler and write its reports.
    Simulate(SimulateArgs),
    /// Run the pruned and exhaustive schedulers on identical inputs.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct GenGridArgs {
    #[arg(long)]
    pub nx: usize,
    #[arg(long)]
    pub ny: usize,
    #[arg(long, default_value_t = 1.0)]
    pub spacing_km: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct NetArgs {
    /// Directory holding nodes.csv and edges.csv.
    #[arg(long)]
    pub net: PathBuf,
}

impl NetArgs {
    fn nodes(&self) -> PathBuf {
        self.net.join("nodes.csv")
    }

    fn edges(&self) -> PathBuf {
        self.net.join("edges.csv")
    }

    fn load(&self) -> Result<RoadNetwork, CliError> {
        load_network(&self.nodes(), &self.edges()).map_err(CliError::Input)
    }
}

#[derive(Debug, Args)]
pub struct GenRequestsArgs {
    #[command(flatten)]
    pub net: NetArgs,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Minimum straight-line origin/destination distance.
    #[arg(long, default_value_t = 0.0)]
    pub min_e_km: f64,
    #[arg(long, default_value_t = 3600.0)]
    pub horizon_s: f64,
    /// poisson or uniform.
    #[arg(long, default_value = "poisson")]
    pub arrivals: Arrivals,
    #[arg(long, default_value_t = 1)]
    pub party_size: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub net: NetArgs,
    #[arg(long)]
    pub requests: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub net: NetArgs,
    #[arg(long)]
    pub requests: PathBuf,
    /// Number of vehicles.
    #[arg(long, default_value_t = 70)]
    pub pvs: u32,
    #[arg(long, default_value_t = 5)]
    pub capacity: u32,
    /// Maximum detour ratio.
    #[arg(long, alias = "max-detour", default_value_t = 0.2)]
    pub delta: f64,
    /// Waiting-time threshold in minutes.
    #[arg(long, default_value_t = 4.0)]
    pub wait_min: f64,
    #[arg(long, default_value_t = 6.0)]
    pub buffer_km: f64,
    #[arg(long, default_value_t = 30.0)]
    pub speed_kmh: f64,
    #[arg(long, default_value_t = 10.0)]
    pub epoch_s: f64,
    /// literal or inclusive.
    #[arg(long, default_value = "literal")]
    pub gating: GatingMode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub horizon_s: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub start_s: f64,
    /// Bound peak occupancy along the path instead of all committed passengers.
    #[arg(long)]
    pub strict_occupancy: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

impl RunArgs {
    fn config(&self, scheduler: &str) -> SimConfig {
        SimConfig {
            scheduler: scheduler.to_owned(),
            max_detour: self.delta,
            wait_threshold_s: self.wait_min * 60.0,
            buffer_km: self.buffer_km,
            capacity: self.capacity,
            speed_kmh: self.speed_kmh,
            epoch_s: self.epoch_s,
            gating: self.gating,
            n_vehicles: self.pvs,
            seed: self.seed,
            horizon_s: self.horizon_s,
            start_s: self.start_s,
            strict_occupancy: self.strict_occupancy,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value = "psap")]
    pub scheduler: String,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Search-area fraction of the city for the frozen-area harness.
    #[arg(long, default_value_t = 0.3)]
    pub harness_area_frac: f64,
    #[arg(long, default_value_t = 100_000)]
    pub harness_samples: u64,
}

#[derive(Debug)]
pub enum CliError {
    Usage(Error),
    Input(Error),
    Runtime(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    fn inner(&self) -> &Error {
        match self {
            CliError::Usage(e) | CliError::Input(e) | CliError::Runtime(e) => e,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.inner().fmt(f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config: SimConfig,
    pub nodes: InputDigest,
    pub edges: InputDigest,
    pub requests: InputDigest,
}

fn digest(path: &Path) -> Result<InputDigest, CliError> {
    Ok(InputDigest { path: path.to_owned(), sha256: sha256_file(path).map_err(CliError::Input)? })
}

fn manifest(args: &RunArgs, command: &str, config: &SimConfig) -> Result<RunManifest, CliError> {
    Ok(RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        command: command.to_owned(),
        config: config.clone(),
        nodes: digest(&args.net.nodes())?,
        edges: digest(&args.net.edges())?,
        requests: digest(&args.requests)?,
    })
}

fn runtime<T>(r: crate::Result<T>) -> Result<T, CliError> {
    r.map_err(CliError::Runtime)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let s = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.into()))?;
    runtime(write_atomic(path, s.as_bytes()))
}

/// Loads inputs and checks the configuration before anything is written.
fn prepare(args: &RunArgs, scheduler: &str) -> Result<(RoadNetwork, Vec<Request>, SimConfig), CliError> {
    let config = args.config(scheduler);
    config.validate().map_err(CliError::Usage)?;
    let net = args.net.load()?;
    let requests = load_requests(&args.requests, &net).map_err(CliError::Input)?;
    Ok((net, requests, config))
}

fn simulate_one(
    net: &RoadNetwork,
    requests: Vec<Request>,
    config: &SimConfig,
    registry: &SchedulerRegistry,
) -> Result<SimRun, CliError> {
    let scheduler = registry.create(&config.scheduler, config).map_err(CliError::Usage)?;
    run(net, requests, config, scheduler.as_ref()).map_err(|e| match e {
        Error::Validation(_) | Error::NoPath { .. } => CliError::Input(e),
        e => CliError::Runtime(e),
    })
}

fn print_summary(s: &SimSummary) {
    println!(
        "{}: {}/{} completed, {} unserved, fleet {:.3} km, saved {:.3} km, candidates {}/{}",
        s.scheduler,
        s.completed,
        s.requests,
        s.unserved,
        s.fleet_km,
        s.saved_km,
        s.counters.total_evaluated(),
        s.counters.total_exhaustive()
    );
}

pub fn gen_grid_cmd(args: &GenGridArgs) -> Result<(), CliError> {
    let net = gen_grid(args.nx, args.ny, args.spacing_km).map_err(CliError::Usage)?;
    let (mut nodes, mut edges) = (Vec::new(), Vec::new());
    runtime(net.write_csv(&mut nodes, &mut edges))?;
    runtime(write_atomic(&args.out.join("nodes.csv"), &nodes))?;
    runtime(write_atomic(&args.out.join("edges.csv"), &edges))?;
    println!("wrote {} nodes and {} edges to {}", net.node_count(), net.edges().len(), args.out.display());
    Ok(())
}

pub fn gen_requests_cmd(args: &GenRequestsArgs) -> Result<(), CliError> {
    let net = args.net.load()?;
    let spec = WorkloadSpec {
        count: args.count,
        horizon_s: args.horizon_s,
        min_e_km: args.min_e_km,
        party_size: args.party_size,
        arrivals: args.arrivals,
    };
    let reqs = generate_requests(&net, &spec, &mut rng_for(args.seed, Stream::Requests)).map_err(CliError::Usage)?;
    let mut buf = Vec::new();
    runtime(write_requests(&reqs, &net, &mut buf))?;
    runtime(write_atomic(&args.out, &buf))?;
    println!("wrote {} requests to {}", reqs.len(), args.out.display());
    Ok(())
}

pub fn validate_cmd(args: &ValidateArgs) -> Result<(), CliError> {
    let net = args.net.load()?;
    let mut line = format!("network ok: {} nodes, {} edges", net.node_count(), net.edges().len());
    if let Some(path) = &args.requests {
        let reqs = load_requests(path, &net).map_err(CliError::Input)?;
        let mut nodes: Vec<_> = reqs.iter().flat_map(|r| [r.o, r.d]).collect();
        nodes.sort_unstable();
        nodes.dedup();
        net.check_strongly_connected(&nodes).map_err(CliError::Input)?;
        line.push_str(&format!("; {} requests ok", reqs.len()));
    }
    println!("{line}");
    Ok(())
}

pub fn simulate_cmd(args: &SimulateArgs, registry: &SchedulerRegistry) -> Result<(), CliError> {
    let (net, requests, config) = prepare(&args.run, &args.scheduler)?;
    registry.create(&config.scheduler, &config).map_err(CliError::Usage)?;
    write_json(&args.run.out.join("manifest.json"), &manifest(&args.run, "simulate", &config)?)?;
    let result = simulate_one(&net, requests, &config, registry)?;
    runtime(write_outputs(&result, &args.run.out))?;
    print_summary(&result.report.summary);
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareLeg {
    pub summary: SimSummary,
    pub wall_ms: f64,
    pub psi_a: Option<f64>,
    pub psi_b: Option<f64>,
    pub psi_c: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub psap: CompareLeg,
    pub es: CompareLeg,
    /// Candidates the pruned run evaluated over what exhaustive search
    /// would evaluate on the same trials.
    pub candidate_ratio: Option<f64>,
    /// Candidates the pruned run evaluated over those of the exhaustive run.
    /// The two runs make different assignments unless gating is inclusive.
    pub candidate_ratio_cross_run: Option<f64>,
    pub assignments_identical: bool,
    pub assignment_rows_differing: usize,
    pub harness: RrccMeasurement,
}

fn leg(run: &SimRun, wall_ms: f64) -> CompareLeg {
    let c: &EpochCounters = &run.report.summary.counters;
    CompareLeg {
        summary: run.report.summary.clone(),
        wall_ms,
        psi_a: c.psi(InsertionCase::A),
        psi_b: c.psi(InsertionCase::B),
        psi_c: c.psi(InsertionCase::C),
    }
}

pub fn compare_cmd(args: &CompareArgs, registry: &SchedulerRegistry) -> Result<(), CliError> {
    let (net, requests, psap_cfg) = prepare(&args.run, "psap")?;
    let es_cfg = SimConfig { scheduler: "es".into(), ..psap_cfg.clone() };
    let out = &args.run.out;
    write_json(&out.join("manifest.json"), &manifest(&args.run, "compare", &psap_cfg)?)?;

    let mut results = Vec::new();
    for cfg in [&psap_cfg, &es_cfg] {
        let started = Instant::now();
        let r = simulate_one(&net, requests.clone(), cfg, registry)?;
        let ms = started.elapsed().as_secs_f64() * 1e3;
        runtime(write_outputs(&r, &out.join(&cfg.scheduler)))?;
        results.push((r, ms));
    }
    let (es, es_ms) = results.pop().expect("two legs");
    let (psap, psap_ms) = results.pop().expect("two legs");

    let bbox = net.bounding_box();
    let psa = frozen_psa(bbox, args.harness_area_frac).map_err(CliError::Usage)?;
    let harness = rrcc_harness(
        bbox,
        &psa,
        GatingMode::Inclusive,
        args.harness_samples,
        &mut rng_for(psap_cfg.seed, Stream::Harness),
    )
    .map_err(CliError::Usage)?;

    let a = assignments_csv(&psap.report.assignments);
    let b = assignments_csv(&es.report.assignments);
    let differing = a.lines().zip(b.lines()).filter(|(x, y)| x != y).count() + a.lines().count().abs_diff(b.lines().count());
    let ratio = |m: u64, n: u64| (n > 0).then(|| m as f64 / n as f64);
    let pc = &psap.report.summary.counters;
    let summary = CompareSummary {
        candidate_ratio: ratio(pc.total_evaluated(), pc.total_exhaustive()),
        candidate_ratio_cross_run: ratio(pc.total_evaluated(), es.report.summary.counters.total_evaluated()),
        assignments_identical: differing == 0,
        assignment_rows_differing: differing,
        psap: leg(&psap, psap_ms),
        es: leg(&es, es_ms),
        harness,
    };
    write_json(&out.join("compare.json"), &summary)?;

    print_summary(&psap.report.summary);
    print_summary(&es.report.summary);
    let fmt = |x: Option<f64>| x.map_or("n/a".to_owned(), |v| format!("{v:.4}"));
    println!(
        "psap psi A/B/C: {} {} {}; candidate ratio {} (vs es run {}); assignments identical: {} ({} rows differ)",
        fmt(summary.psap.psi_a),
        fmt(summary.psap.psi_b),
        fmt(summary.psap.psi_c),
        fmt(summary.candidate_ratio),
        fmt(summary.candidate_ratio_cross_run),
        summary.assignments_identical,
        differing
    );
    println!(
        "harness at area fraction {:.3}: psi_A {:.4} (expected {:.4}), psi_B {:.4} (expected {:.4})",
        harness.area_frac, harness.psi_a, harness.expected_a, harness.psi_b, harness.expected_b
    );
    println!("wall time: psap {psap_ms:.1} ms, es {es_ms:.1} ms");
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let registry = SchedulerRegistry::default();
    match &cli.command {
        Command::GenGrid(a) => gen_grid_cmd(a),
        Command::GenRequests(a) => gen_requests_cmd(a),
        Command::Validate(a) => validate_cmd(a),
        Command::Simulate(a) => simulate_cmd(a, &registry),
        Command::Compare(a) => compare_cmd(a, &registry),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
