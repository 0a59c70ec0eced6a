use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use qsdse_core::model::{CostTable, DesignSpace, NetworkSpec};
use qsdse_core::optim::{self, FoldableParams, Histogram, QuantMode};
use qsdse_core::pareto::{self, AccuracyModel, Constraints, Objectives, ParetoError, ParetoPoint};
use qsdse_core::search::{self, Algorithm, SearchError, SearchParams, SearchReport, Solution, DEFAULT_BRUTE_CAP};
use qsdse_core::synth::{self, CostProfile, Preset, SynthError};

mod manifest;

use manifest::Artifacts;

const BRUTE_CAP_ENV: &str = "QSDSE_BRUTE_CAP";

#[derive(Parser)]
#[command(name = "qsdse", version, about = "Per-layer implementation search for DNN deployment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a preset network and a synthetic cost table.
    Gen(GenArgs),
    /// Build a cost table from benchmark measurement CSV records.
    Ingest(IngestArgs),
    /// Run one search algorithm.
    Search(SearchCmd),
    /// Run every algorithm on a chain network and tabulate the results.
    Compare(CompareArgs),
    /// Latency/accuracy and latency/memory Pareto fronts.
    Pareto(ParetoArgs),
    /// Fold bnorm/scale layers into the preceding linear layers.
    Fuse(FuseArgs),
    /// Plan activation memory with in-place layers and a shared pool.
    Memplan(MemplanArgs),
    /// Compute 8-bit quantisation parameters.
    Quant(QuantArgs),
}

#[derive(Args)]
struct SpaceArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    costs: PathBuf,
}

#[derive(Args, Serialize)]
struct RlArgs {
    #[arg(long, default_value_t = 1000)]
    episodes: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    #[arg(long, default_value_t = 32)]
    replay_batch: usize,
}

impl RlArgs {
    fn params(&self, seed: u64) -> SearchParams {
        SearchParams {
            total_episodes: self.episodes,
            alpha: self.alpha,
            gamma: self.gamma,
            replay_batch: self.replay_batch,
            seed,
            ..SearchParams::default()
        }
    }
}

#[derive(Args)]
struct AccuracyArgs {
    /// Accuracy model JSON (additive or measured table).
    #[arg(long)]
    accuracy: Option<PathBuf>,
    /// Baseline top-1 for the additive model when no --accuracy file is given.
    #[arg(long, default_value_t = 100.0)]
    base_accuracy: f64,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    preset: String,
    /// Number of convolutions for the chain preset.
    #[arg(long, default_value_t = 8)]
    depth: usize,
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SearchCmd {
    #[command(flatten)]
    space: SpaceArgs,
    #[arg(long)]
    algorithm: Algorithm,
    #[command(flatten)]
    rl: RlArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    space: SpaceArgs,
    /// Seeds for the sampling algorithms, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[command(flatten)]
    rl: RlArgs,
    #[command(flatten)]
    accuracy: AccuracyArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ParetoArgs {
    #[command(flatten)]
    space: SpaceArgs,
    /// Candidate solutions (JSON list from `search`); RL is run when omitted.
    #[arg(long)]
    solutions: Option<PathBuf>,
    #[command(flatten)]
    rl: RlArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    accuracy: AccuracyArgs,
    #[arg(long, default_value_t = 0.25)]
    slack: f64,
    #[arg(long)]
    max_accuracy_drop: Option<f64>,
    #[arg(long)]
    max_memory: Option<u64>,
    /// Also write SVG scatter plots of both fronts.
    #[arg(long)]
    svg: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FuseArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MemplanArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long, default_value_t = 4)]
    bytes_per_element: u64,
    /// Disable in-place activation/reshape/flatten layers.
    #[arg(long)]
    no_inplace: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum QuantMethod {
    Kl,
    Symmetric,
    Asymmetric,
}

#[derive(Args)]
struct QuantArgs {
    /// Histogram CSV with `bin_edge,count` rows.
    #[arg(long)]
    histogram: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    max: Option<f64>,
    #[arg(long, value_enum, default_value = "kl")]
    mode: QuantMethod,
    #[arg(long, default_value_t = optim::DEFAULT_LEVELS)]
    levels: usize,
    #[arg(long)]
    out: PathBuf,
}

fn brute_cap() -> Result<u128> {
    match std::env::var(BRUTE_CAP_ENV) {
        Ok(v) => v.trim().parse().with_context(|| format!("{BRUTE_CAP_ENV}={v:?} is not an integer")),
        Err(_) => Ok(DEFAULT_BRUTE_CAP),
    }
}

fn load_profile(art: &mut Artifacts, path: Option<&Path>, preset: Option<Preset>) -> Result<CostProfile> {
    match path {
        Some(p) => art.read_json(p),
        None => Ok(preset.map(CostProfile::for_preset).unwrap_or_default()),
    }
}

fn load_space(art: &mut Artifacts, args: &SpaceArgs) -> Result<DesignSpace> {
    let net: NetworkSpec = art.read_json(&args.network)?;
    let table: CostTable = art.read_json(&args.costs)?;
    Ok(DesignSpace::build(&net, &table)?)
}

fn load_accuracy(art: &mut Artifacts, args: &AccuracyArgs) -> Result<AccuracyModel> {
    match &args.accuracy {
        Some(p) => art.read_json(p),
        None => Ok(AccuracyModel::additive(args.base_accuracy)),
    }
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let preset = Preset::from_name(&a.preset, a.depth)?;
    let params = json!({ "preset": a.preset, "depth": a.depth });
    let mut art = Artifacts::new(&a.out, "gen", Some(a.seed), params)?;
    let profile = CostProfile { seed: a.seed, ..load_profile(&mut art, a.profile.as_deref(), Some(preset))? };
    let net = synth::gen_network(preset);
    let table = synth::gen_cost_table(&net, &profile)?;
    art.write_json("network.json", &net)?;
    art.write_json("costs.json", &table)?;
    art.finish()
}

fn cmd_ingest(a: IngestArgs) -> Result<()> {
    let mut art = Artifacts::new(&a.out, "ingest", None, json!({}))?;
    let net: NetworkSpec = art.read_json(&a.network)?;
    let profile = load_profile(&mut art, a.profile.as_deref(), None)?;
    let records = synth::read_measurements_csv(art.read_input(&a.records)?.as_slice())?;
    let table = synth::ingest_measurements(&net.name, &records, &profile)?;
    DesignSpace::build(&net, &table).context("ingested table does not cover the network")?;
    art.write_json("costs.json", &table)?;
    art.finish()
}

fn write_report(art: &mut Artifacts, report: &SearchReport) -> Result<()> {
    art.write_json("report.json", report)?;
    if !report.learning_curve.is_empty() {
        art.write("learning_curve.csv", report.learning_curve_csv().as_bytes())?;
        art.write_json("solutions.json", &report.solutions)?;
    }
    Ok(())
}

fn cmd_search(a: SearchCmd) -> Result<()> {
    let params = json!({ "algorithm": a.algorithm.name(), "rl": a.rl });
    let mut art = Artifacts::new(&a.out, "search", Some(a.seed), params)?;
    let space = load_space(&mut art, &a.space)?;
    let report = search::run(a.algorithm, &space, &a.rl.params(a.seed), brute_cap()?)?;
    log::info!("{}: {} ms in {:?}", report.algorithm, report.best_latency_ms, report.wall_time);
    println!("{} {}", report.algorithm, report.best_latency_ms);
    write_report(&mut art, &report)?;
    art.finish()
}

#[derive(Serialize)]
struct CompareRow {
    algorithm: String,
    latency_ms: Option<f64>,
    considered_states: Option<u64>,
    accuracy_pct: Option<f64>,
}

/// Checks RL == RS >= Dijkstra >= A* >= DS+ == DS on the considered-state
/// counts, returning one message per violated relation.
fn ordering_violations(rows: &[(Algorithm, Option<u64>)]) -> Vec<String> {
    let get = |a: Algorithm| rows.iter().find(|(x, _)| *x == a).and_then(|(_, c)| *c);
    let chain = [
        (Algorithm::Rl, Algorithm::Random, true),
        (Algorithm::Random, Algorithm::Dijkstra, false),
        (Algorithm::Dijkstra, Algorithm::Astar, false),
        (Algorithm::Astar, Algorithm::DsPlus, false),
        (Algorithm::DsPlus, Algorithm::Ds, true),
    ];
    let mut out = Vec::new();
    for (a, b, equal) in chain {
        if let (Some(x), Some(y)) = (get(a), get(b)) {
            let ok = if equal { x == y } else { x >= y };
            if !ok {
                let op = if equal { "==" } else { ">=" };
                out.push(format!("{} ({x}) {op} {} ({y}) does not hold", a.name(), b.name()));
            }
        }
    }
    out
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let params = json!({ "seeds": a.seeds, "rl": a.rl });
    let mut art = Artifacts::new(&a.out, "compare", a.seeds.first().copied(), params)?;
    let space = load_space(&mut art, &a.space)?;
    if !space.is_chain() {
        return Err(SearchError::NotAChain.into());
    }
    let model = load_accuracy(&mut art, &a.accuracy)?;
    let cap = brute_cap()?;
    let mut rows = Vec::new();
    let mut counts = Vec::new();
    for alg in Algorithm::ALL {
        let seeds: Vec<Option<u64>> = match alg {
            Algorithm::Rl | Algorithm::Random => a.seeds.iter().copied().map(Some).collect(),
            _ => vec![None],
        };
        for seed in seeds {
            let label = match seed {
                Some(s) => format!("{}(seed={s})", alg.name()),
                None => alg.name().to_string(),
            };
            match search::run(alg, &space, &a.rl.params(seed.unwrap_or(0)), cap) {
                Ok(r) => {
                    if seed.is_none() || seed == a.seeds.first().copied() {
                        counts.push((alg, Some(r.considered_states)));
                    }
                    rows.push(CompareRow {
                        algorithm: label,
                        latency_ms: Some(r.best_latency_ms),
                        considered_states: Some(r.considered_states),
                        accuracy_pct: Some(pareto::accuracy_of(&space, &r.best_config, &model)?),
                    });
                }
                Err(e @ (SearchError::NoFeasiblePath | SearchError::SpaceTooLarge { .. })) => {
                    log::warn!("{label}: {e}");
                    rows.push(CompareRow { algorithm: label, latency_ms: None, considered_states: None, accuracy_pct: None });
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    let violations = ordering_violations(&counts);
    for v in &violations {
        eprintln!("ordering violated: {v}");
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r)?;
    }
    art.write("compare.csv", &w.into_inner()?)?;
    art.write_json("compare.json", &json!({ "rows": rows, "ordering_ok": violations.is_empty(), "violations": violations }))?;
    art.finish()
}

fn cmd_pareto(a: ParetoArgs) -> Result<()> {
    let params = json!({
        "rl": a.rl,
        "slack": a.slack,
        "max_accuracy_drop": a.max_accuracy_drop,
        "max_memory": a.max_memory,
        "base_accuracy": a.accuracy.base_accuracy,
    });
    let mut art = Artifacts::new(&a.out, "pareto", Some(a.seed), params)?;
    let space = load_space(&mut art, &a.space)?;
    let model = load_accuracy(&mut art, &a.accuracy)?;
    let searched: Vec<Solution> = match &a.solutions {
        Some(p) => art.read_json(p)?,
        None => search::run_rl(&space, &a.rl.params(a.seed))?.solutions,
    };
    let candidates = pareto::filter_candidates(&searched, a.slack)?;
    let ip = pareto::interesting_points(&space, &candidates, &model, &a.rl.params(a.seed), brute_cap()?)?;
    let constraints = Constraints { max_accuracy_drop: a.max_accuracy_drop, max_memory: a.max_memory };
    let ref_acc = ip.reference.accuracy_pct;
    let points: Vec<ParetoPoint> = ip.all().into_iter().filter(|p| constraints.admits(p, ref_acc)).collect();
    if points.is_empty() {
        bail!("no point satisfies the constraints");
    }
    let acc_front = pareto::pareto_front(&points, Objectives::LatencyAccuracy)?;
    let mem_front = pareto::pareto_front(&points, Objectives::LatencyMemory)?;
    art.write("points.csv", pareto::front_csv(&points)?.as_bytes())?;
    art.write("front_latency_accuracy.csv", pareto::front_csv(&acc_front)?.as_bytes())?;
    art.write("front_latency_memory.csv", pareto::front_csv(&mem_front)?.as_bytes())?;
    art.write_json(
        "pareto.json",
        &json!({
            "reference": ip.reference,
            "opt_fp32": ip.opt_fp32,
            "int8": ip.int8,
            "warnings": ip.warnings,
            "latency_accuracy": acc_front,
            "latency_memory": mem_front,
        }),
    )?;
    if a.svg {
        let svg = pareto::scatter_svg(&points, &acc_front, Objectives::LatencyAccuracy);
        art.write("latency_accuracy.svg", svg.as_bytes())?;
        let svg = pareto::scatter_svg(&points, &mem_front, Objectives::LatencyMemory);
        art.write("latency_memory.svg", svg.as_bytes())?;
    }
    for w in &ip.warnings {
        eprintln!("warning: {w}");
    }
    art.finish()
}

fn cmd_fuse(a: FuseArgs) -> Result<()> {
    let mut art = Artifacts::new(&a.out, "fuse", None, json!({}))?;
    let net: NetworkSpec = art.read_json(&a.network)?;
    let params: FoldableParams = art.read_json(&a.params)?;
    let r = optim::fuse_static(&net, &params)?;
    art.write_json("network.json", &r.network)?;
    art.write_json("params.json", &r.params)?;
    art.write_json("fused.json", &r.fused)?;
    art.finish()
}

fn cmd_memplan(a: MemplanArgs) -> Result<()> {
    let params = json!({ "bytes_per_element": a.bytes_per_element, "inplace": !a.no_inplace });
    let mut art = Artifacts::new(&a.out, "memplan", None, params)?;
    let net: NetworkSpec = art.read_json(&a.network)?;
    let plan = optim::plan_network_memory(&net, a.bytes_per_element, !a.no_inplace)?;
    println!("footprint {} bytes (naive {})", plan.footprint_bytes, plan.naive_bytes);
    art.write_json("pool_plan.json", &plan)?;
    art.finish()
}

fn cmd_quant(a: QuantArgs) -> Result<()> {
    let params = json!({ "mode": a.mode, "levels": a.levels, "min": a.min, "max": a.max });
    let mut art = Artifacts::new(&a.out, "quant", None, params)?;
    let qp = match (&a.histogram, a.min, a.max) {
        (Some(path), None, None) => {
            let hist = Histogram::from_csv(art.read_input(path)?.as_slice())?;
            match a.mode {
                QuantMethod::Kl => optim::kl_calibrate(&hist, a.levels)?,
                QuantMethod::Symmetric => hist.minmax_params()?,
                QuantMethod::Asymmetric => bail!("asymmetric calibration needs --min and --max"),
            }
        }
        (None, Some(min), Some(max)) => {
            let mode = match a.mode {
                QuantMethod::Symmetric => QuantMode::Symmetric,
                QuantMethod::Asymmetric => QuantMode::Asymmetric,
                QuantMethod::Kl => bail!("KL calibration needs --histogram"),
            };
            optim::quant_params_minmax(min, max, mode)?
        }
        _ => bail!("give either --histogram or both --min and --max"),
    };
    println!("scale {} offset {}", qp.scale, qp.offset);
    art.write_json("quant_params.json", &qp)?;
    art.finish()
}

fn search_exit_code(e: &SearchError) -> Option<u8> {
    match e {
        SearchError::NoFeasiblePath => Some(3),
        SearchError::NotAChain => Some(4),
        SearchError::SpaceTooLarge { .. } => Some(5),
        _ => None,
    }
}

/// 2 usage, 3 no feasible path, 4 not a chain, 5 space too large, 1 anything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<SearchError>() {
            if let Some(c) = search_exit_code(e) {
                return c;
            }
        }
        if let Some(ParetoError::Search(e)) = cause.downcast_ref::<ParetoError>() {
            if let Some(c) = search_exit_code(e) {
                return c;
            }
        }
        if let Some(SynthError::UnknownPreset(_)) = cause.downcast_ref::<SynthError>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Ingest(a) => cmd_ingest(a),
        Command::Search(a) => cmd_search(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Pareto(a) => cmd_pareto(a),
        Command::Fuse(a) => cmd_fuse(a),
        Command::Memplan(a) => cmd_memplan(a),
        Command::Quant(a) => cmd_quant(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
