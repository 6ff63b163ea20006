//! Command-line experiment harness.
//!
//! Subcommands cover the full workflow: generate a network, run a
//! scenario, record flow datasets, fit the propagation forecaster, score
//! forecasters against baselines, and sweep control/router combinations.
//!
//! Scenario-shaped subcommands (`run`, `gen-data`) take their parameters
//! from flags, or from a TOML file via `--config`; file values override
//! conflicting flags.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::forecast::{fit, FitConfig, PropagationModel};
use crate::network::{generate_grid, load_network, network_to_toml, NetworkGraph};
use crate::routing::LAMBDA;
use crate::scenario::compare::{compare_baselines, CompareConfig};
use crate::scenario::dataset::{generate_dataset, load_manifest, load_split, DatasetConfig};
use crate::scenario::evalf::{eval_forecast, write_eval_csv};
use crate::scenario::runner::run_scenario;
use crate::scenario::{demand_preset, NamedSpawn, RouterMode, ScenarioConfig};
use crate::sim::control::ControlMode;
use crate::sim::SpawnSpec;

#[derive(Parser)]
#[command(
    name = "mixtraffic",
    version,
    about = "Deterministic mixed-traffic experiments: simulate, sense, forecast, rebalance"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run batch work sequentially; results are identical either way.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write a grid road network as TOML.
    GenNet(GenNetArgs),
    /// Run one scenario end to end.
    Run(RunArgs),
    /// Record ground-truth flow datasets over seeded runs.
    GenData(GenDataArgs),
    /// Fit the propagation forecaster on a dataset's training split.
    Fit(FitArgs),
    /// Score forecasters on a dataset's evaluation split.
    EvalForecast(EvalForecastArgs),
    /// Sweep the control/router baselines across robot rates.
    Compare(CompareArgs),
}

#[derive(Args)]
struct GenNetArgs {
    #[arg(long, default_value_t = 4)]
    rows: u32,
    #[arg(long, default_value_t = 4)]
    cols: u32,
    /// Segment length in metres.
    #[arg(long, default_value_t = 100.0)]
    length: f64,
    /// Speed limit in metres per second.
    #[arg(long, default_value_t = 10.0)]
    speed: f64,
    #[arg(long, default_value = "network.toml")]
    out: PathBuf,
}

/// Flags mirroring the scenario fields. Anything left unset falls back to
/// the config file (which wins on conflict) and then to defaults.
#[derive(Args, Default)]
struct ScenarioFlags {
    /// Road network TOML file. Mutually exclusive with --grid.
    #[arg(long)]
    network: Option<PathBuf>,
    /// Generate an NxM grid network in place, e.g. "4x4".
    #[arg(long)]
    grid: Option<String>,
    /// Grid segment length in metres.
    #[arg(long)]
    length: Option<f64>,
    /// Grid speed limit in metres per second.
    #[arg(long)]
    speed: Option<f64>,
    /// Ticks to simulate.
    #[arg(long)]
    duration: Option<u64>,
    /// all-way-stop | fixed-time | rv-negotiated
    #[arg(long)]
    control_mode: Option<String>,
    /// shortest | rebalance
    #[arg(long)]
    router: Option<String>,
    /// Robot-share target the coordinator defends.
    #[arg(long)]
    p_target: Option<f64>,
    /// Detection slack below the target.
    #[arg(long)]
    lambda: Option<f64>,
    /// Ticks between rebalancing rounds.
    #[arg(long)]
    cadence: Option<u64>,
    /// Forecast steps ahead used when planning rounds.
    #[arg(long)]
    horizon: Option<usize>,
    /// Bundled demand pattern: morning-rush | evening-rush | late-evening.
    #[arg(long)]
    preset: Option<String>,
    /// Robot probability at ordinary entry points.
    #[arg(long)]
    rv_normal: Option<f64>,
    /// Robot probability at the designated low-robot entry points.
    #[arg(long)]
    rv_low: Option<f64>,
    /// Fitted propagation model to forecast with during rounds.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioFlags,
    /// Scenario TOML file; its values override flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Simulation seed (required; recorded in every output).
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GenDataArgs {
    #[command(flatten)]
    scenario: ScenarioFlags,
    /// Scenario TOML file; its values override flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    runs: u32,
    /// Base seed; run r simulates with seed+r.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "dataset")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Dataset directory (as written by gen-data).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
    /// Also feed each segment its own previous value.
    #[arg(long)]
    self_lag: bool,
    /// Ticks per model step (aggregation window).
    #[arg(long, default_value_t = 1)]
    window: usize,
}

#[derive(Args)]
struct EvalForecastArgs {
    /// Dataset directory (as written by gen-data).
    #[arg(long)]
    data: PathBuf,
    /// Fitted model file; omitted, the model is fitted on the fly.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Comma-separated forecast horizons, in model steps.
    #[arg(long, default_value = "10,50,100")]
    horizons: String,
    #[arg(long, default_value = "forecast_eval.csv")]
    out: PathBuf,
    /// Feed each segment its own previous value when fitting on the fly.
    #[arg(long)]
    self_lag: bool,
    /// Ticks per model step when fitting on the fly.
    #[arg(long, default_value_t = 1)]
    window: usize,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    scenario: ScenarioFlags,
    /// Comma-separated seeds; every cell runs all of them.
    #[arg(long, default_value = "1")]
    seeds: String,
    /// Comma-separated robot rates for the ordinary entry points.
    #[arg(long, default_value = "0.5,0.6,0.8")]
    rates: String,
    #[arg(long, default_value = "compare-out")]
    out_dir: PathBuf,
}

/// Optional scenario fields as a TOML document.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    network: Option<PathBuf>,
    grid: Option<GridSpec>,
    duration: Option<u64>,
    seed: Option<u64>,
    control_mode: Option<ControlMode>,
    router: Option<RouterMode>,
    p_target: Option<f64>,
    lambda: Option<f64>,
    cadence: Option<u64>,
    horizon: Option<usize>,
    preset: Option<String>,
    rv_normal: Option<f64>,
    rv_low: Option<f64>,
    model: Option<PathBuf>,
    #[serde(default)]
    spawn: Vec<NamedSpawn>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
struct GridSpec {
    rows: u32,
    cols: u32,
    #[serde(default = "default_length")]
    length_m: f64,
    #[serde(default = "default_speed")]
    speed_mps: f64,
}

fn default_length() -> f64 {
    100.0
}

fn default_speed() -> f64 {
    10.0
}

fn parse_control_mode(s: &str) -> Result<ControlMode> {
    match s {
        "all-way-stop" => Ok(ControlMode::AllWayStop),
        "fixed-time" => Ok(ControlMode::FixedTime),
        "rv-negotiated" => Ok(ControlMode::RvNegotiated),
        other => Err(Error::Config(format!(
            "unknown control mode {other:?}; expected all-way-stop, fixed-time, or rv-negotiated"
        ))),
    }
}

fn parse_router(s: &str) -> Result<RouterMode> {
    match s {
        "shortest" => Ok(RouterMode::Shortest),
        "rebalance" => Ok(RouterMode::Rebalance),
        other => Err(Error::Config(format!(
            "unknown router {other:?}; expected shortest or rebalance"
        ))),
    }
}

fn parse_grid_shape(s: &str) -> Result<(u32, u32)> {
    let bad = || Error::Config(format!("grid shape must look like 4x4, got {s:?}"));
    let (rows, cols) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((
        rows.trim().parse().map_err(|_| bad())?,
        cols.trim().parse().map_err(|_| bad())?,
    ))
}

fn parse_listed<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    let items: Vec<T> = s
        .split(',')
        .map(|p| p.trim().parse::<T>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("could not parse {what} list {s:?}")))?;
    if items.is_empty() {
        return Err(Error::Config(format!("{what} list is empty")));
    }
    Ok(items)
}

/// A network plus the TOML text it came from, kept so datasets can embed
/// their network verbatim.
struct NetworkSource {
    text: String,
    graph: NetworkGraph,
}

fn load_network_source(path: &Path) -> Result<NetworkSource> {
    let text = fs::read_to_string(path)?;
    let graph = load_network(&text)?;
    Ok(NetworkSource { text, graph })
}

fn grid_network_source(rows: u32, cols: u32, length: f64, speed: f64) -> Result<NetworkSource> {
    let doc = generate_grid(rows, cols, length, speed)?;
    let text = network_to_toml(&doc)?;
    let graph = doc.build()?;
    Ok(NetworkSource { text, graph })
}

fn resolve_network(flags: &ScenarioFlags, file: &ScenarioFile) -> Result<NetworkSource> {
    if file.network.is_some() && file.grid.is_some() {
        return Err(Error::Config(
            "config file sets both network and grid; pick one".into(),
        ));
    }
    if let Some(path) = &file.network {
        return load_network_source(path);
    }
    if let Some(g) = file.grid {
        return grid_network_source(g.rows, g.cols, g.length_m, g.speed_mps);
    }
    if flags.network.is_some() && flags.grid.is_some() {
        return Err(Error::Config(
            "--network and --grid are mutually exclusive".into(),
        ));
    }
    if let Some(path) = &flags.network {
        return load_network_source(path);
    }
    let (rows, cols) = match &flags.grid {
        Some(shape) => parse_grid_shape(shape)?,
        None => (4, 4),
    };
    grid_network_source(
        rows,
        cols,
        flags.length.unwrap_or_else(default_length),
        flags.speed.unwrap_or_else(default_speed),
    )
}

/// Everything a scenario-shaped subcommand needs, resolved from
/// defaults ← flags ← config file.
struct Resolved {
    net: NetworkSource,
    cfg: ScenarioConfig,
    model: Option<PropagationModel>,
}

fn resolve_scenario(
    flags: &ScenarioFlags,
    config_path: Option<&Path>,
    seed: u64,
    default_duration: u64,
    default_mode: ControlMode,
    default_router: RouterMode,
) -> Result<Resolved> {
    let file: ScenarioFile = match config_path {
        Some(p) => toml::from_str(&fs::read_to_string(p)?)?,
        None => ScenarioFile::default(),
    };
    let net = resolve_network(flags, &file)?;

    let control_mode = match (&file.control_mode, &flags.control_mode) {
        (Some(m), _) => *m,
        (None, Some(s)) => parse_control_mode(s)?,
        (None, None) => default_mode,
    };
    let router = match (&file.router, &flags.router) {
        (Some(r), _) => *r,
        (None, Some(s)) => parse_router(s)?,
        (None, None) => default_router,
    };
    let p_target = file.p_target.or(flags.p_target).unwrap_or(0.5);
    let spawns = if file.spawn.is_empty() {
        let preset = file
            .preset
            .clone()
            .or_else(|| flags.preset.clone())
            .unwrap_or_else(|| "evening-rush".into());
        let rv_normal = file
            .rv_normal
            .or(flags.rv_normal)
            .unwrap_or(p_target + 0.05);
        let rv_low = file.rv_low.or(flags.rv_low).unwrap_or(0.20);
        demand_preset(&preset, &net.graph, rv_normal, rv_low)?
    } else {
        file.spawn
            .iter()
            .map(|s| {
                Ok(SpawnSpec {
                    segment: net.graph.idx(&s.segment)?,
                    rate: s.rate,
                    rv_probability: s.rv_probability,
                })
            })
            .collect::<Result<_>>()?
    };

    let model = match file.model.as_ref().or(flags.model.as_ref()) {
        Some(path) => Some(PropagationModel::load(path, &net.graph)?),
        None => None,
    };

    let cfg = ScenarioConfig {
        duration: file.duration.or(flags.duration).unwrap_or(default_duration),
        seed: file.seed.unwrap_or(seed),
        control_mode,
        router,
        spawns,
        p_target,
        lambda: file.lambda.or(flags.lambda).unwrap_or(LAMBDA),
        cadence: file.cadence.or(flags.cadence).unwrap_or(100),
        horizon: file.horizon.or(flags.horizon).unwrap_or(100),
    };
    Ok(Resolved { net, cfg, model })
}

/// Open a dataset directory: its embedded network plus its manifest,
/// cross-checked.
fn open_dataset(dir: &Path) -> Result<(NetworkSource, crate::scenario::dataset::Manifest)> {
    let net = load_network_source(&dir.join("network.toml"))?;
    let manifest = load_manifest(&dir.join("manifest.json"))?;
    if manifest.graph_hash != net.graph.graph_hash() {
        return Err(Error::Config(format!(
            "dataset manifest was recorded on network {} but network.toml hashes to {}",
            manifest.graph_hash,
            net.graph.graph_hash()
        )));
    }
    Ok((net, manifest))
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let mode = if cli.sequential {
        ExecMode::Sequential
    } else {
        ExecMode::Parallel
    };
    match dispatch(cli.command, mode) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command, mode: ExecMode) -> Result<()> {
    match command {
        Command::GenNet(args) => gen_net(args),
        Command::Run(args) => run(args, mode),
        Command::GenData(args) => gen_data(args, mode),
        Command::Fit(args) => fit_cmd(args, mode),
        Command::EvalForecast(args) => eval_forecast_cmd(args, mode),
        Command::Compare(args) => compare(args, mode),
    }
}

fn gen_net(args: GenNetArgs) -> Result<()> {
    let net = grid_network_source(args.rows, args.cols, args.length, args.speed)?;
    fs::write(&args.out, &net.text)?;
    println!(
        "wrote {} ({} segments, {} intersections, hash {})",
        args.out.display(),
        net.graph.len(),
        net.graph.intersections().len(),
        net.graph.graph_hash()
    );
    Ok(())
}

fn run(args: RunArgs, mode: ExecMode) -> Result<()> {
    let resolved = resolve_scenario(
        &args.scenario,
        args.config.as_deref(),
        args.seed,
        900,
        ControlMode::RvNegotiated,
        RouterMode::Rebalance,
    )?;
    let summary = run_scenario(
        &resolved.net.graph,
        &resolved.cfg,
        resolved.model.as_ref(),
        &args.out_dir,
        mode,
    )?;
    println!("wrote {}", summary.metrics_path.display());
    if let Some(p) = &summary.replay_path {
        println!("wrote {}", p.display());
    }
    println!("wrote {}", args.out_dir.join("summary.json").display());
    println!(
        "seed {}  config {}  spawned {}  departed {}",
        summary.seed, summary.config_hash, summary.spawned, summary.departed
    );
    println!(
        "avg wait {:.2} ticks  shortage index {:.4}  rounds {}  applied {}  conflicts {}",
        summary.avg_wait,
        summary.mean_shortage_index,
        summary.rounds,
        summary.applied_assignments,
        summary.conflicting_grants
    );
    println!("wall {:.2} s", summary.wall_seconds);
    Ok(())
}

fn gen_data(args: GenDataArgs, mode: ExecMode) -> Result<()> {
    let resolved = resolve_scenario(
        &args.scenario,
        args.config.as_deref(),
        args.seed,
        2000,
        ControlMode::FixedTime,
        RouterMode::Shortest,
    )?;
    let cfg = DatasetConfig {
        runs: args.runs,
        duration: resolved.cfg.duration,
        seed: resolved.cfg.seed,
        control_mode: resolved.cfg.control_mode,
        spawns: resolved.cfg.spawns.clone(),
    };
    fs::create_dir_all(&args.out_dir)?;
    fs::write(args.out_dir.join("network.toml"), &resolved.net.text)?;
    let manifest = generate_dataset(&resolved.net.graph, &cfg, &args.out_dir, mode)?;
    println!(
        "wrote {} runs x {} ticks to {} (train/eval/validation = {}/{}/{})",
        manifest.runs,
        manifest.duration,
        args.out_dir.display(),
        manifest.train.len(),
        manifest.eval.len(),
        manifest.validation.len()
    );
    if let Some(w) = &manifest.warning {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn fit_cmd(args: FitArgs, mode: ExecMode) -> Result<()> {
    let (net, manifest) = open_dataset(&args.data)?;
    let train = load_split(&args.data, &manifest, &manifest.train, net.graph.len())?;
    let model = fit(
        &net.graph,
        &train,
        FitConfig {
            include_self_lag: args.self_lag,
            window: args.window,
        },
        mode,
    )?;
    model.save(&args.out)?;
    let transitions: usize = train
        .iter()
        .map(|r| (r.len() / args.window).saturating_sub(1))
        .sum();
    println!(
        "wrote {} (fitted on {} runs, {} transitions at {} ticks/step)",
        args.out.display(),
        train.len(),
        transitions,
        args.window
    );
    Ok(())
}

fn eval_forecast_cmd(args: EvalForecastArgs, mode: ExecMode) -> Result<()> {
    let (net, manifest) = open_dataset(&args.data)?;
    let horizons: Vec<usize> = parse_listed(&args.horizons, "horizon")?;
    let train = load_split(&args.data, &manifest, &manifest.train, net.graph.len())?;
    let eval_runs = load_split(&args.data, &manifest, &manifest.eval, net.graph.len())?;
    let model = match &args.model {
        Some(p) => Some(PropagationModel::load(p, &net.graph)?),
        None => None,
    };
    let fit_cfg = FitConfig {
        include_self_lag: args.self_lag,
        window: args.window,
    };
    let rows = eval_forecast(&net.graph, &train, &eval_runs, model, fit_cfg, &horizons, mode)?;
    write_eval_csv(&args.out, &manifest.config_hash, &rows)?;
    println!("wrote {}", args.out.display());
    println!("horizon  const_mae  ar_mae  prop_mae");
    for r in &rows {
        println!(
            "{:>7}  {:>9.4}  {:>6.4}  {:>8.4}",
            r.horizon, r.constant.mae, r.ar.mae, r.propagation.mae
        );
    }
    Ok(())
}

fn compare(args: CompareArgs, mode: ExecMode) -> Result<()> {
    let file = ScenarioFile::default();
    let net = resolve_network(&args.scenario, &file)?;
    let model = match &args.scenario.model {
        Some(p) => Some(PropagationModel::load(p, &net.graph)?),
        None => None,
    };
    let p_target = args.scenario.p_target.unwrap_or(0.5);
    let cfg = CompareConfig {
        preset: args
            .scenario
            .preset
            .clone()
            .unwrap_or_else(|| "evening-rush".into()),
        duration: args.scenario.duration.unwrap_or(600),
        seeds: parse_listed(&args.seeds, "seed")?,
        rv_rates: parse_listed(&args.rates, "robot rate")?,
        rv_low: args.scenario.rv_low.unwrap_or(0.20),
        p_target,
        lambda: args.scenario.lambda.unwrap_or(LAMBDA),
        cadence: args.scenario.cadence.unwrap_or(100),
        horizon: args.scenario.horizon.unwrap_or(100),
    };
    let cells = compare_baselines(&net.graph, &cfg, model.as_ref(), &args.out_dir, mode)?;
    println!("wrote {}", args.out_dir.join("compare.csv").display());
    println!("method                rv_rate  avg_wait");
    for c in &cells {
        println!("{:<21} {:>7.2}  {:>8.3}", c.method, c.rv_rate, c.avg_wait);
    }
    Ok(())
}
