//! The `cbs` command line: bounds, latency, simulate, verify and replay.
//!
//! Every command writes its report and a `manifest.json` into the output
//! directory and prints the report to stdout. Exit codes: 0 success, 1 I/O
//! error, 2 invalid input or usage, 3 bound violation or replay mismatch.

mod manifest;
mod simulate;
mod verify;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bounds::{full_report, render_latency_table, render_table, JMode, LatencyReport};
use crate::model::units::{parse_quantity, Dimension};
use crate::model::{load_config, reference_config, ConfigError, LoadError, Rat, ValidatedConfig};
use crate::scenarios::{
    derive_seed, random_config_any, read_scenario_csv, tightness_class1, tightness_class2, write_scenario_csv,
};
use crate::simulator::{
    check_bounds, check_structure, check_work_conservation, simulate, write_departures_csv, write_trace_csv, Scenario,
};

pub use manifest::{sha256_hex, ConfigRef, OutputFile, RunManifest};
pub use simulate::{ClassSummary, SimSummary};
pub use verify::{
    default_horizon, minimize_failure, run_campaign, run_checked, scenario_seed, CampaignConfig, ClassExtremum,
    ConfigOutcome, FirstViolation, VerifyReport,
};

const BUILTIN_CONFIG: &str = "builtin:reference";
const DEFAULT_OUT_DIR: &str = "cbs-out";

const UNITS_HELP: &str = "\
Units: lengths in configs accept b/bit/bits, Kb = 1000 bits, KB = 8000 bits (1 byte = 8 bits).
Reports print credits in bits or in Kb, where 1 Kb = 1000 bits.
Times accept s, ms, us, ns; rates accept bps, Kbps, Mbps, Gbps or Mb/s.

Exit codes: 0 ok, 1 I/O error, 2 invalid input or usage, 3 bound violation or replay mismatch.";

#[derive(Debug, Parser)]
#[command(name = "cbs", version, about = "Credit bounds and exact simulation for the Credit-Based Shaper", after_help = UNITS_HELP)]
pub struct Cli {
    /// Port config (TOML, or JSON by extension); defaults to the built-in
    /// 100 Mb/s three-class reference port
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Output directory for reports and manifest.json
    #[arg(long, global = true, env = "CBS_OUT_DIR")]
    pub out: Option<PathBuf>,
    /// Base seed for random configs and scenarios
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Credit upper and lower bounds of every AVB class
    Bounds(BoundsArgs),
    /// Service-curve slope and latency per class under each credit bound
    Latency(LatencyArgs),
    /// Simulate one scenario and compare the credit extrema with the bounds
    Simulate(SimulateArgs),
    /// Random fuzz campaign plus the tightness constructions
    Verify(VerifyArgs),
    /// Rerun the command recorded in a manifest and compare output hashes
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Treat AVB classes 3..p as best effort when computing J-bounds
    #[arg(long)]
    pub fold_j: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundFamily {
    New,
    J,
    H,
}

#[derive(Debug, Args)]
pub struct LatencyArgs {
    /// Credit-bound family that must apply to the selected classes
    #[arg(long, value_enum, default_value_t = BoundFamily::New)]
    pub bound: BoundFamily,
    /// Restrict the report to these classes
    #[arg(long)]
    pub class: Vec<usize>,
    /// Also evaluate this credit bound in bits (e.g. 0, 2640, 38000/7, 3Kb)
    #[arg(long)]
    pub credit_bound: Option<String>,
    #[arg(long)]
    pub fold_j: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Builtin {
    Tight1,
    Tight2,
    Empty,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario CSV with columns class,arrival_time,length,tiebreak_seq
    #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
    pub scenario: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub builtin: Option<Builtin>,
    /// Simulation horizon (e.g. 10ms); required for CSV and empty scenarios
    #[arg(long)]
    pub horizon: Option<String>,
    #[arg(long)]
    pub fold_j: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Draw this many random configs from the seed instead of using --config
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub random_configs: Option<u64>,
    /// Random scenarios per config
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub scenarios: u64,
    /// Horizon of every scenario; defaults to 200 maximum-size frames
    #[arg(long)]
    pub horizon: Option<String>,
    /// Worker threads (0 = all cores); the report does not depend on it
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Io(anyhow::Error),
    Invalid(Vec<String>),
    Violation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::Violation(_) => 3,
        }
    }

    fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(vec![msg.into()])
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Io(e)
    }
}

fn config_errors(errors: Vec<ConfigError>) -> CliError {
    CliError::Invalid(errors.iter().map(ToString::to_string).collect())
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let argv = recorded_args(&args[1..]);
    match execute(&cli, &argv) {
        Ok(()) => 0,
        Err(e) => {
            match &e {
                CliError::Io(err) => eprintln!("error: {err:#}"),
                CliError::Invalid(msgs) => {
                    for m in msgs {
                        eprintln!("error: {m}");
                    }
                }
                CliError::Violation(msg) => eprintln!("violation: {msg}"),
            }
            e.exit_code()
        }
    }
}

/// Arguments as stored in the manifest. The output directory is left out
/// so that runs into different directories record identical manifests.
fn recorded_args(args: &[OsString]) -> Vec<String> {
    let mut out = Vec::with_capacity(args.len());
    let mut iter = args.iter().map(|a| a.to_string_lossy().into_owned());
    while let Some(a) = iter.next() {
        if a == "--out" {
            iter.next();
        } else if !a.starts_with("--out=") {
            out.push(a);
        }
    }
    out
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// The config and its manifest reference.
fn load(cli: &Cli) -> Result<(ValidatedConfig, ConfigRef), CliError> {
    match &cli.config {
        None => {
            let cfg = reference_config();
            let hash = sha256_hex(cfg.config().to_toml().as_bytes());
            Ok((cfg, ConfigRef { path: BUILTIN_CONFIG.into(), sha256: hash }))
        }
        Some(path) => {
            let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
            let cfg = load_config(path).map_err(|e| match e {
                LoadError::Io { path, source } => CliError::Io(anyhow::anyhow!("cannot read {path}: {source}")),
                LoadError::Invalid(errors) => config_errors(errors),
            })?;
            Ok((cfg, ConfigRef { path: path.display().to_string(), sha256: sha256_hex(&bytes) }))
        }
    }
}

fn parse_time(text: &str) -> Result<Rat, CliError> {
    let t = parse_quantity(text, Dimension::Time).map_err(|e| CliError::invalid(format!("--horizon: {e}")))?;
    if !t.is_positive() {
        return Err(CliError::invalid(format!("--horizon: must be positive, got {text}")));
    }
    Ok(t)
}

fn j_mode(fold: bool) -> JMode {
    if fold {
        JMode::FoldIntoBe
    } else {
        JMode::Strict
    }
}

fn emit(cli: &Cli, out: &mut manifest::OutputDir, stem: &str, table: String, json: String) -> Result<(), CliError> {
    let (name, text) = match cli.format {
        Format::Table => (format!("{stem}.txt"), table),
        Format::Json => (format!("{stem}.json"), json),
    };
    out.write(&name, text.as_bytes())?;
    print!("{text}");
    Ok(())
}

struct Run {
    command: &'static str,
    config: ConfigRef,
    seeds: Vec<u64>,
    horizon: Option<String>,
}

fn finish(run: Run, argv: &[String], out: manifest::OutputDir) -> Result<(), CliError> {
    let m = RunManifest {
        command: run.command.into(),
        argv: argv.to_vec(),
        config: run.config,
        seeds: run.seeds,
        horizon: run.horizon,
        outputs: out.written,
        version: env!("CARGO_PKG_VERSION").into(),
    };
    let path = out.root.join("manifest.json");
    fs::write(&path, m.to_json()).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn execute(cli: &Cli, argv: &[String]) -> Result<(), CliError> {
    match &cli.command {
        Command::Bounds(a) => cmd_bounds(cli, a, argv),
        Command::Latency(a) => cmd_latency(cli, a, argv),
        Command::Simulate(a) => cmd_simulate(cli, a, argv),
        Command::Verify(a) => cmd_verify(cli, a, argv),
        Command::Replay(a) => cmd_replay(cli, a),
    }
}

fn cmd_bounds(cli: &Cli, args: &BoundsArgs, argv: &[String]) -> Result<(), CliError> {
    let (cfg, config) = load(cli)?;
    let report = full_report(&cfg, j_mode(args.fold_j));
    let root = out_dir(cli);
    let mut out = manifest::OutputDir::create(&root)?;
    emit(cli, &mut out, "bounds", render_table(&report), format!("{}\n", report.to_json()))?;
    finish(Run { command: "bounds", config, seeds: vec![], horizon: None }, argv, out)
}

fn cmd_latency(cli: &Cli, args: &LatencyArgs, argv: &[String]) -> Result<(), CliError> {
    let (cfg, config) = load(cli)?;
    let credit = match &args.credit_bound {
        Some(text) => {
            Some(parse_quantity(text, Dimension::Bits).map_err(|e| CliError::invalid(format!("--credit-bound: {e}")))?)
        }
        None => None,
    };
    let mode = j_mode(args.fold_j);
    let report = match args.bound {
        BoundFamily::J => LatencyReport::build_requiring_j(&cfg, mode, &args.class, credit.as_ref()),
        BoundFamily::New | BoundFamily::H => LatencyReport::build(&cfg, mode, &args.class, credit.as_ref()),
    }
    .map_err(|e| CliError::invalid(e.to_string()))?;
    let json = format!("{}\n", serde_json::to_string_pretty(&report).expect("report serializes"));
    let root = out_dir(cli);
    let mut out = manifest::OutputDir::create(&root)?;
    emit(cli, &mut out, "latency", render_latency_table(&report), json)?;
    finish(Run { command: "latency", config, seeds: vec![], horizon: None }, argv, out)
}

fn read_scenario(path: &Path, cfg: &ValidatedConfig, horizon: Rat) -> Result<Scenario, CliError> {
    let text = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let arrivals =
        read_scenario_csv(text.as_slice()).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    Ok(Scenario::with_config_gates(cfg, arrivals, horizon))
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs, argv: &[String]) -> Result<(), CliError> {
    let (cfg, config) = load(cli)?;
    let horizon = args.horizon.as_deref().map(parse_time).transpose()?;
    let need_horizon = || horizon.clone().ok_or_else(|| CliError::invalid("--horizon is required for this scenario"));
    let mut scenario = match (&args.scenario, args.builtin) {
        (Some(path), _) => read_scenario(path, &cfg, need_horizon()?)?,
        (None, Some(Builtin::Empty)) => Scenario::with_config_gates(&cfg, vec![], need_horizon()?),
        (None, Some(Builtin::Tight1)) => tightness_class1(&cfg),
        (None, Some(Builtin::Tight2)) => tightness_class2(&cfg).map_err(|e| CliError::invalid(e.to_string()))?,
        (None, None) => return Err(CliError::invalid("give --scenario or --builtin")),
    };
    if let Some(h) = &horizon {
        scenario.horizon = h.clone();
    }
    let result = simulate(&cfg, &scenario).map_err(|e| CliError::invalid(e.to_string()))?;
    let mut violations = check_bounds(&cfg, &result);
    violations.extend(check_structure(&cfg, &result));
    violations.extend(check_work_conservation(&cfg, &scenario, &result));
    let summary = SimSummary::build(&cfg, j_mode(args.fold_j), &result, violations);

    let root = out_dir(cli);
    let mut out = manifest::OutputDir::create(&root)?;
    let mut trace = Vec::new();
    write_trace_csv(&result.traces, &mut trace).context("cannot encode trace")?;
    out.write("trace.csv", &trace)?;
    let mut deps = Vec::new();
    write_departures_csv(&result.departures, &mut deps).context("cannot encode departures")?;
    out.write("departures.csv", &deps)?;
    emit(cli, &mut out, "summary", summary.render(), summary.to_json())?;
    let horizon = Some(scenario.horizon.to_string());
    finish(Run { command: "simulate", config, seeds: vec![], horizon }, argv, out)?;
    match summary.violations.first() {
        None => Ok(()),
        Some(v) => Err(CliError::Violation(format!("{} violation(s), first: {v}", summary.violations.len()))),
    }
}

fn cmd_verify(cli: &Cli, args: &VerifyArgs, argv: &[String]) -> Result<(), CliError> {
    let horizon = args.horizon.as_deref().map(parse_time).transpose()?;
    let (configs, config) = match args.random_configs {
        Some(n) => {
            let configs: Vec<CampaignConfig> = (0..n)
                .map(|k| {
                    let seed = derive_seed(cli.seed, k);
                    CampaignConfig { config: random_config_any(seed), seed: Some(seed) }
                })
                .collect();
            let hash = sha256_hex(format!("random_config_any:{}:{n}", cli.seed).as_bytes());
            (configs, ConfigRef { path: format!("random:{n}"), sha256: hash })
        }
        None => {
            let (cfg, config) = load(cli)?;
            (vec![CampaignConfig { config: cfg, seed: None }], config)
        }
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs).build().context("cannot start worker threads")?;
    let (report, failure) = pool.install(|| run_campaign(&configs, args.scenarios, cli.seed, horizon.as_ref()));

    let root = out_dir(cli);
    let mut out = manifest::OutputDir::create(&root)?;
    if let Some(f) = &failure {
        let cfg = &configs[f.config].config;
        let small = minimize_failure(&f.scenario, verify::still_violates(cfg));
        let mut port = cfg.config().clone();
        port.gates = small.gates.clone();
        let mut csv = Vec::new();
        write_scenario_csv(&small.arrivals, &mut csv).context("cannot encode scenario")?;
        out.write("repro/scenario.csv", &csv)?;
        out.write("repro/config.toml", port.to_toml().as_bytes())?;
        out.write("repro/horizon.txt", format!("{}\n", small.horizon).as_bytes())?;
    }
    emit(cli, &mut out, "verify", report.render(), report.to_json())?;
    let seeds = std::iter::once(cli.seed).chain(configs.iter().filter_map(|c| c.seed)).collect();
    let horizon = horizon.map(|h| h.to_string());
    finish(Run { command: "verify", config, seeds, horizon }, argv, out)?;
    match &report.first_violation {
        None => Ok(()),
        Some(v) => Err(CliError::Violation(format!(
            "{} violation(s), first: {}; minimized reproduction in {}",
            report.total_violations,
            v.violation,
            root.join("repro").display()
        ))),
    }
}

fn cmd_replay(cli: &Cli, args: &ReplayArgs) -> Result<(), CliError> {
    let recorded = RunManifest::read(&args.manifest)?;
    if recorded.config.path != BUILTIN_CONFIG && !recorded.config.path.starts_with("random:") {
        let bytes = fs::read(&recorded.config.path).with_context(|| format!("cannot read {}", recorded.config.path))?;
        if sha256_hex(&bytes) != recorded.config.sha256 {
            return Err(CliError::Violation(format!("{} changed since the recorded run", recorded.config.path)));
        }
    }
    let mut rerun = Cli::try_parse_from(std::iter::once("cbs".to_string()).chain(recorded.argv.iter().cloned()))
        .map_err(|e| CliError::invalid(format!("recorded arguments do not parse: {e}")))?;
    if matches!(rerun.command, Command::Replay(_)) {
        return Err(CliError::invalid("a replay manifest cannot be replayed"));
    }
    rerun.out = Some(out_dir(cli));
    let outcome = execute(&rerun, &recorded.argv);
    if let Err(CliError::Io(e)) = outcome {
        return Err(CliError::Io(e));
    }
    let fresh = RunManifest::read(&out_dir(cli).join("manifest.json"))?;
    if fresh != recorded {
        let differing: Vec<&str> =
            recorded.outputs.iter().filter(|o| !fresh.outputs.contains(o)).map(|o| o.path.as_str()).collect();
        return Err(CliError::Violation(format!("outputs differ from the manifest: {differing:?}")));
    }
    eprintln!("replay matches {} output(s)", recorded.outputs.len());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recorded_args_drop_the_output_directory() {
        let args: Vec<OsString> = ["--out", "a", "bounds", "--out=b", "--fold-j"].iter().map(OsString::from).collect();
        assert_eq!(recorded_args(&args), ["bounds", "--fold-j"]);
    }
}
