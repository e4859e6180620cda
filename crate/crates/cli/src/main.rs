//! `beap` command line: generate worlds, run suites and ablations, replay
//! and score trajectory logs.

mod settings;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use beap_core::harness::{
    ablation_rows, ablation_table, compute_metrics, counters_from_log, forced_outcome_suite, generate_suite,
    load_manifest, replay, run_ablations, run_worlds, summary_text, write_suite_outputs, write_worlds, HarnessError,
    SuiteSummary, SuiteWorld,
};
use beap_core::orchestrator::{parse_log, LogLine};
use beap_core::sim_env::{GenParams, ScenarioClass, WorldSpec};
use beap_core::state_space::canonical_json;
use clap::{Parser, Subcommand};

use settings::{RunSettings, ENDPOINT_VAR};

#[derive(Parser)]
#[command(name = "beap", version, about = "DFS task execution with multi-level backtracking over synthetic GUI worlds")]
struct Cli {
    /// TOML file with run settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate worlds and a manifest.
    Gen(GenArgs),
    /// Run one suite configuration.
    Run(SuiteArgs),
    /// Run the full, no-backtrack and no-tracker variants on the same worlds.
    Ablate(SuiteArgs),
    /// Re-execute a trajectory log against its worlds.
    Replay(ReplayArgs),
    /// Recompute metrics from a trajectory log.
    Metrics(MetricsArgs),
}

#[derive(clap::Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Generate the 10 x A, B, C forced-outcome suite instead of custom worlds.
    #[arg(long)]
    forced_suite: bool,
    /// Scenario class for custom worlds.
    #[arg(long, default_value = "B")]
    class: ScenarioClass,
    /// Number of custom worlds, seeded consecutively from --seed.
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long, default_value_t = 4)]
    depth: u32,
    #[arg(long, default_value_t = 2)]
    branching: u32,
    #[arg(long, default_value_t = 1)]
    traps: u32,
    #[arg(long, default_value_t = 0.3)]
    irreversible_fraction: f64,
    #[arg(long, default_value_t = 2)]
    world_detection_depth: u32,
}

#[derive(clap::Args)]
struct SuiteArgs {
    /// Manifest of the worlds to run; defaults to the forced-outcome suite
    /// generated from --seed.
    #[arg(long)]
    worlds: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    settings: RunSettings,
}

#[derive(clap::Args)]
struct ReplayArgs {
    /// Trajectory log to replay.
    #[arg(long)]
    log: PathBuf,
    /// Manifest of the worlds the log was produced on.
    #[arg(long)]
    worlds: PathBuf,
}

#[derive(clap::Args)]
struct MetricsArgs {
    #[arg(long)]
    log: PathBuf,
    /// Also write the metrics as JSON to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Suite(String),
    Divergence(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Suite(_) => 2,
            Failure::Divergence(_) => 3,
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::ReplayWorldMismatch { .. } => Failure::Divergence(e.to_string()),
            HarnessError::Io { .. } | HarnessError::Config(_) | HarnessError::Generate(_) => Failure::Config(e.to_string()),
            other => Failure::Suite(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = match &f {
                Failure::Config(m) => format!("configuration error: {m}"),
                Failure::Suite(m) => format!("suite failed: {m}"),
                Failure::Divergence(m) => format!("replay diverged: {m}"),
            };
            eprintln!("beap: {msg}");
            ExitCode::from(f.code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let file_settings = match &cli.config {
        Some(path) => RunSettings::from_toml_file(path).map_err(Failure::Config)?,
        None => RunSettings::default(),
    };
    match cli.command {
        Command::Gen(args) => gen(args),
        Command::Run(args) => run(args, file_settings),
        Command::Ablate(args) => ablate(args, file_settings),
        Command::Replay(args) => replay_log(args),
        Command::Metrics(args) => metrics(args),
    }
}

fn gen(args: GenArgs) -> Result<(), Failure> {
    let specs = if args.forced_suite {
        forced_outcome_suite(args.seed)
    } else {
        (0..args.count)
            .map(|i| {
                (
                    args.class,
                    GenParams {
                        depth: args.depth,
                        branching: args.branching,
                        n_traps: args.traps,
                        irreversible_fraction: args.irreversible_fraction,
                        detection_depth: args.world_detection_depth,
                        seed: args.seed + i,
                    },
                )
            })
            .collect()
    };
    let worlds = generate_suite(&specs)?;
    let manifest = write_worlds(&args.out, &specs, &worlds)?;
    emit(&format!("wrote {} worlds to {}\n", worlds.len(), manifest.display()));
    Ok(())
}

/// Load the requested worlds, or generate the forced-outcome suite and
/// store it under `<out>/worlds` so the run can be replayed later.
fn suite_worlds(args: &SuiteArgs, seed: u64) -> Result<Vec<SuiteWorld>, Failure> {
    match &args.worlds {
        Some(path) => Ok(load_manifest(path)?),
        None => {
            let specs = forced_outcome_suite(seed);
            let worlds = generate_suite(&specs)?;
            write_worlds(&args.out.join("worlds"), &specs, &worlds)?;
            Ok(worlds)
        }
    }
}

fn endpoint_env() -> Option<String> {
    std::env::var(ENDPOINT_VAR).ok().filter(|v| !v.is_empty())
}

fn run(args: SuiteArgs, file: RunSettings) -> Result<(), Failure> {
    let settings = file.overlay(&args.settings);
    let variant = if settings.no_backtrack == Some(true) {
        "no-backtrack"
    } else if settings.no_tracker == Some(true) {
        "no-tracker"
    } else {
        "full"
    };
    let config = settings.suite_config(variant, endpoint_env()).map_err(Failure::Config)?;
    let worlds = suite_worlds(&args, settings.seed())?;
    log::info!("running {} episodes with the {} policy", worlds.len(), config.policy.name());
    let results = run_worlds(&worlds, &config).map_err(|e| Failure::Suite(e.to_string()))?;
    let summary = SuiteSummary::new(variant, config.policy.name(), &results);
    write_suite_outputs(&args.out, &summary, &results).map_err(|e| Failure::Suite(e.to_string()))?;
    emit(&summary_text(&summary));
    Ok(())
}

fn ablate(args: SuiteArgs, file: RunSettings) -> Result<(), Failure> {
    let settings = file.overlay(&args.settings);
    let config = settings.suite_config("full", endpoint_env()).map_err(Failure::Config)?;
    let worlds = suite_worlds(&args, settings.seed())?;
    let runs = run_ablations(&worlds, &config).map_err(|e| Failure::Suite(e.to_string()))?;
    for run in &runs {
        write_suite_outputs(&args.out.join(&run.variant), &run.summary, &run.results)
            .map_err(|e| Failure::Suite(e.to_string()))?;
    }
    let rows = ablation_rows(&runs);
    let table = ablation_table(&rows);
    write_file(&args.out.join("ablation.txt"), &table)?;
    write_file(&args.out.join("ablation.json"), &canonical_json(&rows))?;
    emit(&table);
    Ok(())
}

/// Write to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Suite(format!("{}: {e}", path.display())))
}

fn read_log(path: &Path) -> Result<Vec<LogLine>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    parse_log(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn replay_log(args: ReplayArgs) -> Result<(), Failure> {
    let lines = read_log(&args.log)?;
    let worlds: BTreeMap<String, Arc<WorldSpec>> = load_manifest(&args.worlds)?
        .into_iter()
        .map(|w| (w.digest, w.spec))
        .collect();
    let report = replay(&lines, |digest| worlds.get(digest).cloned())?;
    match report.divergence {
        None => {
            emit(&format!("CLEAN: {} episodes, {} lines\n", report.episodes, report.lines));
            Ok(())
        }
        Some(d) => {
            emit(&format!("DIVERGED at line {} ({}): {}\n", d.line, d.episode_id, d.reason));
            Err(Failure::Divergence(format!("line {}: {}", d.line, d.reason)))
        }
    }
}

fn metrics(args: MetricsArgs) -> Result<(), Failure> {
    let lines = read_log(&args.log)?;
    let counters = counters_from_log(&lines).map_err(|e| Failure::Config(e.to_string()))?;
    let metrics = compute_metrics(&counters);
    let json = canonical_json(&metrics);
    if let Some(out) = &args.out {
        write_file(out, &json)?;
    }
    let pretty = serde_json::to_string_pretty(&metrics).map_err(|e| Failure::Suite(e.to_string()))?;
    emit(&format!("{pretty}\n"));
    Ok(())
}
