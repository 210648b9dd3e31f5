//! Command-line front end: initialize and run simulated evaluations,
//! drive individual live-run phases against configured providers, import
//! externally keyed items, and render reports.
//!
//! Run directories are self-describing: `manifest.json` defines the run,
//! JSONL files hold the records, `reports/` holds the rendered outputs.
//! A `sim_cohort.json` in the run directory routes every phase through
//! the simulated cohort instead of live endpoints. Live credentials come
//! only from `PEERRANK_<PROVIDER>_API_KEY` environment variables.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use peerrank::groundtruth::{self, BenchmarkItem, BenchmarkKind};
use peerrank::pipeline::phases::{
    self, PhaseError, PipelineConfig,
};
use peerrank::providers::{ProviderRegistry, ProvidersConfig, RegistryError};
use peerrank::report::{self, ReportError};
use peerrank::sim::{self, SimCohortConfig, SimError, SimWorld};
use peerrank::store::{RunStore, StoreError};
use peerrank::types::{Category, QuestionId, Regime, RunManifest};

const SIM_COHORT_FILE: &str = "sim_cohort.json";
const PROVIDERS_FILE: &str = "providers.json";

#[derive(Parser)]
#[command(
    name = "peerrank",
    version,
    about = "Autonomous peer evaluation for language-model cohorts",
    long_about = "Models write questions for each other, answer them (with web grounding \
                  scoped to time-sensitive questions), and judge each other's answers under \
                  bias-controlled presentation regimes. The toolchain aggregates scores, \
                  quantifies self/name/position biases, computes pairwise ratings, and \
                  validates peer scores against keyed benchmarks."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Initialize (if needed) and run a fully simulated evaluation end to
    /// end, reports included. Re-running resumes and is idempotent.
    Simulate(SimulateArgs),
    /// Run the question-generation phase of an initialized run directory.
    Generate(PhaseArgs),
    /// Run the answering phase; time-sensitive questions are grounded
    /// through the configured retrieval provider.
    Answer(PhaseArgs),
    /// Run peer judging for one regime (or every manifest regime).
    /// Judging never touches retrieval.
    Judge(JudgeArgs),
    /// Import externally keyed benchmark items and run the closed-world
    /// answer and judging phases against them.
    Validate(ValidateArgs),
    /// Print the leaderboard and headline biases to stdout.
    Aggregate(DirArgs),
    /// Render the full report bundle under <DIR>/reports/.
    Report(DirArgs),
}

#[derive(Args)]
struct DirArgs {
    /// Run directory.
    #[arg(long)]
    dir: PathBuf,
}

#[derive(Args)]
struct CommonPhaseArgs {
    /// Run directory (must contain manifest.json).
    #[arg(long)]
    dir: PathBuf,
    /// Providers config for live runs; defaults to <DIR>/providers.json.
    /// Ignored when the run directory holds a sim_cohort.json.
    #[arg(long)]
    providers: Option<PathBuf>,
    /// Concurrent provider calls in flight per phase.
    #[arg(long)]
    buffer: Option<usize>,
    /// Abort a phase when more than this fraction of its tasks fail.
    #[arg(long)]
    max_gap_rate: Option<f64>,
}

#[derive(Args)]
struct PhaseArgs {
    #[command(flatten)]
    common: CommonPhaseArgs,
}

#[derive(Args)]
struct JudgeArgs {
    #[command(flatten)]
    common: CommonPhaseArgs,
    /// Judge under one regime only (shuffle_only | blind_only |
    /// shuffle_blind); defaults to every regime on the manifest.
    #[arg(long)]
    regime: Option<String>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Adapter {
    /// Native JSONL: one benchmark item object per line.
    Canonical,
    /// Multiple-choice rows with mc1_targets choices/labels.
    Truthfulqa,
    /// Word problems whose answer line follows "####".
    Gsm8k,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: CommonPhaseArgs,
    /// Benchmark items file (JSONL).
    #[arg(long)]
    items: PathBuf,
    /// Input format of --items.
    #[arg(long, value_enum, default_value_t = Adapter::Canonical)]
    adapter: Adapter,
}

#[derive(Args)]
struct SimulateArgs {
    /// Run directory (created when missing).
    #[arg(long)]
    dir: PathBuf,
    /// Master seed; the whole run derives from it.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Simulated cohort size (ignored with --cohort or on resume).
    #[arg(long, default_value_t = 4)]
    models: usize,
    /// Total question corpus size, distributed round-robin over authors.
    #[arg(long, default_value_t = 20)]
    questions: usize,
    /// Synthesize this many keyed benchmark items for ground-truth
    /// validation (0 skips the closed-world phases).
    #[arg(long, default_value_t = 0)]
    benchmark: usize,
    /// Persona config to use instead of the built-in default cohort.
    #[arg(long)]
    cohort: Option<PathBuf>,
    /// Concurrent provider calls in flight per phase.
    #[arg(long)]
    buffer: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {source}")]
    ReadFile {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Phase(#[from] PhaseError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

impl CliError {
    /// Stable exit codes by failure class: 2 usage/config, 3 provider
    /// wiring, 4 too many gapped tasks, 5 run-directory data problems.
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::ReadFile { .. } | CliError::Sim(_) => 2,
            CliError::Registry(_) => 3,
            CliError::Phase(PhaseError::GapRate { .. }) => 4,
            CliError::Phase(PhaseError::Registry(_)) => 3,
            CliError::Phase(PhaseError::Store(_)) | CliError::Store(_) => 5,
            CliError::Report(_) => 1,
        }
    }
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::ReadFile {
        path: path.to_path_buf(),
        source,
    })
}

fn pipeline_config(buffer: Option<usize>, max_gap_rate: Option<f64>) -> PipelineConfig {
    let mut config = PipelineConfig::default();
    if let Some(buffer) = buffer {
        config.buffer = buffer.max(1);
    }
    if let Some(rate) = max_gap_rate {
        config.max_gap_rate = rate.clamp(0.0, 1.0);
    }
    config
}

/// Loads the simulated world for a run directory, when it is a simulated
/// run (marked by sim_cohort.json).
fn sim_world_for(store: &RunStore) -> Result<Option<SimWorld>, CliError> {
    let path = store.dir().join(SIM_COHORT_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let config: SimCohortConfig = serde_json::from_str(&read_to_string(&path)?)
        .map_err(|e| CliError::Usage(format!("invalid {}: {e}", path.display())))?;
    let world = SimWorld::new(store.manifest().seed, config.profiles)?
        .with_benchmark(store.benchmark_items());
    Ok(Some(world))
}

/// Builds the provider registry for a run: the simulated world when the
/// run directory declares one, otherwise live endpoints from the
/// providers config. `grounded` controls whether the retrieval provider
/// is required and wired (only the answering phase needs it).
fn registry_for(
    store: &RunStore,
    providers_path: &Option<PathBuf>,
    grounded: bool,
) -> Result<ProviderRegistry, CliError> {
    if let Some(world) = sim_world_for(store)? {
        return Ok(world.registry());
    }
    let path = providers_path
        .clone()
        .unwrap_or_else(|| store.dir().join(PROVIDERS_FILE));
    let config = ProvidersConfig::from_json_str(&read_to_string(&path)?)?;
    let manifest = store.manifest();
    let grounding = grounded.then_some(manifest.grounding_provider.as_str());
    Ok(ProviderRegistry::from_config(
        &config,
        &manifest.cohort,
        grounding,
    )?)
}

fn open_store(dir: &Path) -> Result<RunStore, CliError> {
    if !dir.join("manifest.json").exists() {
        return Err(CliError::Usage(format!(
            "{} has no manifest.json; initialize the run first (see `peerrank simulate` \
             for simulated runs, or place a manifest for live runs)",
            dir.display()
        )));
    }
    Ok(RunStore::open(dir)?)
}

fn phase_line(store: &RunStore, phase: &str) {
    if let Some(record) = store.phase(phase) {
        println!(
            "phase {phase}: {:?}, {} succeeded, {} gaps of {} tasks",
            record.status, record.succeeded, record.gaps, record.tasks_total
        );
    }
}

/// Synthetic keyed items for simulated validation: half multiple choice,
/// half numeric, with planted keys.
fn synthetic_benchmark(count: usize) -> Vec<BenchmarkItem> {
    (0..count)
        .map(|i| {
            if i % 2 == 0 {
                let key_index = i % 4;
                BenchmarkItem {
                    question_id: QuestionId::benchmark(&format!("simmc_{i:04}")),
                    kind: BenchmarkKind::MultipleChoice,
                    category: Category::FactualKnowledge,
                    text: format!(
                        "Simulated keyed question {i}: which option is marked correct in the key?"
                    ),
                    choices: (0..4)
                        .map(|c| {
                            if c == key_index {
                                format!("option {c} (keyed)")
                            } else {
                                format!("option {c}")
                            }
                        })
                        .collect(),
                    key: char::from(b'A' + key_index as u8).to_string(),
                }
            } else {
                BenchmarkItem {
                    question_id: QuestionId::benchmark(&format!("simnum_{i:04}")),
                    kind: BenchmarkKind::NumericExact,
                    category: Category::ReasoningLogic,
                    text: format!("Simulated numeric problem {i}: state the keyed value."),
                    choices: vec![],
                    key: format!("{}", 10 + 3 * i),
                }
            }
        })
        .collect()
}

async fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let dir = &args.dir;
    let mut store = if dir.join("manifest.json").exists() {
        println!("resuming simulated run in {}", dir.display());
        RunStore::open(dir)?
    } else {
        let profiles = match &args.cohort {
            Some(path) => {
                let config: SimCohortConfig = serde_json::from_str(&read_to_string(path)?)
                    .map_err(|e| {
                        CliError::Usage(format!("invalid cohort config {}: {e}", path.display()))
                    })?;
                config.profiles
            }
            None => {
                if args.models < 2 {
                    return Err(CliError::Usage(
                        "--models must be at least 2 (peers are required)".into(),
                    ));
                }
                sim::default_cohort(args.models)
            }
        };
        // Validate the cohort before any directory is created.
        let world = SimWorld::new(args.seed, profiles.clone())?;
        let manifest = RunManifest {
            run_id: dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "sim-run".to_string()),
            seed: args.seed,
            cohort: world.cohort_specs(),
            categories: Category::ALL.to_vec(),
            questions_total: args.questions,
            regimes: Regime::ALL.to_vec(),
            grounding_provider: "sim".to_string(),
            phase_state: Default::default(),
        };
        let store = RunStore::create(dir, manifest)?;
        let cohort_json = serde_json::to_string_pretty(&SimCohortConfig { profiles })
            .expect("profiles serialize");
        let cohort_path = dir.join(SIM_COHORT_FILE);
        std::fs::write(&cohort_path, cohort_json + "\n").map_err(|source| CliError::ReadFile {
            path: cohort_path,
            source,
        })?;
        println!("initialized simulated run in {}", dir.display());
        store
    };

    if args.benchmark > 0 && store.benchmark_items().is_empty() {
        for item in synthetic_benchmark(args.benchmark) {
            store.append_benchmark_item(item)?;
        }
        println!("planted {} keyed benchmark items", args.benchmark);
    }

    let registry = registry_for(&store, &None, true)?;
    let config = pipeline_config(args.buffer, None);
    phases::run_pipeline(&mut store, &registry, &config).await?;
    for phase in ["generate", "answer"] {
        phase_line(&store, phase);
    }
    for regime in &store.manifest().regimes.clone() {
        phase_line(&store, &phases::judge_phase_name(*regime));
    }

    let (report, paths) = report::write_reports(&store)?;
    print_leaderboard(&report);
    println!("reports:");
    for path in paths {
        println!("  {}", path.display());
    }
    Ok(())
}

async fn cmd_generate(args: PhaseArgs) -> Result<(), CliError> {
    let mut store = open_store(&args.common.dir)?;
    let registry = registry_for(&store, &args.common.providers, false)?;
    let config = pipeline_config(args.common.buffer, args.common.max_gap_rate);
    phases::generate_phase(&mut store, &registry, &config).await?;
    phase_line(&store, "generate");
    println!("questions on record: {}", store.questions().len());
    Ok(())
}

async fn cmd_answer(args: PhaseArgs) -> Result<(), CliError> {
    let mut store = open_store(&args.common.dir)?;
    let registry = registry_for(&store, &args.common.providers, true)?;
    let config = pipeline_config(args.common.buffer, args.common.max_gap_rate);
    phases::answer_phase(&mut store, &registry, &config).await?;
    phase_line(&store, "answer");
    println!("answers on record: {}", store.answers().len());
    Ok(())
}

async fn cmd_judge(args: JudgeArgs) -> Result<(), CliError> {
    let mut store = open_store(&args.common.dir)?;
    let regimes: Vec<Regime> = match &args.regime {
        Some(name) => vec![Regime::parse(name).ok_or_else(|| {
            CliError::Usage(format!(
                "unknown regime {name:?}; expected shuffle_only, blind_only, or shuffle_blind"
            ))
        })?],
        None => store.manifest().regimes.clone(),
    };
    let registry = registry_for(&store, &args.common.providers, false)?;
    // Judges get a chat-only view; there is no retrieval to reach.
    let judging = registry.judging_view();
    let config = pipeline_config(args.common.buffer, args.common.max_gap_rate);
    for regime in regimes {
        phases::judge_phase(&mut store, &judging, regime, &config).await?;
        phase_line(&store, &phases::judge_phase_name(regime));
    }
    Ok(())
}

async fn cmd_validate(args: ValidateArgs) -> Result<(), CliError> {
    let mut store = open_store(&args.common.dir)?;
    let text = read_to_string(&args.items)?;
    let items = match args.adapter {
        Adapter::Canonical => groundtruth::load_items(&text),
        Adapter::Truthfulqa => groundtruth::adapt_truthfulqa(&text),
        Adapter::Gsm8k => groundtruth::adapt_gsm8k(&text),
    }
    .map_err(|e| CliError::Usage(format!("{}: {e}", args.items.display())))?;
    let mut imported = 0usize;
    for item in items {
        if store.append_benchmark_item(item)?.created {
            imported += 1;
        }
    }
    println!(
        "imported {imported} new items ({} total on record)",
        store.benchmark_items().len()
    );
    let registry = registry_for(&store, &args.common.providers, false)?;
    let config = pipeline_config(args.common.buffer, args.common.max_gap_rate);
    phases::benchmark_answer_phase(&mut store, &registry, &config).await?;
    let judging = registry.judging_view();
    phases::benchmark_judge_phase(&mut store, &judging, &config).await?;
    phase_line(&store, phases::PHASE_BENCHMARK_ANSWER);
    phase_line(&store, phases::PHASE_BENCHMARK_JUDGE);
    Ok(())
}

fn print_leaderboard(report: &report::CohortReport) {
    let Some(section) = report
        .regimes
        .iter()
        .find(|s| s.regime == report.baseline_regime)
    else {
        println!("no evaluations on record yet");
        return;
    };
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:7.3}")).unwrap_or_else(|| "      -".into());
    let mut rows: Vec<_> = section.aggregates.iter().collect();
    rows.sort_by(|a, b| {
        b.peer_mean
            .partial_cmp(&a.peer_mean)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    println!(
        "leaderboard (regime {}, {} evaluations):",
        report.baseline_regime.name(),
        section.evaluation_count
    );
    println!("  rank  model                 peer    self    gives     elo");
    for (i, a) in rows.iter().enumerate() {
        let elo = report.elo.as_ref().and_then(|e| {
            e.models
                .iter()
                .position(|m| *m == a.model_id)
                .map(|idx| e.ratings[idx])
        });
        println!(
            "  {:>4}  {:<20} {} {} {} {}",
            i + 1,
            a.model_id,
            fmt(a.peer_mean),
            fmt(a.self_mean),
            fmt(a.generosity),
            elo.map(|r| format!("{r:7.1}")).unwrap_or_else(|| "      -".into()),
        );
    }
    let biased: Vec<String> = report
        .cohort
        .iter()
        .zip(&report.biases.self_preference)
        .filter_map(|(spec, bias)| bias.map(|b| format!("{} {b:+.2}", spec.model_id)))
        .collect();
    if !biased.is_empty() {
        println!("self-preference (self mean - peer mean): {}", biased.join(", "));
    }
    if let Some(slope) = report.biases.position_slope {
        println!("position slope (score per displayed position): {slope:+.3}");
    }
    if let Some(truth) = &report.truth {
        println!("ground-truth validation: {:?}", truth.peer_vs_accuracy);
    }
}

async fn cmd_aggregate(args: DirArgs) -> Result<(), CliError> {
    let store = open_store(&args.dir)?;
    let report = report::build_report(&store)?;
    print_leaderboard(&report);
    Ok(())
}

async fn cmd_report(args: DirArgs) -> Result<(), CliError> {
    let store = open_store(&args.dir)?;
    let (_, paths) = report::write_reports(&store)?;
    for path in paths {
        println!("{}", path.display());
    }
    Ok(())
}

async fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args).await,
        Command::Generate(args) => cmd_generate(args).await,
        Command::Answer(args) => cmd_answer(args).await,
        Command::Judge(args) => cmd_judge(args).await,
        Command::Validate(args) => cmd_validate(args).await,
        Command::Aggregate(args) => cmd_aggregate(args).await,
        Command::Report(args) => cmd_report(args).await,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .expect("tokio runtime");
    match runtime.block_on(run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            log::error!("{err}");
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
