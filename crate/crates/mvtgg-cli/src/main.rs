//! Command-line front end: translate whole histories, synchronize saved
//! states against modification files, project single versions, verify the
//! multi-version engine against per-version runs, benchmark strategies,
//! generate random histories, and compact snapshots.
//!
//! Exit codes: 0 on success, 1 when results disagree (verification
//! mismatch, benchmark cross-check failure, or an internal error), 2 on
//! unusable input (unknown flags, malformed files, bad configuration).
//! Setting `MVTGG_SEED` switches every match schedule (and the generator)
//! to that seed, overriding any `--seed` flag.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use mvtgg::bench::{bench_run, BenchConfig, Strategy};
use mvtgg::error::Error;
use mvtgg::formats::{self, SNAPSHOT_SCHEMA, SVM_STATE_SCHEMA, VERIFY_REPORT_SCHEMA};
use mvtgg::generator::{generate_history, HistoryConfig};
use mvtgg::matcher::TypeIndex;
use mvtgg::ids::VersionId;
use mvtgg::mvm::adapt::MvGrammar;
use mvtgg::mvm::history::{replay, History};
use mvtgg::mvm::model::{project_version, transform_history};
use mvtgg::mvm::sync::apply_modification;
use mvtgg::oracle::{
    check_batch_equivalence, check_initial_projection, check_sync_equivalence, EquivalenceReport,
};
use mvtgg::tgg::Grammar;
use mvtgg::svm::SvmWorld;
use mvtgg::tgg::triplet::Schedule;

#[derive(Parser)]
#[command(name = "mvtgg", about = "Triple-graph-grammar transformation over multi-version models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Which representation a command works on: one triplet per version, or
/// one shared multi-version encoding.
#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
enum Mode {
    /// Per-version translation; state files hold one triplet per version.
    Svm,
    /// Joint translation; state files hold one multi-version snapshot.
    Mvm,
}

#[derive(Subcommand)]
enum Command {
    /// Translates every version of a history and writes the state file.
    Transform {
        /// Grammar file.
        #[arg(long, value_name = "FILE")]
        tgg: PathBuf,
        /// History file.
        #[arg(long, value_name = "FILE")]
        history: PathBuf,
        /// Representation to translate into.
        #[arg(long, value_enum, default_value_t = Mode::Mvm)]
        strategy: Mode,
        /// Output state file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Applies a modification file to a saved state, translating as it
    /// goes, and writes the updated state.
    Sync {
        /// Grammar file.
        #[arg(long, value_name = "FILE")]
        tgg: PathBuf,
        /// State file from `transform` or a previous `sync`.
        #[arg(long, value_name = "FILE")]
        state: PathBuf,
        /// Modification file.
        #[arg(long, value_name = "FILE")]
        mods: PathBuf,
        /// Representation the state file uses.
        #[arg(long, value_enum, default_value_t = Mode::Mvm)]
        strategy: Mode,
        /// Output state file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Extracts one version from a state file as a plain graph.
    Project {
        /// Grammar file.
        #[arg(long, value_name = "FILE")]
        tgg: PathBuf,
        /// State file of either representation.
        #[arg(long, value_name = "FILE")]
        state: PathBuf,
        /// Version to extract.
        #[arg(long, value_name = "N")]
        version: u32,
        /// Output graph file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Checks the joint translation against independent per-version runs
    /// and prints a verdict report; exits 1 on any mismatch.
    Verify {
        /// Grammar file.
        #[arg(long, value_name = "FILE")]
        tgg: PathBuf,
        /// History file.
        #[arg(long, value_name = "FILE")]
        history: PathBuf,
        /// Optional modification file; adds a synchronization check.
        #[arg(long, value_name = "FILE")]
        mods: Option<PathBuf>,
    },
    /// Times the selected strategies on one workload, cross-checks their
    /// results, and writes a report.
    Bench {
        /// Grammar file.
        #[arg(long, value_name = "FILE")]
        tgg: PathBuf,
        /// History file.
        #[arg(long, value_name = "FILE")]
        history: PathBuf,
        /// Optional modification file for the incremental strategies.
        #[arg(long, value_name = "FILE")]
        mods: Option<PathBuf>,
        /// Comma-separated strategy list.
        #[arg(
            long,
            value_name = "LIST",
            value_delimiter = ',',
            default_value = "svm-b,mvm-b,svm-i,mvm-i"
        )]
        strategies: Vec<String>,
        /// Timing repetitions per strategy; medians are reported.
        #[arg(long, value_name = "N", default_value_t = 1)]
        repeat: usize,
        /// Output report file.
        #[arg(long, value_name = "FILE")]
        report: PathBuf,
        /// Corrupts one result before the cross-check (testing hook).
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Generates a random history file.
    Generate {
        /// Generator seed.
        #[arg(long, value_name = "N", default_value_t = 0)]
        seed: u64,
        /// Number of versions, including the root.
        #[arg(long, value_name = "N", default_value_t = HistoryConfig::default().versions)]
        versions: usize,
        /// Chance that a change starts a new branch.
        #[arg(long = "branch-p", value_name = "X", default_value_t = HistoryConfig::default().branch_probability)]
        branch_p: f64,
        /// Chance that a version merges two earlier versions.
        #[arg(long = "merge-p", value_name = "X", default_value_t = HistoryConfig::default().merge_probability)]
        merge_p: f64,
        /// Delta operations per change version.
        #[arg(long, value_name = "N", default_value_t = HistoryConfig::default().change_ops)]
        ops: usize,
        /// Output history file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Rewrites a snapshot without its dead elements (present in no
    /// version).
    Compact {
        /// Grammar file.
        #[arg(long, value_name = "FILE")]
        tgg: PathBuf,
        /// Snapshot file.
        #[arg(long, value_name = "FILE")]
        state: PathBuf,
        /// Output snapshot file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Input(_) | Error::Format(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

/// The match schedule every command uses: seeded when `MVTGG_SEED` is
/// set, deterministic first-match otherwise.
fn schedule() -> Result<Schedule, Error> {
    match env_seed()? {
        Some(seed) => Ok(Schedule::seeded(seed)),
        None => Ok(Schedule::default()),
    }
}

fn env_seed() -> Result<Option<u64>, Error> {
    match std::env::var("MVTGG_SEED") {
        Ok(s) => s
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|_| Error::input(format!("MVTGG_SEED must be an unsigned integer, got `{s}`"))),
        Err(_) => Ok(None),
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path)
        .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), Error> {
    fs::write(path, contents)
        .map_err(|e| Error::input(format!("cannot write {}: {e}", path.display())))
}

fn load_grammar(path: &Path) -> Result<Grammar, Error> {
    formats::grammar_from_json(&read(path)?)
}

fn load_history(path: &Path) -> Result<History, Error> {
    formats::history_from_json(&read(path)?)
}

fn load_mods(path: &Path) -> Result<Vec<mvtgg::mvm::sync::Modification>, Error> {
    formats::mods_from_json(&read(path)?)
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Transform { tgg, history, strategy, out } => {
            let grammar = load_grammar(&tgg)?;
            let history = load_history(&history)?;
            let schedule = schedule()?;
            let (versions, applications, state) = match strategy {
                Mode::Svm => {
                    let (world, applications) = SvmWorld::transform(&history, &grammar, &schedule)?;
                    let n = world.versions.len();
                    (n, applications, formats::svm_state_to_json(&world)?)
                }
                Mode::Mvm => {
                    let mv = MvGrammar::new(&grammar)?;
                    let tg = Arc::new(grammar.source_type_graph().clone());
                    let replayed = replay(&history, &tg)?;
                    let (model, applications) = transform_history(&replayed, &mv, &schedule)?;
                    (model.dag.version_count(), applications, formats::snapshot_to_json(&model)?)
                }
            };
            write(&out, &state)?;
            println!(
                "transformed {versions} versions in {applications} applications; wrote {}",
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Sync { tgg, state, mods, strategy, out } => {
            let grammar = load_grammar(&tgg)?;
            let mods = load_mods(&mods)?;
            let schedule = schedule()?;
            let (applications, revocations, updated) = match strategy {
                Mode::Svm => {
                    let mut world = formats::svm_state_from_json(&read(&state)?, &grammar)?;
                    let mut applications = 0;
                    let mut revocations = 0;
                    for m in &mods {
                        let outcome = world.apply(m, &grammar, &schedule)?;
                        applications += outcome.applications;
                        revocations += outcome.revoked;
                    }
                    (applications, revocations, formats::svm_state_to_json(&world)?)
                }
                Mode::Mvm => {
                    let mv = MvGrammar::new(&grammar)?;
                    let mut model =
                        formats::snapshot_from_json(&read(&state)?, &mv.schema.type_graph)?;
                    let mut index = TypeIndex::build(&model.graph);
                    let mut applications = 0;
                    let mut revocations = 0;
                    for m in &mods {
                        let outcome = apply_modification(&mut model, &mv, &mut index, m, &schedule)?;
                        applications += outcome.applications;
                        revocations += outcome.revocations;
                    }
                    (applications, revocations, formats::snapshot_to_json(&model)?)
                }
            };
            write(&out, &updated)?;
            println!(
                "synchronized {} modifications ({applications} applications, {revocations} revocations); wrote {}",
                mods.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Project { tgg, state, version, out } => {
            let grammar = load_grammar(&tgg)?;
            let contents = read(&state)?;
            let v = VersionId(version);
            let graph = match formats::schema_of(&contents)?.as_str() {
                SNAPSHOT_SCHEMA => {
                    let mv = MvGrammar::new(&grammar)?;
                    let model = formats::snapshot_from_json(&contents, &mv.schema.type_graph)?;
                    project_version(&model, &grammar, &mv.schema, v)?
                }
                SVM_STATE_SCHEMA => {
                    let world = formats::svm_state_from_json(&contents, &grammar)?;
                    let sv = world
                        .versions
                        .get(&v)
                        .ok_or_else(|| Error::input(format!("unknown version {v}")))?;
                    sv.state.graph.clone()
                }
                other => {
                    return Err(Error::format(format!(
                        "expected a state file, found schema `{other}`"
                    )))
                }
            };
            let elements = graph.element_count();
            write(&out, &formats::graph_to_json(&graph)?)?;
            println!("projected version {version} ({elements} elements); wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { tgg, history, mods } => {
            let grammar = load_grammar(&tgg)?;
            let history = load_history(&history)?;
            let schedule = schedule()?;
            let initial = check_initial_projection(&history, &grammar)?;
            let batch = check_batch_equivalence(&history, &grammar, &schedule)?;
            let sync = match mods {
                Some(path) => {
                    let mods = load_mods(&path)?;
                    Some(check_sync_equivalence(&history, &mods, &grammar, &schedule)?)
                }
                None => None,
            };
            let ok = initial.ok() && batch.ok() && sync.as_ref().map_or(true, |s| s.ok());
            let mut report = serde_json::json!({
                "schema": VERIFY_REPORT_SCHEMA,
                "ok": ok,
                "initial_projection": verdicts(&initial),
                "batch": verdicts(&batch),
            });
            if let Some(sync) = &sync {
                report["synchronization"] = sync
                    .steps
                    .iter()
                    .enumerate()
                    .map(|(i, step)| {
                        serde_json::json!({ "modification": i, "versions": verdicts(step) })
                    })
                    .collect();
            }
            println!("{:#}", report);
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Bench { tgg, history, mods, strategies, repeat, report, inject_fault } => {
            let grammar = load_grammar(&tgg)?;
            let history = load_history(&history)?;
            let mods = match mods {
                Some(path) => load_mods(&path)?,
                None => Vec::new(),
            };
            let strategies = strategies
                .iter()
                .map(|s| s.parse::<Strategy>())
                .collect::<Result<Vec<_>, _>>()?;
            let cfg = BenchConfig { strategies, repeat, schedule: schedule()?, inject_fault };
            let result = bench_run(&history, &mods, &grammar, &cfg)?;
            for s in &result.strategies {
                println!(
                    "{}: init {:.1}ms, index {:.1}ms, execute {:.1}ms; {} applications, {} elements, {} bytes",
                    s.strategy,
                    s.phases.init,
                    s.phases.index,
                    s.phases.execute,
                    s.applications,
                    s.elements,
                    s.serialized_bytes
                );
            }
            write(&report, &formats::bench_report_to_json(&result)?)?;
            let checked = if result.cross_checked { "results cross-checked" } else { "single strategy" };
            println!("{checked}; wrote {}", report.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Generate { seed, versions, branch_p, merge_p, ops, out } => {
            let seed = env_seed()?.unwrap_or(seed);
            let cfg = HistoryConfig {
                versions,
                branch_probability: branch_p,
                merge_probability: merge_p,
                change_ops: ops,
                ..HistoryConfig::default()
            };
            let history = generate_history(&cfg, seed);
            write(&out, &formats::history_to_json(&history)?)?;
            println!("generated {} versions (seed {seed}); wrote {}", versions, out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Compact { tgg, state, out } => {
            let grammar = load_grammar(&tgg)?;
            let mv = MvGrammar::new(&grammar)?;
            let mut model = formats::snapshot_from_json(&read(&state)?, &mv.schema.type_graph)?;
            let dropped = model.compact()?;
            write(&out, &formats::snapshot_to_json(&model)?)?;
            println!("dropped {dropped} dead elements; wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Per-version verdict rows for the report, with a divergence certificate
/// on failures.
fn verdicts(report: &EquivalenceReport) -> serde_json::Value {
    report
        .checks
        .iter()
        .map(|c| {
            if c.ok {
                serde_json::json!({ "version": c.version, "ok": true })
            } else {
                serde_json::json!({ "version": c.version, "ok": false, "detail": c.detail })
            }
        })
        .collect()
}
