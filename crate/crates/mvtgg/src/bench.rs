//! Four-strategy benchmark harness over one scenario: a history plus an
//! optional modification sequence.
//!
//! The strategies are per-version batch translation (`svm-b`), joint
//! multi-version batch translation (`mvm-b`), copy-based per-version
//! incremental synchronization (`svm-i`), and joint multi-version
//! incremental synchronization (`mvm-i`). Batch strategies translate the
//! post-modification sources from scratch; incremental strategies
//! translate the initial history and then synchronize one modification at
//! a time, so all strategies end at the same logical state. Every
//! strategy's per-version results are cross-checked pairwise isomorphic
//! before a report is emitted — a benchmark of disagreeing results is
//! meaningless and aborts instead.
//!
//! Wall-clock time is attributed to three phases: `init` (rule derivation,
//! marking, model encoding), `index` (match-index construction), and
//! `execute` (rule applications and synchronization, including the state
//! copying the copy-based strategy pays per modification).

use crate::error::{Error, Result};
use crate::formats::{graph_to_json, snapshot_to_json};
use crate::graph::Graph;
use crate::ids::VersionId;
use crate::iso::isomorphic_with_bookkeeping;
use crate::matcher::TypeIndex;
use crate::mvm::adapt::MvGrammar;
use crate::mvm::history::{replay, History, ReplayedHistory};
use crate::mvm::model::{project_version, run_mv_fixpoint, MultiVersionModel};
use crate::mvm::sync::{apply_modification, Modification};
use crate::oracle::EvolvingSources;
use crate::svm::{SvmVersion, SvmWorld};
use crate::tgg::triplet::{init_translation, run_fixpoint, Schedule};
use crate::tgg::Grammar;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

pub const BENCH_REPORT_SCHEMA: &str = "mvtgg-bench-report/1";

/// One of the four benchmark strategies.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Batch: translate every version's source independently.
    SvmB,
    /// Batch: translate all versions jointly on the multi-version model.
    MvmB,
    /// Incremental: per-version states, copied and re-synchronized per
    /// modification.
    SvmI,
    /// Incremental: one multi-version model, synchronized per
    /// modification.
    MvmI,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::SvmB => "svm-b",
            Strategy::MvmB => "mvm-b",
            Strategy::SvmI => "svm-i",
            Strategy::MvmI => "mvm-i",
        }
    }

    pub const ALL: [Strategy; 4] =
        [Strategy::SvmB, Strategy::MvmB, Strategy::SvmI, Strategy::MvmI];
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| {
                Error::input(format!("unknown strategy `{s}` (svm-b, mvm-b, svm-i, mvm-i)"))
            })
    }
}

/// Benchmark parameters.
#[derive(Clone, Debug)]
pub struct BenchConfig {
    /// Strategies to run, in order; duplicates are rejected.
    pub strategies: Vec<Strategy>,
    /// Timing repetitions; reported times are medians.
    pub repeat: usize,
    pub schedule: Schedule,
    /// Testing hook: corrupt one result before the cross-check, proving
    /// the abort path fires.
    pub inject_fault: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            strategies: Strategy::ALL.to_vec(),
            repeat: 1,
            schedule: Schedule::default(),
            inject_fault: false,
        }
    }
}

/// Median wall-clock milliseconds per phase.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct PhaseMillis {
    pub init: f64,
    pub index: f64,
    pub execute: f64,
}

/// Per-version series entry (batch strategies).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VersionPoint {
    pub version: VersionId,
    /// Rule applications attributable to this version alone; absent for
    /// the joint strategy, where applications span versions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub applications: Option<usize>,
    pub elements: usize,
}

/// Per-modification series entry (incremental strategies).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModificationPoint {
    pub index: usize,
    pub millis: f64,
    pub applications: usize,
    pub revocations: usize,
}

/// Everything measured for one strategy.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StrategyRecord {
    pub strategy: Strategy,
    pub phases: PhaseMillis,
    pub applications: usize,
    pub revocations: usize,
    /// Stored elements: summed over per-version states, or the one
    /// multi-version graph.
    pub elements: usize,
    pub serialized_bytes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_version: Option<Vec<VersionPoint>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_modification: Option<Vec<ModificationPoint>>,
}

/// The benchmark result.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema: String,
    pub versions: usize,
    pub modifications: usize,
    pub repeat: usize,
    /// Whether per-version results were compared across strategies (they
    /// are whenever at least two strategies ran).
    pub cross_checked: bool,
    pub strategies: Vec<StrategyRecord>,
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("timings are finite"));
    let n = xs.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// One strategy execution: measurements plus the per-version result
/// graphs for cross-checking.
struct StrategyRun {
    phases: PhaseMillis,
    applications: usize,
    revocations: usize,
    elements: usize,
    serialized_bytes: usize,
    per_version: Option<Vec<VersionPoint>>,
    per_modification: Option<Vec<ModificationPoint>>,
    outputs: BTreeMap<VersionId, Graph>,
}

fn run_svm_batch(sources: &ReplayedHistory, grammar: &Grammar, schedule: &Schedule) -> Result<StrategyRun> {
    let mut phases = PhaseMillis::default();
    let mut applications = 0;
    let mut elements = 0;
    let mut serialized_bytes = 0;
    let mut per_version = Vec::new();
    let mut outputs = BTreeMap::new();
    for v in sources.dag.versions() {
        let t = Instant::now();
        let mut state = init_translation(sources.graph(v), grammar)?;
        phases.init += ms_since(t);
        let t = Instant::now();
        let mut index = TypeIndex::build(&state.graph);
        phases.index += ms_since(t);
        let t = Instant::now();
        let apps = run_fixpoint(&mut state, grammar, &mut index, schedule)?;
        phases.execute += ms_since(t);
        applications += apps;
        elements += state.graph.element_count();
        serialized_bytes += graph_to_json(&state.graph)?.len();
        per_version.push(VersionPoint {
            version: v,
            applications: Some(apps),
            elements: state.graph.element_count(),
        });
        outputs.insert(v, state.graph);
    }
    Ok(StrategyRun {
        phases,
        applications,
        revocations: 0,
        elements,
        serialized_bytes,
        per_version: Some(per_version),
        per_modification: None,
        outputs,
    })
}

fn run_mvm_batch(sources: &ReplayedHistory, grammar: &Grammar, schedule: &Schedule) -> Result<StrategyRun> {
    let mut phases = PhaseMillis::default();
    let t = Instant::now();
    let mv = MvGrammar::new(grammar)?;
    let mut model = MultiVersionModel::init(sources, &mv)?;
    phases.init = ms_since(t);
    let t = Instant::now();
    let mut index = TypeIndex::build(&model.graph);
    phases.index = ms_since(t);
    let t = Instant::now();
    let applications = run_mv_fixpoint(&mut model, &mv, &mut index, schedule)?;
    phases.execute = ms_since(t);

    let per_version = model
        .dag
        .versions()
        .map(|v| VersionPoint {
            version: v,
            applications: None,
            elements: model.presence.values().filter(|p| p.contains(v)).count(),
        })
        .collect();
    let mut outputs = BTreeMap::new();
    for v in model.dag.versions() {
        outputs.insert(v, project_version(&model, grammar, &mv.schema, v)?);
    }
    Ok(StrategyRun {
        phases,
        applications,
        revocations: 0,
        elements: model.graph.element_count(),
        serialized_bytes: snapshot_to_json(&model)?.len(),
        per_version: Some(per_version),
        per_modification: None,
        outputs,
    })
}

fn run_svm_incremental(
    history: &History,
    mods: &[Modification],
    grammar: &Grammar,
    schedule: &Schedule,
) -> Result<StrategyRun> {
    let tg = Arc::new(grammar.source_type_graph().clone());
    let initial = replay(history, &tg)?;
    let mirror = EvolvingSources::new(history, &tg)?;
    let mut phases = PhaseMillis::default();
    let mut applications = 0;
    let mut revocations = 0;

    // The initial per-version translation, with the three phases timed
    // separately (SvmVersion::translate would lump them together).
    let mut versions = BTreeMap::new();
    for v in initial.dag.versions() {
        let t = Instant::now();
        let state = init_translation(initial.graph(v), grammar)?;
        phases.init += ms_since(t);
        let t = Instant::now();
        let index = TypeIndex::build(&state.graph);
        phases.index += ms_since(t);
        let map = initial.graph(v).elements().map(|e| (e.id, e.id)).collect();
        let mut sv = SvmVersion { state, index, map, next_local: 0 };
        let t = Instant::now();
        applications += run_fixpoint(&mut sv.state, grammar, &mut sv.index, schedule)?;
        phases.execute += ms_since(t);
        sv.bump_next_local();
        versions.insert(v, sv);
    }
    let mut world = SvmWorld { mirror, versions };

    let mut per_modification = Vec::new();
    for (i, m) in mods.iter().enumerate() {
        let t = Instant::now();
        let out = world.apply(m, grammar, schedule)?;
        let millis = ms_since(t);
        phases.execute += millis;
        applications += out.applications;
        revocations += out.revoked;
        per_modification.push(ModificationPoint {
            index: i,
            millis,
            applications: out.applications,
            revocations: out.revoked,
        });
    }

    let mut elements = 0;
    let mut serialized_bytes = 0;
    let mut outputs = BTreeMap::new();
    for (v, sv) in world.versions {
        elements += sv.state.graph.element_count();
        serialized_bytes += graph_to_json(&sv.state.graph)?.len();
        outputs.insert(v, sv.state.graph);
    }
    Ok(StrategyRun {
        phases,
        applications,
        revocations,
        elements,
        serialized_bytes,
        per_version: None,
        per_modification: Some(per_modification),
        outputs,
    })
}

fn run_mvm_incremental(
    history: &History,
    mods: &[Modification],
    grammar: &Grammar,
    schedule: &Schedule,
) -> Result<StrategyRun> {
    let tg = Arc::new(grammar.source_type_graph().clone());
    let initial = replay(history, &tg)?;
    let mut phases = PhaseMillis::default();
    let t = Instant::now();
    let mv = MvGrammar::new(grammar)?;
    let mut model = MultiVersionModel::init(&initial, &mv)?;
    phases.init = ms_since(t);
    let t = Instant::now();
    let mut index = TypeIndex::build(&model.graph);
    phases.index = ms_since(t);
    let t = Instant::now();
    let mut applications = run_mv_fixpoint(&mut model, &mv, &mut index, schedule)?;
    phases.execute = ms_since(t);

    let mut revocations = 0;
    let mut per_modification = Vec::new();
    for (i, m) in mods.iter().enumerate() {
        let t = Instant::now();
        let out = apply_modification(&mut model, &mv, &mut index, m, schedule)?;
        let millis = ms_since(t);
        phases.execute += millis;
        applications += out.applications;
        revocations += out.revocations;
        per_modification.push(ModificationPoint {
            index: i,
            millis,
            applications: out.applications,
            revocations: out.revocations,
        });
    }

    let mut outputs = BTreeMap::new();
    for v in model.dag.versions() {
        outputs.insert(v, project_version(&model, grammar, &mv.schema, v)?);
    }
    Ok(StrategyRun {
        phases,
        applications,
        revocations,
        elements: model.graph.element_count(),
        serialized_bytes: snapshot_to_json(&model)?.len(),
        per_version: None,
        per_modification: Some(per_modification),
        outputs,
    })
}

fn run_strategy(
    strategy: Strategy,
    history: &History,
    mods: &[Modification],
    final_sources: &ReplayedHistory,
    grammar: &Grammar,
    schedule: &Schedule,
) -> Result<StrategyRun> {
    match strategy {
        Strategy::SvmB => run_svm_batch(final_sources, grammar, schedule),
        Strategy::MvmB => run_mvm_batch(final_sources, grammar, schedule),
        Strategy::SvmI => run_svm_incremental(history, mods, grammar, schedule),
        Strategy::MvmI => run_mvm_incremental(history, mods, grammar, schedule),
    }
}

/// Runs the configured strategies over the scenario and reports timings,
/// counts, and sizes. With two or more strategies, every version's results
/// are cross-checked pairwise isomorphic first; disagreement aborts.
pub fn bench_run(
    history: &History,
    mods: &[Modification],
    grammar: &Grammar,
    cfg: &BenchConfig,
) -> Result<BenchReport> {
    if cfg.strategies.is_empty() {
        return Err(Error::input("no strategies selected"));
    }
    if cfg.repeat == 0 {
        return Err(Error::input("repeat must be at least 1"));
    }
    {
        let mut seen = BTreeSet::new();
        for s in &cfg.strategies {
            if !seen.insert(*s) {
                return Err(Error::input(format!("strategy `{s}` selected twice")));
            }
        }
    }

    // Materialize the post-modification sources once; batch strategies
    // translate these, and the cross-check compares against them.
    let tg = Arc::new(grammar.source_type_graph().clone());
    let mut sources = EvolvingSources::new(history, &tg)?;
    for m in mods {
        sources.apply(m)?;
    }
    let final_versions: Vec<VersionId> = sources.dag.versions().collect();
    let graphs = final_versions.iter().map(|&v| sources.graph(v).clone()).collect();
    let final_sources = ReplayedHistory::assemble(sources.dag.clone(), graphs)?;

    let mut records = Vec::new();
    let mut all_outputs: Vec<(Strategy, BTreeMap<VersionId, Graph>)> = Vec::new();
    for &strategy in &cfg.strategies {
        let mut inits = Vec::new();
        let mut indexes = Vec::new();
        let mut executes = Vec::new();
        let mut last = None;
        for _ in 0..cfg.repeat {
            let run = run_strategy(strategy, history, mods, &final_sources, grammar, &cfg.schedule)?;
            inits.push(run.phases.init);
            indexes.push(run.phases.index);
            executes.push(run.phases.execute);
            last = Some(run);
        }
        let run = last.expect("repeat >= 1");
        records.push(StrategyRecord {
            strategy,
            phases: PhaseMillis {
                init: median(inits),
                index: median(indexes),
                execute: median(executes),
            },
            applications: run.applications,
            revocations: run.revocations,
            elements: run.elements,
            serialized_bytes: run.serialized_bytes,
            per_version: run.per_version,
            per_modification: run.per_modification,
        });
        all_outputs.push((strategy, run.outputs));
    }

    if cfg.inject_fault {
        if let Some((_, outputs)) = all_outputs.first_mut() {
            if let Some(g) = outputs.values_mut().next() {
                let ty = g.type_graph().node_type_names()[0].clone();
                g.add_node(&ty)?;
            }
        }
    }

    let cross_checked = all_outputs.len() >= 2;
    if cross_checked {
        let (ref_strategy, reference) = &all_outputs[0];
        for (strategy, outputs) in &all_outputs[1..] {
            let a: Vec<VersionId> = reference.keys().copied().collect();
            let b: Vec<VersionId> = outputs.keys().copied().collect();
            if a != b {
                return Err(Error::cross_check(format!(
                    "{ref_strategy} produced versions {a:?}, {strategy} produced {b:?}"
                )));
            }
            for v in &a {
                if isomorphic_with_bookkeeping(&reference[v], &outputs[v]).is_none() {
                    return Err(Error::cross_check(format!(
                        "{ref_strategy} and {strategy} disagree on version {v}"
                    )));
                }
            }
        }
    }

    Ok(BenchReport {
        schema: BENCH_REPORT_SCHEMA.into(),
        versions: final_versions.len(),
        modifications: mods.len(),
        repeat: cfg.repeat,
        cross_checked,
        strategies: records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::ElementId;
    use crate::samples;

    fn diamond() -> (History, Grammar) {
        (samples::diamond_history(), samples::class_diagram_grammar().unwrap())
    }

    fn mixed_mods() -> Vec<Modification> {
        vec![
            Modification::ElementDelete { version: VersionId(4), id: ElementId(7) },
            Modification::VersionCreate { base: VersionId(4) },
            Modification::ElementCreate {
                version: VersionId(5),
                id: ElementId(100),
                ty: "FieldDecl".into(),
                src: None,
                tgt: None,
            },
            Modification::ElementCreate {
                version: VersionId(5),
                id: ElementId(101),
                ty: "TypeAccess".into(),
                src: None,
                tgt: None,
            },
            Modification::ElementCreate {
                version: VersionId(5),
                id: ElementId(102),
                ty: "declaration".into(),
                src: Some(ElementId(8)),
                tgt: Some(ElementId(100)),
            },
            Modification::ElementCreate {
                version: VersionId(5),
                id: ElementId(103),
                ty: "access".into(),
                src: Some(ElementId(100)),
                tgt: Some(ElementId(101)),
            },
            Modification::ElementCreate {
                version: VersionId(5),
                id: ElementId(104),
                ty: "type".into(),
                src: Some(ElementId(101)),
                tgt: Some(ElementId(1)),
            },
            Modification::Merge { bases: vec![VersionId(4), VersionId(5)], remove: vec![] },
        ]
    }

    #[test]
    fn batch_strategies_agree_and_share_work() {
        let (h, grammar) = diamond();
        let cfg = BenchConfig {
            strategies: vec![Strategy::SvmB, Strategy::MvmB],
            repeat: 2,
            ..BenchConfig::default()
        };
        let report = bench_run(&h, &[], &grammar, &cfg).unwrap();
        assert!(report.cross_checked);
        assert_eq!(report.versions, 4);
        let svm = &report.strategies[0];
        let mvm = &report.strategies[1];
        assert_eq!(svm.applications, 12);
        assert_eq!(mvm.applications, 4);
        assert!(mvm.elements < svm.elements, "{} vs {}", mvm.elements, svm.elements);
    }

    #[test]
    fn all_strategies_agree_after_modifications() {
        let (h, grammar) = diamond();
        let cfg = BenchConfig { strategies: Strategy::ALL.to_vec(), ..BenchConfig::default() };
        let report = bench_run(&h, &mixed_mods(), &grammar, &cfg).unwrap();
        assert!(report.cross_checked);
        assert_eq!(report.versions, 6);
        assert_eq!(report.modifications, 8);
        let by_name: BTreeMap<&str, &StrategyRecord> =
            report.strategies.iter().map(|r| (r.strategy.name(), r)).collect();
        assert!(by_name["svm-i"].revocations >= 1);
        assert!(by_name["mvm-i"].revocations >= 1);
        assert_eq!(by_name["svm-i"].per_modification.as_ref().unwrap().len(), 8);
    }

    #[test]
    fn injected_disagreement_aborts_the_benchmark() {
        let (h, grammar) = diamond();
        let cfg = BenchConfig {
            strategies: vec![Strategy::SvmB, Strategy::MvmB],
            inject_fault: true,
            ..BenchConfig::default()
        };
        let err = bench_run(&h, &[], &grammar, &cfg).unwrap_err();
        assert!(matches!(err, Error::CrossCheck(_)), "{err}");
    }

    #[test]
    fn single_strategy_reports_without_cross_check() {
        let (h, grammar) = diamond();
        let cfg = BenchConfig { strategies: vec![Strategy::MvmB], ..BenchConfig::default() };
        let report = bench_run(&h, &[], &grammar, &cfg).unwrap();
        assert!(!report.cross_checked);
        assert_eq!(report.strategies.len(), 1);
    }

    #[test]
    fn duplicate_strategies_are_rejected() {
        let (h, grammar) = diamond();
        let cfg = BenchConfig {
            strategies: vec![Strategy::SvmB, Strategy::SvmB],
            ..BenchConfig::default()
        };
        assert!(bench_run(&h, &[], &grammar, &cfg).is_err());
    }
}
