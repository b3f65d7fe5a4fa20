//! Equivalence oracles for the multi-version engine: every check here
//! recomputes the expected result per version through the single-version
//! pipeline — replaying sources independently, translating each version
//! from scratch — and compares it against the projection of the jointly
//! translated model. A report either confirms equivalence everywhere or
//! carries a per-version certificate of the first divergence found.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::ids::{ElementId, VersionId};
use crate::iso::{equal_including_bookkeeping, isomorphic_with_bookkeeping};
use crate::matcher::TypeIndex;
use crate::mvm::adapt::MvGrammar;
use crate::mvm::history::{replay, History};
use crate::mvm::model::{project_version, transform_history, MultiVersionModel};
use crate::mvm::sync::{apply_modification, Modification};
use crate::mvm::versions::VersionDag;
use crate::tgg::triplet::{transform, Schedule};
use crate::tgg::Grammar;
use crate::typegraph::{ElementKind, TypeGraph};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

/// The comparison result for one version.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct VersionCheck {
    pub version: VersionId,
    pub ok: bool,
    /// Empty when ok; otherwise a certificate of the divergence.
    pub detail: String,
}

/// The outcome of checking every version of a model.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct EquivalenceReport {
    pub checks: Vec<VersionCheck>,
}

impl EquivalenceReport {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    pub fn mismatches(&self) -> impl Iterator<Item = &VersionCheck> {
        self.checks.iter().filter(|c| !c.ok)
    }

    fn push(&mut self, version: VersionId, detail: Option<String>) {
        self.checks.push(VersionCheck {
            version,
            ok: detail.is_none(),
            detail: detail.unwrap_or_default(),
        });
    }
}

/// Per-(kind, type, marked) element counts — the first thing compared when
/// building a divergence certificate.
fn histogram(g: &Graph) -> BTreeMap<(ElementKind, String, bool), usize> {
    let mut out = BTreeMap::new();
    for e in g.elements() {
        let key = (e.kind(), g.type_name(e.id).unwrap_or("?").to_string(), g.is_marked(e.id));
        *out.entry(key).or_insert(0) += 1;
    }
    out
}

/// A human-readable certificate for two graphs that should have been
/// isomorphic (including bookkeeping) but are not.
pub fn describe_difference(projected: &Graph, recomputed: &Graph) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "projected: {} elements ({} marked); recomputed: {} elements ({} marked)",
        projected.element_count(),
        projected.marked_count(),
        recomputed.element_count(),
        recomputed.marked_count(),
    );
    let (hp, hr) = (histogram(projected), histogram(recomputed));
    let mut any = false;
    for key in hp.keys().chain(hr.keys()) {
        let (a, b) = (hp.get(key).copied().unwrap_or(0), hr.get(key).copied().unwrap_or(0));
        if a != b {
            let (kind, ty, marked) = key;
            let _ = writeln!(
                out,
                "  {:?} `{}`{}: projected {a}, recomputed {b}",
                kind,
                ty,
                if *marked { " (marked)" } else { "" },
            );
            any = true;
        }
    }
    if !any {
        let _ = writeln!(
            out,
            "  same element histogram, but no structure-preserving bijection exists"
        );
    }
    out
}

fn compare(projected: &Graph, recomputed: &Graph) -> Option<String> {
    if isomorphic_with_bookkeeping(projected, recomputed).is_some() {
        None
    } else {
        Some(describe_difference(projected, recomputed))
    }
}

fn source_arc(grammar: &Grammar) -> Arc<TypeGraph> {
    Arc::new(grammar.source_type_graph().clone())
}

/// Before any translation, the projection of every version must equal —
/// table for table, everything marked — the initial translation state of
/// that version's source.
pub fn check_initial_projection(history: &History, grammar: &Grammar) -> Result<EquivalenceReport> {
    let mv = MvGrammar::new(grammar)?;
    let replayed = replay(history, &source_arc(grammar))?;
    let model = MultiVersionModel::init(&replayed, &mv)?;
    let mut report = EquivalenceReport::default();
    for v in replayed.dag.versions() {
        let projected = project_version(&model, grammar, &mv.schema, v)?;
        let expected = crate::tgg::triplet::init_translation(replayed.graph(v), grammar)?;
        let detail = if equal_including_bookkeeping(&projected, &expected.graph) {
            None
        } else {
            Some(describe_difference(&projected, &expected.graph))
        };
        report.push(v, detail);
    }
    Ok(report)
}

/// Jointly translates the whole history, then checks every version's
/// projection against a from-scratch translation of that version alone.
pub fn check_batch_equivalence(
    history: &History,
    grammar: &Grammar,
    schedule: &Schedule,
) -> Result<EquivalenceReport> {
    let mv = MvGrammar::new(grammar)?;
    let replayed = replay(history, &source_arc(grammar))?;
    let (model, _) = transform_history(&replayed, &mv, schedule)?;
    let mut report = EquivalenceReport::default();
    for v in replayed.dag.versions() {
        let projected = project_version(&model, grammar, &mv.schema, v)?;
        let (state, _) = transform(replayed.graph(v), grammar, schedule)?;
        report.push(v, compare(&projected, &state.graph));
    }
    Ok(report)
}

/// Independently maintained per-version source models, kept in lockstep
/// with the modifications the engine applies — deliberately not sharing
/// any code with the presence-set machinery it checks.
#[derive(Clone)]
pub struct EvolvingSources {
    pub dag: VersionDag,
    graphs: Vec<Graph>,
}

impl EvolvingSources {
    pub fn new(history: &History, type_graph: &Arc<TypeGraph>) -> Result<Self> {
        let replayed = replay(history, type_graph)?;
        let graphs = replayed.dag.versions().map(|v| replayed.graph(v).clone()).collect();
        Ok(EvolvingSources { dag: replayed.dag.clone(), graphs })
    }

    /// Reassembles per-version sources from deserialized parts.
    pub fn from_parts(dag: VersionDag, graphs: Vec<Graph>) -> Result<Self> {
        if graphs.len() != dag.version_count() {
            return Err(Error::input(format!(
                "{} versions in the graph list, {} in the version graph",
                graphs.len(),
                dag.version_count()
            )));
        }
        Ok(EvolvingSources { dag, graphs })
    }

    pub fn graph(&self, v: VersionId) -> &Graph {
        &self.graphs[v.0 as usize - 1]
    }

    fn check_version(&self, v: VersionId) -> Result<()> {
        if self.dag.contains(v) {
            Ok(())
        } else {
            Err(Error::input(format!("unknown version {v}")))
        }
    }

    /// Replays one modification on the per-version graphs.
    pub fn apply(&mut self, m: &Modification) -> Result<()> {
        match m {
            Modification::VersionCreate { base } => {
                self.check_version(*base)?;
                let g = self.graph(*base).clone();
                self.dag.add_version(vec![*base])?;
                self.graphs.push(g);
            }
            Modification::ElementCreate { version, id, ty, src, tgt } => {
                self.check_version(*version)?;
                let g = &mut self.graphs[version.0 as usize - 1];
                match (src, tgt) {
                    (Some(s), Some(t)) => g.add_edge_with_id(*id, ty, *s, *t)?,
                    (None, None) => g.add_node_with_id(*id, ty)?,
                    _ => return Err(Error::input("edge needs both endpoints")),
                }
            }
            Modification::ElementDelete { version, id } => {
                self.check_version(*version)?;
                self.graphs[version.0 as usize - 1].remove_element(*id)?;
            }
            Modification::Merge { bases, remove } => {
                for &b in bases {
                    self.check_version(b)?;
                }
                let ty = self.graphs[0].type_graph().clone();
                let mut merged = Graph::new(ty);
                let keep = |id: ElementId| !remove.contains(&id);
                for &b in bases {
                    for e in self.graph(b).elements() {
                        if e.kind() == ElementKind::Node && keep(e.id) && !merged.contains(e.id) {
                            merged.add_node_with_id(e.id, self.graph(b).type_name(e.id)?)?;
                        }
                    }
                }
                // Edges may target other edges: insert in rounds.
                let mut pending: Vec<(VersionId, ElementId)> = Vec::new();
                for &b in bases {
                    for e in self.graph(b).elements() {
                        if e.kind() == ElementKind::Edge && keep(e.id) {
                            pending.push((b, e.id));
                        }
                    }
                }
                while !pending.is_empty() {
                    let before = pending.len();
                    let mut rest = Vec::new();
                    for (b, id) in pending {
                        if merged.contains(id) {
                            continue;
                        }
                        let e = self.graph(b).get(id)?;
                        let (s, t) = (e.src.expect("edge"), e.tgt.expect("edge"));
                        if merged.contains(s) && merged.contains(t) {
                            merged.add_edge_with_id(id, self.graph(b).type_name(id)?, s, t)?;
                        } else {
                            rest.push((b, id));
                        }
                    }
                    if rest.len() == before {
                        return Err(Error::input("merge leaves dangling edges"));
                    }
                    pending = rest;
                }
                self.dag.add_version(bases.clone())?;
                self.graphs.push(merged);
            }
        }
        Ok(())
    }
}

/// The outcome of a synchronization check: one equivalence report per
/// modification, taken after that modification was applied and the
/// fixpoint finished.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct SyncCheckReport {
    pub steps: Vec<EquivalenceReport>,
}

impl SyncCheckReport {
    pub fn ok(&self) -> bool {
        self.steps.iter().all(|r| r.ok())
    }

    /// (modification index, failed check) pairs.
    pub fn mismatches(&self) -> impl Iterator<Item = (usize, &VersionCheck)> {
        self.steps
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.mismatches().map(move |c| (i, c)))
    }
}

/// Translates the history jointly, then applies each modification through
/// the incremental engine and — after every single one — compares every
/// version's projection against a from-scratch translation of the
/// independently maintained sources.
pub fn check_sync_equivalence(
    history: &History,
    mods: &[Modification],
    grammar: &Grammar,
    schedule: &Schedule,
) -> Result<SyncCheckReport> {
    let mv = MvGrammar::new(grammar)?;
    let replayed = replay(history, &source_arc(grammar))?;
    let (mut model, _) = transform_history(&replayed, &mv, schedule)?;
    let mut index = TypeIndex::build(&model.graph);
    let mut sources = EvolvingSources::new(history, &source_arc(grammar))?;
    let mut report = SyncCheckReport::default();
    for m in mods {
        apply_modification(&mut model, &mv, &mut index, m, schedule)?;
        sources.apply(m)?;
        let mut step = EquivalenceReport::default();
        for v in sources.dag.versions() {
            let projected = project_version(&model, grammar, &mv.schema, v)?;
            let (state, _) = transform(sources.graph(v), grammar, schedule)?;
            step.push(v, compare(&projected, &state.graph));
        }
        report.steps.push(step);
    }
    Ok(report)
}

/// What a schedule sensitivity probe found.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ProbeReport {
    pub runs: usize,
    /// True when two schedules produced non-isomorphic results.
    pub schedule_sensitive: bool,
    pub detail: String,
}

/// Translates one source with several seeds and compares all results
/// pairwise; a grammar whose outcome depends on rule application order is
/// reported as schedule sensitive.
pub fn schedule_probe(source: &Graph, grammar: &Grammar, seeds: &[u64]) -> Result<ProbeReport> {
    let mut graphs = Vec::new();
    for &s in seeds {
        let (state, _) = transform(source, grammar, &Schedule::seeded(s))?;
        graphs.push((s, state.graph));
    }
    probe_pairwise(graphs)
}

/// The multi-version analogue: jointly translates a history with several
/// seeds and compares every version's projection pairwise.
pub fn schedule_probe_history(
    history: &History,
    grammar: &Grammar,
    seeds: &[u64],
) -> Result<ProbeReport> {
    let mv = MvGrammar::new(grammar)?;
    let replayed = replay(history, &source_arc(grammar))?;
    let mut runs = Vec::new();
    for &s in seeds {
        let (model, _) = transform_history(&replayed, &mv, &Schedule::seeded(s))?;
        runs.push((s, model));
    }
    let mut report = ProbeReport {
        runs: runs.len(),
        schedule_sensitive: false,
        detail: String::new(),
    };
    for v in replayed.dag.versions() {
        let graphs: Result<Vec<(u64, Graph)>> = runs
            .iter()
            .map(|(s, model)| Ok((*s, project_version(model, grammar, &mv.schema, v)?)))
            .collect();
        let per_version = probe_pairwise(graphs?)?;
        if per_version.schedule_sensitive {
            report.schedule_sensitive = true;
            let _ = write!(report.detail, "version {v}: {}", per_version.detail);
        }
    }
    Ok(report)
}

fn probe_pairwise(graphs: Vec<(u64, Graph)>) -> Result<ProbeReport> {
    let mut report = ProbeReport {
        runs: graphs.len(),
        schedule_sensitive: false,
        detail: String::new(),
    };
    for i in 1..graphs.len() {
        let (s0, g0) = &graphs[0];
        let (si, gi) = &graphs[i];
        if isomorphic_with_bookkeeping(g0, gi).is_none() {
            report.schedule_sensitive = true;
            let _ = writeln!(
                report.detail,
                "seeds {s0} and {si} disagree:\n{}",
                describe_difference(g0, gi)
            );
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;

    #[test]
    fn initial_projection_matches_per_version_initialization() {
        let grammar = samples::class_diagram_grammar().unwrap();
        let report = check_initial_projection(&samples::diamond_history(), &grammar).unwrap();
        assert!(report.ok(), "{:?}", report.mismatches().collect::<Vec<_>>());
        assert_eq!(report.checks.len(), 4);
    }

    #[test]
    fn batch_translation_is_equivalent_per_version() {
        let grammar = samples::class_diagram_grammar().unwrap();
        let report =
            check_batch_equivalence(&samples::diamond_history(), &grammar, &Schedule::default())
                .unwrap();
        assert!(report.ok(), "{:?}", report.mismatches().collect::<Vec<_>>());
    }

    #[test]
    fn synchronization_stays_equivalent_after_each_modification() {
        let grammar = samples::class_diagram_grammar().unwrap();
        let mods = vec![
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
                tgt: Some(ElementId(8)),
            },
            Modification::Merge { bases: vec![VersionId(4), VersionId(5)], remove: vec![] },
        ];
        let report = check_sync_equivalence(
            &samples::diamond_history(),
            &mods,
            &grammar,
            &Schedule::default(),
        )
        .unwrap();
        assert!(report.ok(), "{:?}", report.mismatches().collect::<Vec<_>>());
        assert_eq!(report.steps.len(), 8);
    }

    #[test]
    fn probe_accepts_order_independent_grammars_and_flags_ambiguous_ones() {
        let grammar = samples::class_diagram_grammar().unwrap();
        let source = samples::two_classes_one_field();
        let seeds = [1, 7, 42, 99, 12345];
        let report = schedule_probe(&source, &grammar, &seeds).unwrap();
        assert!(!report.schedule_sensitive, "{}", report.detail);
        let history_report =
            schedule_probe_history(&samples::diamond_history(), &grammar, &seeds).unwrap();
        assert!(!history_report.schedule_sensitive, "{}", history_report.detail);

        let ambiguous = samples::ambiguous_grammar().unwrap();
        let mut source = Graph::new(Arc::new(samples::ast_type_graph()));
        source.add_node_with_id(ElementId(1), "ClassDecl").unwrap();
        let report = schedule_probe(&source, &ambiguous, &seeds).unwrap();
        assert!(report.schedule_sensitive);
        assert!(report.detail.contains("disagree"));
    }

    #[test]
    fn a_mismatch_produces_a_usable_certificate() {
        let grammar = samples::class_diagram_grammar().unwrap();
        let (state, _) =
            transform(&samples::two_classes_one_field(), &grammar, &Schedule::default()).unwrap();
        let mut broken = state.graph.clone();
        broken.add_node("Association").unwrap();
        let detail = compare(&state.graph, &broken).unwrap();
        assert!(detail.contains("Association"));
        assert!(detail.contains("elements"));
    }
}
