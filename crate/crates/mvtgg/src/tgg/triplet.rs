//! Forward translation of a single source graph and its incremental
//! resynchronization after source edits.
//!
//! Translation works on one combined graph holding source, correspondence,
//! and target elements. Initialization copies the source graph in and marks
//! every element with a bookkeeping edge; the fixpoint then applies forward
//! rules — each consuming the marks of its translation image — until no rule
//! applies. Translation is complete when no mark remains.
//!
//! Synchronization takes an element-level delta against the source part,
//! revokes every recorded application invalidated by a removal (dependents
//! first), re-marks what those applications had translated, applies the
//! delta, marks the additions, and re-runs the fixpoint.

use crate::delta::{remove_in_dependency_order, Delta, DeltaOp};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::ids::ElementId;
use crate::matcher::{find_matches, TypeIndex};
use crate::morphism::Morphism;
use crate::rule::apply_rule;
use crate::tgg::{Domain, ForwardRule, Grammar};
use crate::typegraph::ElementKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

/// How the fixpoint picks among applicable matches.
///
/// Without a seed, rules are tried in declaration order and the first match
/// (in deterministic match order) is applied. With a seed, every applicable
/// (rule, match) pair is collected and one is drawn at random — used to
/// probe whether a grammar's result depends on application order.
#[derive(Clone, Debug, Default)]
pub struct Schedule {
    pub seed: Option<u64>,
}

impl Schedule {
    pub fn seeded(seed: u64) -> Self {
        Schedule { seed: Some(seed) }
    }
}

/// One recorded forward-rule application.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ApplicationTrace {
    pub rule_name: String,
    /// Forward-lhs pattern id -> host id.
    pub match_image: BTreeMap<ElementId, ElementId>,
    /// Host ids created by the application, in creation order.
    pub created: Vec<ElementId>,
    /// The correspondence node this application created.
    pub created_corr: ElementId,
    /// Host correspondence nodes the match required as context.
    pub required_corr: BTreeSet<ElementId>,
    /// Host source elements whose bookkeeping edges the application deleted.
    pub translated: BTreeSet<ElementId>,
}

/// A combined source/correspondence/target graph plus the application
/// traces that produced its correspondence and target parts.
#[derive(Clone, Debug)]
pub struct TransformState {
    pub graph: Graph,
    pub traces: Vec<ApplicationTrace>,
}

impl TransformState {
    /// True when every element has been translated.
    pub fn is_complete(&self) -> bool {
        self.graph.marked_count() == 0
    }

    /// Elements of one domain, ascending.
    pub fn domain_elements(&self, grammar: &Grammar, dom: Domain) -> Vec<ElementId> {
        self.graph
            .elements()
            .filter(|e| grammar.element_domain(&self.graph, e.id).map_or(false, |d| d == dom))
            .map(|e| e.id)
            .collect()
    }
}

/// What a fixpoint run did.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct TranslationOutcome {
    pub applications: usize,
    pub complete: bool,
}

/// Copies a source graph into a fresh combined graph and marks every element
/// as untranslated.
pub fn init_translation(source: &Graph, grammar: &Grammar) -> Result<TransformState> {
    if **source.type_graph() != grammar.ttg.source {
        return Err(Error::input("source graph is not typed over the grammar's source domain"));
    }
    let mut graph = Graph::new(grammar.merged.clone());
    for e in source.elements() {
        if e.kind() == ElementKind::Node {
            graph.add_node_with_id(e.id, source.type_name(e.id)?)?;
        }
    }
    let mut deferred: Vec<ElementId> = Vec::new();
    for e in source.elements() {
        if e.kind() != ElementKind::Edge {
            continue;
        }
        let tgt = e.tgt.expect("edge");
        if source.element(tgt).map(|t| t.kind()) == Some(ElementKind::Edge) && !graph.contains(tgt)
        {
            deferred.push(e.id);
            continue;
        }
        graph.add_edge_with_id(e.id, source.type_name(e.id)?, e.src.expect("edge"), tgt)?;
    }
    // Edge-targeting chains: retry until every deferred edge's target exists.
    while !deferred.is_empty() {
        let before = deferred.len();
        let mut rest = Vec::new();
        for id in deferred {
            let e = source.element(id).expect("listed");
            if graph.contains(e.tgt.expect("edge")) {
                graph.add_edge_with_id(id, source.type_name(id)?, e.src.expect("edge"), e.tgt.expect("edge"))?;
            } else {
                rest.push(id);
            }
        }
        if rest.len() == before {
            return Err(Error::input("source graph has an edge-targeting cycle"));
        }
        deferred = rest;
    }
    graph.ensure_bookkeeping_node();
    let all: Vec<ElementId> = graph.elements().map(|e| e.id).collect();
    for id in all {
        graph.mark(id)?;
    }
    Ok(TransformState { graph, traces: Vec::new() })
}

/// The single-graph applicability test for a forward rule: the translation
/// image must still be marked, everything else in the match unmarked.
fn forward_filter<'a>(fr: &'a ForwardRule, host: &'a Graph) -> impl Fn(&Morphism) -> bool + 'a {
    move |m: &Morphism| {
        for e in fr.rule.lhs.elements() {
            let img = match m.get(e.id) {
                Some(i) => i,
                None => return false,
            };
            let want_marked = fr.translation_set.contains(&e.id);
            if host.is_marked(img) != want_marked {
                return false;
            }
        }
        true
    }
}

/// Applies one forward rule at `m` and records the trace.
fn apply_forward(
    fr: &ForwardRule,
    grammar: &Grammar,
    state: &mut TransformState,
    m: &Morphism,
    index: &mut TypeIndex,
) -> Result<()> {
    let app = apply_rule(&fr.rule, &mut state.graph, m, Some(index))?;
    let created_corr_rhs = fr.created_corr_id(&grammar.domains)?;
    let created_corr = app
        .comatch
        .get(created_corr_rhs)
        .ok_or_else(|| Error::contract("created correspondence node missing from comatch"))?;
    let match_image: BTreeMap<ElementId, ElementId> = m.pairs().collect();
    let required_corr = fr
        .required_corr_ids(&grammar.domains)
        .iter()
        .map(|&id| match_image[&id])
        .collect();
    let translated = fr.translation_set.iter().map(|id| match_image[id]).collect();
    state.traces.push(ApplicationTrace {
        rule_name: fr.rule.name.clone(),
        match_image,
        created: app.created,
        created_corr,
        required_corr,
        translated,
    });
    Ok(())
}

/// Applies forward rules until none is applicable. Every application
/// strictly shrinks the set of marked elements, so the run terminates.
pub fn run_fixpoint(
    state: &mut TransformState,
    grammar: &Grammar,
    index: &mut TypeIndex,
    schedule: &Schedule,
) -> Result<usize> {
    let mut applications = 0usize;
    let mut rng = schedule.seed.map(ChaCha8Rng::seed_from_u64);
    loop {
        let marked_before = state.graph.marked_count();
        if marked_before == 0 {
            break;
        }
        let picked: Option<(usize, Morphism)> = match rng.as_mut() {
            None => {
                let mut found = None;
                for (ri, fr) in grammar.forward.iter().enumerate() {
                    let filter = forward_filter(fr, &state.graph);
                    let ms = find_matches(&fr.rule.lhs, &state.graph, index, Some(&filter))?;
                    if let Some(m) = ms.into_iter().next() {
                        found = Some((ri, m));
                        break;
                    }
                }
                found
            }
            Some(rng) => {
                let mut all: Vec<(usize, Morphism)> = Vec::new();
                for (ri, fr) in grammar.forward.iter().enumerate() {
                    let filter = forward_filter(fr, &state.graph);
                    let ms = find_matches(&fr.rule.lhs, &state.graph, index, Some(&filter))?;
                    all.extend(ms.into_iter().map(|m| (ri, m)));
                }
                if all.is_empty() {
                    None
                } else {
                    let i = rng.gen_range(0..all.len());
                    Some(all.swap_remove(i))
                }
            }
        };
        let (ri, m) = match picked {
            Some(p) => p,
            None => break,
        };
        apply_forward(&grammar.forward[ri], grammar, state, &m, index)?;
        applications += 1;
        debug_assert!(state.graph.marked_count() < marked_before);
    }
    Ok(applications)
}

/// Translates a source graph from scratch: initialization plus fixpoint.
pub fn transform(
    source: &Graph,
    grammar: &Grammar,
    schedule: &Schedule,
) -> Result<(TransformState, TranslationOutcome)> {
    let mut state = init_translation(source, grammar)?;
    let mut index = TypeIndex::build(&state.graph);
    let applications = run_fixpoint(&mut state, grammar, &mut index, schedule)?;
    let complete = state.is_complete();
    Ok((state, TranslationOutcome { applications, complete }))
}

/// What a synchronization run did.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct SyncOutcome {
    pub revoked: usize,
    pub applications: usize,
    pub complete: bool,
}

/// Index of which trace created each host element.
fn creator_map(traces: &[ApplicationTrace]) -> BTreeMap<ElementId, usize> {
    let mut map = BTreeMap::new();
    for (i, t) in traces.iter().enumerate() {
        for &c in &t.created {
            map.insert(c, i);
        }
    }
    map
}

/// Trace indices invalidated by removing `removed`: traces matching a
/// removed element, plus (transitively) traces matching anything a revoked
/// trace created. A single ascending pass suffices because a trace can only
/// match elements that existed before it ran.
fn invalidated_traces(
    traces: &[ApplicationTrace],
    removed: &BTreeSet<ElementId>,
) -> BTreeSet<usize> {
    let creators = creator_map(traces);
    let mut revoked: BTreeSet<usize> = BTreeSet::new();
    for (i, t) in traces.iter().enumerate() {
        let hit = t.match_image.values().any(|v| {
            removed.contains(v) || creators.get(v).map_or(false, |c| revoked.contains(c))
        });
        if hit {
            revoked.insert(i);
        }
    }
    revoked
}

/// Re-synchronizes a translated graph with an edited source.
///
/// The delta may only touch source-domain elements. Invalidated
/// applications are revoked dependents-first: their created correspondence
/// and target elements are removed and their translated elements get their
/// bookkeeping edges back. The delta is then applied, additions are marked,
/// and the fixpoint re-runs.
pub fn synchronize(
    state: &mut TransformState,
    delta: &Delta,
    grammar: &Grammar,
    index: &mut TypeIndex,
    schedule: &Schedule,
) -> Result<SyncOutcome> {
    // Validate the delta's domain discipline up front.
    for op in &delta.ops {
        match op {
            DeltaOp::AddNode { ty, .. } => {
                if grammar.domain_of_type(ElementKind::Node, ty) != Some(Domain::Source) {
                    return Err(Error::input(format!(
                        "delta adds node of non-source type `{ty}`"
                    )));
                }
            }
            DeltaOp::AddEdge { ty, .. } => {
                if grammar.domain_of_type(ElementKind::Edge, ty) != Some(Domain::Source) {
                    return Err(Error::input(format!(
                        "delta adds edge of non-source type `{ty}`"
                    )));
                }
            }
            DeltaOp::Remove { id } => {
                let dom = grammar.element_domain(&state.graph, *id)?;
                if dom != Domain::Source {
                    return Err(Error::input(format!(
                        "delta removes {id}, which is not a source element"
                    )));
                }
            }
        }
    }
    let removed = delta.removed_ids();
    let revoked_set = invalidated_traces(&state.traces, &removed);

    // Revoke dependents first (descending trace index).
    for &i in revoked_set.iter().rev() {
        let trace = &state.traces[i];
        for &c in trace.created.iter().rev() {
            if let Some(e) = state.graph.element(c) {
                index.remove(e);
            }
            state.graph.remove_element(c)?;
        }
        let translated: Vec<ElementId> = trace.translated.iter().copied().collect();
        for t in translated {
            state.graph.mark(t)?;
        }
    }
    let revoked = revoked_set.len();
    if revoked > 0 {
        let mut keep = 0usize;
        state.traces = std::mem::take(&mut state.traces)
            .into_iter()
            .enumerate()
            .filter_map(|(i, t)| if revoked_set.contains(&i) { None } else { Some(t) })
            .inspect(|_| keep += 1)
            .collect();
        debug_assert_eq!(keep, state.traces.len());
    }

    // Apply the delta: removals first (any order within the set), then
    // additions in op order; every addition starts out marked.
    let removal_list: Vec<ElementId> = removed.iter().copied().collect();
    for &id in &removal_list {
        if let Some(e) = state.graph.element(id) {
            index.remove(e);
        }
    }
    remove_in_dependency_order(&mut state.graph, removal_list)?;
    for op in &delta.ops {
        match op {
            DeltaOp::AddNode { id, ty } => {
                state.graph.add_node_with_id(*id, ty)?;
                index.insert(state.graph.element(*id).expect("just added"));
                state.graph.mark(*id)?;
            }
            DeltaOp::AddEdge { id, ty, src, tgt } => {
                state.graph.add_edge_with_id(*id, ty, *src, *tgt)?;
                index.insert(state.graph.element(*id).expect("just added"));
                state.graph.mark(*id)?;
            }
            DeltaOp::Remove { .. } => {}
        }
    }

    let applications = run_fixpoint(state, grammar, index, schedule)?;
    Ok(SyncOutcome { revoked, applications, complete: state.is_complete() })
}
