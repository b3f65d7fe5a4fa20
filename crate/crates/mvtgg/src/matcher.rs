//! Injective subgraph pattern matching.
//!
//! [`find_matches`] enumerates every injective, type- and structure-
//! preserving embedding of a pattern graph into a host graph, in a
//! deterministic order. The search is plain backtracking with a
//! most-constrained-node-first plan; candidate nodes are derived from edges
//! incident to already-bound neighbours whenever the pattern allows it.
//!
//! Patterns never contain bookkeeping machinery; bookkeeping requirements
//! are expressed by the caller through the match filter.

use crate::error::{Error, Result};
use crate::graph::{Element, Graph};
use crate::ids::ElementId;
use crate::morphism::Morphism;
use crate::typegraph::{EdgeTypeId, ElementKind, ElementType, NodeTypeId};
use std::collections::{BTreeMap, BTreeSet};

/// Candidate index over a host graph: elements grouped by type, and edges
/// additionally grouped by (type, endpoint) for adjacency-guided lookup.
///
/// The index is built once per host and kept in sync by the engine as rules
/// add or revocation removes elements.
#[derive(Clone, Debug, Default)]
pub struct TypeIndex {
    nodes_by_type: BTreeMap<NodeTypeId, BTreeSet<ElementId>>,
    edges_by_type: BTreeMap<EdgeTypeId, BTreeSet<ElementId>>,
    edges_by_src: BTreeMap<(EdgeTypeId, ElementId), BTreeSet<ElementId>>,
    edges_by_tgt: BTreeMap<(EdgeTypeId, ElementId), BTreeSet<ElementId>>,
}

impl TypeIndex {
    pub fn build(host: &Graph) -> Self {
        let mut idx = TypeIndex::default();
        for e in host.elements() {
            idx.insert(e);
        }
        idx
    }

    /// Registers a newly added element.
    pub fn insert(&mut self, e: &Element) {
        match e.ty {
            ElementType::Node(nt) => {
                self.nodes_by_type.entry(nt).or_default().insert(e.id);
            }
            ElementType::Edge(et) => {
                self.edges_by_type.entry(et).or_default().insert(e.id);
                self.edges_by_src.entry((et, e.src.unwrap())).or_default().insert(e.id);
                self.edges_by_tgt.entry((et, e.tgt.unwrap())).or_default().insert(e.id);
            }
        }
    }

    /// Unregisters an element about to be removed.
    pub fn remove(&mut self, e: &Element) {
        match e.ty {
            ElementType::Node(nt) => {
                if let Some(s) = self.nodes_by_type.get_mut(&nt) {
                    s.remove(&e.id);
                }
            }
            ElementType::Edge(et) => {
                if let Some(s) = self.edges_by_type.get_mut(&et) {
                    s.remove(&e.id);
                }
                if let Some(s) = self.edges_by_src.get_mut(&(et, e.src.unwrap())) {
                    s.remove(&e.id);
                }
                if let Some(s) = self.edges_by_tgt.get_mut(&(et, e.tgt.unwrap())) {
                    s.remove(&e.id);
                }
            }
        }
    }

    fn nodes_of(&self, nt: NodeTypeId) -> Option<&BTreeSet<ElementId>> {
        self.nodes_by_type.get(&nt)
    }

    fn node_candidate_count(&self, nt: NodeTypeId) -> usize {
        self.nodes_by_type.get(&nt).map_or(0, |s| s.len())
    }
}

/// Optional predicate a complete match must satisfy to be reported.
pub type MatchFilter<'a> = Option<&'a dyn Fn(&Morphism) -> bool>;

#[derive(Clone, Copy, Debug)]
enum PlanItem {
    Node(ElementId),
    Edge(ElementId),
}

/// Builds the search plan: nodes most-constrained-first (preferring nodes
/// adjacent to already-planned ones), each edge scheduled as soon as both of
/// its endpoints are planned.
fn build_plan(pattern: &Graph, index: &TypeIndex) -> Result<Vec<PlanItem>> {
    let mut plan = Vec::new();
    let mut planned: BTreeSet<ElementId> = BTreeSet::new();
    let node_ids: Vec<ElementId> = pattern
        .elements()
        .filter(|e| e.kind() == ElementKind::Node)
        .map(|e| e.id)
        .collect();
    let edges: Vec<&Element> =
        pattern.elements().filter(|e| e.kind() == ElementKind::Edge).collect();

    let candidate_count = |id: ElementId| -> usize {
        match pattern.element(id).unwrap().ty {
            ElementType::Node(nt) => index.node_candidate_count(nt),
            ElementType::Edge(_) => unreachable!(),
        }
    };

    let mut remaining: BTreeSet<ElementId> = node_ids.iter().copied().collect();
    while !remaining.is_empty() {
        // Nodes connected to the planned prefix first; fewest candidates wins.
        let adjacent: Vec<ElementId> = remaining
            .iter()
            .copied()
            .filter(|&n| {
                edges.iter().any(|e| {
                    (e.src == Some(n) && planned.contains(&e.tgt.unwrap()))
                        || (e.tgt == Some(n) && planned.contains(&e.src.unwrap()))
                })
            })
            .collect();
        let pool: Vec<ElementId> =
            if adjacent.is_empty() { remaining.iter().copied().collect() } else { adjacent };
        let pick = pool
            .into_iter()
            .min_by_key(|&n| (candidate_count(n), n))
            .expect("nonempty pool");
        remaining.remove(&pick);
        planned.insert(pick);
        plan.push(PlanItem::Node(pick));
        // Schedule every edge whose endpoints are now available; repeat so
        // edge-targeting edges can chain onto newly scheduled edges.
        loop {
            let mut progressed = false;
            for e in &edges {
                if planned.contains(&e.id) {
                    continue;
                }
                let src_ok = planned.contains(&e.src.unwrap());
                let tgt_ok = planned.contains(&e.tgt.unwrap());
                if src_ok && tgt_ok {
                    planned.insert(e.id);
                    plan.push(PlanItem::Edge(e.id));
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
        }
    }
    if plan.len() != pattern.element_count() {
        return Err(Error::config(
            "pattern has an edge-targeting cycle; cannot build a match plan",
        ));
    }
    Ok(plan)
}

/// Enumerates all injective embeddings of `pattern` into `host` that pass
/// `filter`, sorted lexicographically by mapped host ids (keyed by ascending
/// pattern element id). The empty pattern yields exactly one empty match.
pub fn find_matches(
    pattern: &Graph,
    host: &Graph,
    index: &TypeIndex,
    filter: MatchFilter<'_>,
) -> Result<Vec<Morphism>> {
    if pattern.type_graph() != host.type_graph() {
        return Err(Error::config("pattern and host use different type graphs"));
    }
    let plan = build_plan(pattern, index)?;
    let mut assignment: BTreeMap<ElementId, ElementId> = BTreeMap::new();
    let mut used: BTreeSet<ElementId> = BTreeSet::new();
    let mut out: Vec<Morphism> = Vec::new();
    search(pattern, host, index, &plan, 0, &mut assignment, &mut used, filter, &mut out);
    // Deterministic report order: lexicographic on host images keyed by
    // ascending pattern id.
    let image_key = |m: &Morphism| -> Vec<ElementId> {
        let mut pairs: Vec<(ElementId, ElementId)> = m.pairs().collect();
        pairs.sort_by_key(|&(from, _)| from);
        pairs.into_iter().map(|(_, to)| to).collect()
    };
    out.sort_by_key(image_key);
    Ok(out)
}

/// Convenience wrapper that builds a throwaway index.
pub fn find_matches_fresh(
    pattern: &Graph,
    host: &Graph,
    filter: MatchFilter<'_>,
) -> Result<Vec<Morphism>> {
    let index = TypeIndex::build(host);
    find_matches(pattern, host, &index, filter)
}

#[allow(clippy::too_many_arguments)]
fn search(
    pattern: &Graph,
    host: &Graph,
    index: &TypeIndex,
    plan: &[PlanItem],
    depth: usize,
    assignment: &mut BTreeMap<ElementId, ElementId>,
    used: &mut BTreeSet<ElementId>,
    filter: MatchFilter<'_>,
    out: &mut Vec<Morphism>,
) {
    if depth == plan.len() {
        let mut m = Morphism::new();
        for (&from, &to) in assignment.iter() {
            match pattern.element(from).unwrap().kind() {
                ElementKind::Node => m.node_map.insert(from, to),
                ElementKind::Edge => m.edge_map.insert(from, to),
            };
        }
        if filter.map_or(true, |f| f(&m)) {
            out.push(m);
        }
        return;
    }
    match plan[depth] {
        PlanItem::Node(pid) => {
            let nt = match pattern.element(pid).unwrap().ty {
                ElementType::Node(nt) => nt,
                ElementType::Edge(_) => unreachable!(),
            };
            let candidates = node_candidates(pattern, host, index, pid, nt, assignment);
            for cand in candidates {
                if used.contains(&cand) {
                    continue;
                }
                assignment.insert(pid, cand);
                used.insert(cand);
                search(pattern, host, index, plan, depth + 1, assignment, used, filter, out);
                assignment.remove(&pid);
                used.remove(&cand);
            }
        }
        PlanItem::Edge(pid) => {
            let pe = pattern.element(pid).unwrap();
            let et = match pe.ty {
                ElementType::Edge(et) => et,
                ElementType::Node(_) => unreachable!(),
            };
            let src_img = assignment[&pe.src.unwrap()];
            let tgt_img = assignment[&pe.tgt.unwrap()];
            if let Some(cands) = index.edges_by_src.get(&(et, src_img)) {
                for &cand in cands {
                    if used.contains(&cand) {
                        continue;
                    }
                    if host.element(cand).map(|e| e.tgt) != Some(Some(tgt_img)) {
                        continue;
                    }
                    assignment.insert(pid, cand);
                    used.insert(cand);
                    search(pattern, host, index, plan, depth + 1, assignment, used, filter, out);
                    assignment.remove(&pid);
                    used.remove(&cand);
                }
            }
        }
    }
}

/// Host candidates for a pattern node: derived from an incident edge with an
/// already-bound far endpoint when possible, otherwise all nodes of the type.
fn node_candidates(
    pattern: &Graph,
    host: &Graph,
    index: &TypeIndex,
    pid: ElementId,
    nt: NodeTypeId,
    assignment: &BTreeMap<ElementId, ElementId>,
) -> Vec<ElementId> {
    for e in pattern.elements() {
        if e.kind() != ElementKind::Edge {
            continue;
        }
        let et = match e.ty {
            ElementType::Edge(et) => et,
            ElementType::Node(_) => unreachable!(),
        };
        if e.src == Some(pid) {
            if let Some(&far) = assignment.get(&e.tgt.unwrap()) {
                let mut cands: Vec<ElementId> = index
                    .edges_by_tgt
                    .get(&(et, far))
                    .map(|s| {
                        s.iter()
                            .filter_map(|&eid| host.element(eid).and_then(|el| el.src))
                            .collect()
                    })
                    .unwrap_or_default();
                cands.sort();
                cands.dedup();
                cands.retain(|&c| {
                    host.element(c).map_or(false, |el| el.ty == ElementType::Node(nt))
                });
                return cands;
            }
        }
        if e.tgt == Some(pid) {
            if let Some(&far) = assignment.get(&e.src.unwrap()) {
                let mut cands: Vec<ElementId> = index
                    .edges_by_src
                    .get(&(et, far))
                    .map(|s| {
                        s.iter()
                            .filter_map(|&eid| host.element(eid).and_then(|el| el.tgt))
                            .collect()
                    })
                    .unwrap_or_default();
                cands.sort();
                cands.dedup();
                cands.retain(|&c| {
                    host.element(c).map_or(false, |el| el.ty == ElementType::Node(nt))
                });
                return cands;
            }
        }
    }
    index.nodes_of(nt).map(|s| s.iter().copied().collect()).unwrap_or_default()
}
