//! Version histories of a source model: a DAG of versions where each
//! version's content is given as a delta against its base (or as a merge of
//! two or more bases), replayable into one graph per version.
//!
//! Element ids are global across the whole history: an id added in two
//! branches (or re-added after removal) must carry the identical definition
//! everywhere, so each id denotes one element that versions either contain
//! or not.

use crate::delta::{Delta, DeltaOp};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::ids::{ElementId, VersionId};
use crate::mvm::versions::{VersionDag, VersionSet};
use crate::typegraph::{ElementKind, TypeGraph};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

/// How one version is produced.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VersionOp {
    /// The first version: additions only.
    Root { delta: Delta },
    /// A new version editing one base version.
    Change { base: VersionId, delta: Delta },
    /// A new version containing the union of its bases' elements minus
    /// `remove`.
    Merge {
        bases: Vec<VersionId>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        remove: Vec<ElementId>,
    },
}

/// A source-model version history; entry `i` defines version `i + 1`.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct History {
    pub versions: Vec<VersionOp>,
}

/// The one definition an element id has across the whole history.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ElementDef {
    pub kind: ElementKind,
    pub ty: String,
    pub src: Option<ElementId>,
    pub tgt: Option<ElementId>,
}

/// A replayed history: the version DAG, one graph per version, and the
/// global element definition table.
#[derive(Clone, Debug)]
pub struct ReplayedHistory {
    pub dag: VersionDag,
    graphs: Vec<Graph>,
    pub defs: BTreeMap<ElementId, ElementDef>,
}

impl ReplayedHistory {
    pub fn graph(&self, v: VersionId) -> &Graph {
        &self.graphs[v.0 as usize - 1]
    }

    /// Versions each element is present in.
    pub fn presence(&self) -> BTreeMap<ElementId, VersionSet> {
        let n = self.dag.version_count();
        let mut out: BTreeMap<ElementId, VersionSet> = BTreeMap::new();
        for &id in self.defs.keys() {
            out.insert(id, VersionSet::with_versions(n));
        }
        for v in self.dag.versions() {
            for e in self.graph(v).elements() {
                out.get_mut(&e.id).expect("defined").insert(v);
            }
        }
        out
    }

    /// Union of all versions' elements as one graph: every element id that
    /// ever existed, with its global definition.
    pub fn comb(&self, type_graph: Arc<TypeGraph>) -> Result<Graph> {
        let mut g = Graph::new(type_graph);
        add_defs_in_dependency_order(&mut g, &self.defs)?;
        Ok(g)
    }

    pub fn max_element_id(&self) -> u64 {
        self.defs.keys().map(|id| id.0).max().unwrap_or(0)
    }

    /// Assembles a replayed history directly from per-version graphs (one
    /// per DAG version, in order), deriving the definition table. Every id
    /// must keep one definition across all graphs it appears in.
    pub fn assemble(dag: VersionDag, graphs: Vec<Graph>) -> Result<Self> {
        if graphs.len() != dag.version_count() {
            return Err(Error::input(format!(
                "{} graphs for {} versions",
                graphs.len(),
                dag.version_count()
            )));
        }
        let mut defs: BTreeMap<ElementId, ElementDef> = BTreeMap::new();
        for g in &graphs {
            for e in g.elements() {
                let def = ElementDef {
                    kind: e.kind(),
                    ty: g.type_name(e.id)?.to_string(),
                    src: e.src,
                    tgt: e.tgt,
                };
                match defs.get(&e.id) {
                    None => {
                        if e.id.0 >= crate::mvm::model::GENERATED_ID_BASE {
                            return Err(Error::input(format!(
                                "element id {} lies in the range reserved for generated elements",
                                e.id
                            )));
                        }
                        defs.insert(e.id, def);
                    }
                    Some(existing) if *existing != def => {
                        return Err(Error::input(format!(
                            "element {} is defined differently in different versions",
                            e.id
                        )));
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(ReplayedHistory { dag, graphs, defs })
    }
}

/// Adds definitions so that endpoints exist before the edges that use them.
fn add_defs_in_dependency_order(
    g: &mut Graph,
    defs: &BTreeMap<ElementId, ElementDef>,
) -> Result<()> {
    for (&id, def) in defs {
        if def.kind == ElementKind::Node {
            g.add_node_with_id(id, &def.ty)?;
        }
    }
    let mut pending: Vec<ElementId> = defs
        .iter()
        .filter(|(_, d)| d.kind == ElementKind::Edge)
        .map(|(&id, _)| id)
        .collect();
    while !pending.is_empty() {
        let before = pending.len();
        let mut rest = Vec::new();
        for id in pending {
            let def = &defs[&id];
            let (src, tgt) = (def.src.expect("edge"), def.tgt.expect("edge"));
            if g.contains(src) && g.contains(tgt) {
                g.add_edge_with_id(id, &def.ty, src, tgt)?;
            } else {
                rest.push(id);
            }
        }
        if rest.len() == before {
            return Err(Error::input(format!(
                "edge definitions reference missing elements (first stuck: {})",
                rest[0]
            )));
        }
        pending = rest;
    }
    Ok(())
}

fn record_defs(delta: &Delta, defs: &mut BTreeMap<ElementId, ElementDef>) -> Result<()> {
    for op in &delta.ops {
        let (id, def) = match op {
            DeltaOp::AddNode { id, ty } => (
                *id,
                ElementDef { kind: ElementKind::Node, ty: ty.clone(), src: None, tgt: None },
            ),
            DeltaOp::AddEdge { id, ty, src, tgt } => (
                *id,
                ElementDef {
                    kind: ElementKind::Edge,
                    ty: ty.clone(),
                    src: Some(*src),
                    tgt: Some(*tgt),
                },
            ),
            DeltaOp::Remove { .. } => continue,
        };
        if id.0 >= crate::mvm::model::GENERATED_ID_BASE {
            return Err(Error::input(format!(
                "element id {id} lies in the range reserved for generated elements"
            )));
        }
        match defs.get(&id) {
            None => {
                defs.insert(id, def);
            }
            Some(existing) if *existing == def => {}
            Some(_) => {
                return Err(Error::input(format!(
                    "element {id} is re-added with a different definition"
                )));
            }
        }
    }
    Ok(())
}

/// Replays a history into per-version graphs over `type_graph`, validating
/// structure as it goes: version 1 must be the root (additions only), later
/// versions must be changes or merges of earlier versions, merges may only
/// remove elements from the union of their bases, and every version must be
/// a well-formed graph.
pub fn replay(history: &History, type_graph: &Arc<TypeGraph>) -> Result<ReplayedHistory> {
    if history.versions.is_empty() {
        return Err(Error::input("history has no versions"));
    }
    let mut dag = VersionDag::from_preds(vec![])?;
    let mut graphs: Vec<Graph> = Vec::new();
    let mut defs: BTreeMap<ElementId, ElementDef> = BTreeMap::new();
    for (i, op) in history.versions.iter().enumerate() {
        let v = VersionId(i as u32 + 1);
        match op {
            VersionOp::Root { delta } => {
                if i != 0 {
                    return Err(Error::input(format!("version {v} is a second root")));
                }
                if !delta.removed_ids().is_empty() {
                    return Err(Error::input("the root version cannot remove elements"));
                }
                record_defs(delta, &mut defs)?;
                dag.add_version(vec![])?;
                let mut g = Graph::new(type_graph.clone());
                delta.apply(&mut g)?;
                graphs.push(g);
            }
            VersionOp::Change { base, delta } => {
                if i == 0 {
                    return Err(Error::input("the first version must be the root"));
                }
                if !dag.contains(*base) {
                    return Err(Error::input(format!(
                        "version {v} builds on unknown base {base}"
                    )));
                }
                record_defs(delta, &mut defs)?;
                dag.add_version(vec![*base])?;
                let mut g = graphs[base.0 as usize - 1].clone();
                delta.apply(&mut g)?;
                graphs.push(g);
            }
            VersionOp::Merge { bases, remove } => {
                if i == 0 {
                    return Err(Error::input("the first version must be the root"));
                }
                if bases.len() < 2 {
                    return Err(Error::input(format!(
                        "version {v} merges fewer than two bases"
                    )));
                }
                for b in bases {
                    if !dag.contains(*b) {
                        return Err(Error::input(format!(
                            "version {v} merges unknown base {b}"
                        )));
                    }
                }
                dag.add_version(bases.clone())?;
                // Union of base contents minus the removed ids.
                let mut kept: BTreeMap<ElementId, ElementDef> = BTreeMap::new();
                for b in bases {
                    for e in graphs[b.0 as usize - 1].elements() {
                        kept.insert(e.id, defs[&e.id].clone());
                    }
                }
                for r in remove {
                    if kept.remove(r).is_none() {
                        return Err(Error::input(format!(
                            "version {v} removes {r}, which no merged base contains"
                        )));
                    }
                }
                let mut g = Graph::new(type_graph.clone());
                add_defs_in_dependency_order(&mut g, &kept).map_err(|_| {
                    Error::input(format!(
                        "version {v}: removals leave dangling edges in the merge result"
                    ))
                })?;
                graphs.push(g);
            }
        }
        graphs.last().expect("pushed").validate()?;
    }
    Ok(ReplayedHistory { dag, graphs, defs })
}
