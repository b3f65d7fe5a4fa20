//! Element-level deltas: the unit of change both history versions and
//! synchronization requests are expressed in.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::ids::ElementId;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// One addition or removal.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum DeltaOp {
    AddNode { id: ElementId, ty: String },
    AddEdge { id: ElementId, ty: String, src: ElementId, tgt: ElementId },
    Remove { id: ElementId },
}

impl DeltaOp {
    pub fn id(&self) -> ElementId {
        match self {
            DeltaOp::AddNode { id, .. } | DeltaOp::AddEdge { id, .. } | DeltaOp::Remove { id } => {
                *id
            }
        }
    }
}

/// An ordered list of additions and removals against a graph.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct Delta {
    pub ops: Vec<DeltaOp>,
}

impl Delta {
    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Ids added by this delta, in op order.
    pub fn added_ids(&self) -> Vec<ElementId> {
        self.ops
            .iter()
            .filter(|op| !matches!(op, DeltaOp::Remove { .. }))
            .map(|op| op.id())
            .collect()
    }

    /// Ids removed by this delta.
    pub fn removed_ids(&self) -> BTreeSet<ElementId> {
        self.ops
            .iter()
            .filter(|op| matches!(op, DeltaOp::Remove { .. }))
            .map(|op| op.id())
            .collect()
    }

    /// Applies every op in order. Removals are deferred and retried so the
    /// delta may list them in any order; the set as a whole must still leave
    /// no dangling references.
    pub fn apply(&self, g: &mut Graph) -> Result<()> {
        let mut removals: Vec<ElementId> = Vec::new();
        for op in &self.ops {
            match op {
                DeltaOp::AddNode { id, ty } => g.add_node_with_id(*id, ty)?,
                DeltaOp::AddEdge { id, ty, src, tgt } => g.add_edge_with_id(*id, ty, *src, *tgt)?,
                DeltaOp::Remove { id } => removals.push(*id),
            }
        }
        remove_in_dependency_order(g, removals)
    }
}

/// Removes a set of elements, retrying until elements no longer referenced
/// can go; errors if the set leaves dangling references.
pub fn remove_in_dependency_order(g: &mut Graph, mut pending: Vec<ElementId>) -> Result<()> {
    for &id in &pending {
        if !g.contains(id) {
            return Err(Error::input(format!("cannot remove {id}: element does not exist")));
        }
    }
    while !pending.is_empty() {
        let before = pending.len();
        let mut rest = Vec::new();
        for id in pending {
            if g.incident_edges(id).is_empty() {
                g.remove_element(id)?;
            } else {
                rest.push(id);
            }
        }
        if rest.len() == before {
            return Err(Error::input(format!(
                "removal set leaves dangling references (stuck on {} element(s), first {})",
                rest.len(),
                rest[0]
            )));
        }
        pending = rest;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::typegraph::{EdgeTypeDef, TypeGraph, TypeRef};
    use std::sync::Arc;

    fn tg() -> Arc<TypeGraph> {
        Arc::new(
            TypeGraph::new(
                vec!["A".into()],
                vec![EdgeTypeDef { name: "aa".into(), source: "A".into(), target: TypeRef::node("A") }],
            )
            .unwrap(),
        )
    }

    #[test]
    fn apply_handles_out_of_order_removals() {
        let mut g = Graph::new(tg());
        let a = g.add_node("A").unwrap();
        let b = g.add_node("A").unwrap();
        let e = g.add_edge("aa", a, b).unwrap();
        // Node listed before its incident edge: still succeeds.
        let d = Delta { ops: vec![DeltaOp::Remove { id: a }, DeltaOp::Remove { id: e }] };
        d.apply(&mut g).unwrap();
        assert!(g.contains(b));
        assert_eq!(g.element_count(), 1);
    }

    #[test]
    fn dangling_removal_is_rejected() {
        let mut g = Graph::new(tg());
        let a = g.add_node("A").unwrap();
        let b = g.add_node("A").unwrap();
        g.add_edge("aa", a, b).unwrap();
        let d = Delta { ops: vec![DeltaOp::Remove { id: a }] };
        assert!(d.apply(&mut g).is_err());
    }

    #[test]
    fn added_and_removed_ids_partition_ops() {
        let d = Delta {
            ops: vec![
                DeltaOp::AddNode { id: ElementId(1), ty: "A".into() },
                DeltaOp::Remove { id: ElementId(2) },
            ],
        };
        assert_eq!(d.added_ids(), vec![ElementId(1)]);
        assert!(d.removed_ids().contains(&ElementId(2)));
    }
}
