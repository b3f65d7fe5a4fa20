//! Graph morphisms: structure- and type-preserving element maps.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::ids::ElementId;
use crate::typegraph::ElementKind;
use std::collections::BTreeMap;

/// A mapping from the elements of one graph into another.
///
/// Nodes map to nodes and edges to edges; the two maps are kept separate so
/// kind preservation is structural rather than checked.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Morphism {
    pub node_map: BTreeMap<ElementId, ElementId>,
    pub edge_map: BTreeMap<ElementId, ElementId>,
}

impl Morphism {
    pub fn new() -> Self {
        Morphism::default()
    }

    /// Identity morphism on every element of `g`.
    pub fn identity(g: &Graph) -> Self {
        let mut m = Morphism::new();
        for e in g.elements() {
            match e.kind() {
                ElementKind::Node => m.node_map.insert(e.id, e.id),
                ElementKind::Edge => m.edge_map.insert(e.id, e.id),
            };
        }
        m
    }

    /// Image of an element regardless of kind.
    pub fn get(&self, id: ElementId) -> Option<ElementId> {
        self.node_map.get(&id).or_else(|| self.edge_map.get(&id)).copied()
    }

    pub fn len(&self) -> usize {
        self.node_map.len() + self.edge_map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_map.is_empty() && self.edge_map.is_empty()
    }

    /// All (from, to) pairs, nodes first, each ascending by source id.
    pub fn pairs(&self) -> impl Iterator<Item = (ElementId, ElementId)> + '_ {
        self.node_map
            .iter()
            .chain(self.edge_map.iter())
            .map(|(&a, &b)| (a, b))
    }

    /// True when no two elements share an image (within and across kinds).
    pub fn is_injective(&self) -> bool {
        let mut seen = std::collections::BTreeSet::new();
        self.pairs().all(|(_, to)| seen.insert(to))
    }

    /// Composition `other ∘ self` (apply `self`, then `other`).
    pub fn then(&self, other: &Morphism) -> Result<Morphism> {
        let mut out = Morphism::new();
        for (&a, &b) in &self.node_map {
            let c = other
                .node_map
                .get(&b)
                .ok_or_else(|| Error::contract(format!("composition undefined at node {b}")))?;
            out.node_map.insert(a, *c);
        }
        for (&a, &b) in &self.edge_map {
            let c = other
                .edge_map
                .get(&b)
                .ok_or_else(|| Error::contract(format!("composition undefined at edge {b}")))?;
            out.edge_map.insert(a, *c);
        }
        Ok(out)
    }

    /// Checks that `self` is a total, type- and structure-preserving
    /// morphism from `pattern` into `host`.
    pub fn check(&self, pattern: &Graph, host: &Graph) -> Result<()> {
        if pattern.type_graph() != host.type_graph() {
            return Err(Error::config("pattern and host use different type graphs"));
        }
        for e in pattern.elements() {
            let img_id = self.get(e.id).ok_or_else(|| {
                Error::contract(format!("morphism is partial: {} has no image", e.id))
            })?;
            let img = host.get(img_id)?;
            if img.ty != e.ty {
                return Err(Error::contract(format!(
                    "type not preserved at {} -> {img_id}",
                    e.id
                )));
            }
            if e.kind() == ElementKind::Edge {
                let (ps, pt) = (e.src.unwrap(), e.tgt.unwrap());
                if self.get(ps) != img.src || self.get(pt) != img.tgt {
                    return Err(Error::contract(format!(
                        "incidence not preserved at edge {} -> {img_id}",
                        e.id
                    )));
                }
            }
        }
        Ok(())
    }
}
