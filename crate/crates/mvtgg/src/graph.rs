//! Typed graphs with translation bookkeeping.
//!
//! A [`Graph`] holds nodes and edges typed over a shared [`TypeGraph`].
//! Edges normally connect nodes; edge types flagged edge-targeting may point
//! at edges (used for correspondence links onto edges).
//!
//! Bookkeeping is the marking mechanism driving forward translation: a
//! dedicated bookkeeping node with one bookkeeping edge per still-untranslated
//! element. Bookkeeping machinery lives outside the element tables — it is
//! not matched by patterns and not part of the type graph — but it serializes
//! and compares like part of the graph state.

use crate::error::{Error, Result};
use crate::ids::ElementId;
use crate::typegraph::{EdgeTypeId, ElementKind, ElementType, NodeTypeId, TypeGraph};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

/// One node or edge of a graph.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Element {
    pub id: ElementId,
    pub ty: ElementType,
    /// Source endpoint; `None` for nodes.
    pub src: Option<ElementId>,
    /// Target endpoint; `None` for nodes. May reference an edge when the
    /// edge type is flagged edge-targeting.
    pub tgt: Option<ElementId>,
}

impl Element {
    pub fn kind(&self) -> ElementKind {
        self.ty.kind()
    }
}

/// A typed graph with optional bookkeeping state.
///
/// Bookkeeping machinery (the bookkeeping node and its edges) draws ids
/// from a namespace separate from the element tables, so caller-chosen
/// element ids can never collide with ids the graph mints for marks.
#[derive(Clone, Debug)]
pub struct Graph {
    type_graph: Arc<TypeGraph>,
    elements: BTreeMap<ElementId, Element>,
    /// target element -> id of the bookkeeping edge marking it.
    bookkeeping: BTreeMap<ElementId, ElementId>,
    bookkeeping_node: Option<ElementId>,
    next_id: u64,
}

impl Graph {
    pub fn new(type_graph: Arc<TypeGraph>) -> Self {
        Graph {
            type_graph,
            elements: BTreeMap::new(),
            bookkeeping: BTreeMap::new(),
            bookkeeping_node: None,
            next_id: 1,
        }
    }

    pub fn type_graph(&self) -> &Arc<TypeGraph> {
        &self.type_graph
    }

    fn fresh_id(&mut self) -> ElementId {
        let id = ElementId(self.next_id);
        self.next_id += 1;
        id
    }

    /// Machinery ids are a pure function of the machinery currently in
    /// use, so a graph and its reloaded serialization mint identically.
    fn fresh_machinery_id(&self) -> ElementId {
        let mut next = 1;
        if let Some(n) = self.bookkeeping_node {
            next = next.max(n.0 + 1);
        }
        if let Some(m) = self.bookkeeping.values().map(|e| e.0).max() {
            next = next.max(m + 1);
        }
        ElementId(next)
    }

    fn claim_id(&mut self, id: ElementId) -> Result<()> {
        if self.elements.contains_key(&id) {
            return Err(Error::input(format!("element id {id} already in use")));
        }
        self.next_id = self.next_id.max(id.0 + 1);
        Ok(())
    }

    /// Adds a node of the named type with a fresh id.
    pub fn add_node(&mut self, type_name: &str) -> Result<ElementId> {
        let id = self.fresh_id();
        self.add_node_with_id(id, type_name)?;
        Ok(id)
    }

    /// Adds a node with a caller-chosen id (deserialization, projection).
    pub fn add_node_with_id(&mut self, id: ElementId, type_name: &str) -> Result<()> {
        let ty = self
            .type_graph
            .node_type(type_name)
            .ok_or_else(|| Error::input(format!("unknown node type `{type_name}`")))?;
        self.claim_id(id)?;
        self.elements.insert(id, Element { id, ty: ElementType::Node(ty), src: None, tgt: None });
        Ok(())
    }

    /// Adds an edge of the named type with a fresh id.
    pub fn add_edge(&mut self, type_name: &str, src: ElementId, tgt: ElementId) -> Result<ElementId> {
        let id = self.fresh_id();
        self.add_edge_with_id(id, type_name, src, tgt)?;
        Ok(id)
    }

    /// Adds an edge with a caller-chosen id.
    pub fn add_edge_with_id(
        &mut self,
        id: ElementId,
        type_name: &str,
        src: ElementId,
        tgt: ElementId,
    ) -> Result<()> {
        let ty = self
            .type_graph
            .edge_type(type_name)
            .ok_or_else(|| Error::input(format!("unknown edge type `{type_name}`")))?;
        let def = self.type_graph.edge_type_def(ty).clone();
        let src_el = self
            .elements
            .get(&src)
            .ok_or_else(|| Error::input(format!("edge `{type_name}` source {src} does not exist")))?;
        let tgt_el = self
            .elements
            .get(&tgt)
            .ok_or_else(|| Error::input(format!("edge `{type_name}` target {tgt} does not exist")))?;
        match src_el.ty {
            ElementType::Node(nt) if self.type_graph.node_type_name(nt) == def.source => {}
            _ => {
                return Err(Error::input(format!(
                    "edge `{type_name}` source {src} must be a node of type `{}`",
                    def.source
                )))
            }
        }
        let tgt_ok = match (&def.target.kind, tgt_el.ty) {
            (ElementKind::Node, ElementType::Node(nt)) => {
                self.type_graph.node_type_name(nt) == def.target.name
            }
            (ElementKind::Edge, ElementType::Edge(et)) => {
                self.type_graph.edge_type_name(et) == def.target.name
            }
            _ => false,
        };
        if !tgt_ok {
            return Err(Error::input(format!(
                "edge `{type_name}` target {tgt} must be a {} of type `{}`",
                def.target.kind, def.target.name
            )));
        }
        self.claim_id(id)?;
        self.elements
            .insert(id, Element { id, ty: ElementType::Edge(ty), src: Some(src), tgt: Some(tgt) });
        Ok(())
    }

    /// Removes an element. Nodes (and target-able edges) must not have
    /// incident edges left; the element's own bookkeeping mark is dropped.
    pub fn remove_element(&mut self, id: ElementId) -> Result<()> {
        if !self.elements.contains_key(&id) {
            return Err(Error::input(format!("element {id} does not exist")));
        }
        if let Some(dangling) = self
            .elements
            .values()
            .find(|e| e.src == Some(id) || e.tgt == Some(id))
        {
            return Err(Error::input(format!(
                "cannot remove {id}: edge {} still references it",
                dangling.id
            )));
        }
        self.elements.remove(&id);
        self.bookkeeping.remove(&id);
        Ok(())
    }

    pub fn contains(&self, id: ElementId) -> bool {
        self.elements.contains_key(&id)
    }

    pub fn element(&self, id: ElementId) -> Option<&Element> {
        self.elements.get(&id)
    }

    pub fn get(&self, id: ElementId) -> Result<&Element> {
        self.elements
            .get(&id)
            .ok_or_else(|| Error::input(format!("element {id} does not exist")))
    }

    /// All elements in ascending id order.
    pub fn elements(&self) -> impl Iterator<Item = &Element> {
        self.elements.values()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn node_count(&self) -> usize {
        self.elements.values().filter(|e| e.kind() == ElementKind::Node).count()
    }

    pub fn edge_count(&self) -> usize {
        self.elements.values().filter(|e| e.kind() == ElementKind::Edge).count()
    }

    /// Human-readable type name of an element.
    pub fn type_name(&self, id: ElementId) -> Result<&str> {
        Ok(match self.get(id)?.ty {
            ElementType::Node(nt) => self.type_graph.node_type_name(nt),
            ElementType::Edge(et) => self.type_graph.edge_type_name(et),
        })
    }

    /// Edges whose source or target is `id`, ascending by edge id.
    pub fn incident_edges(&self, id: ElementId) -> Vec<ElementId> {
        self.elements
            .values()
            .filter(|e| e.src == Some(id) || e.tgt == Some(id))
            .map(|e| e.id)
            .collect()
    }

    pub fn nodes_of_type(&self, ty: NodeTypeId) -> Vec<ElementId> {
        self.elements
            .values()
            .filter(|e| e.ty == ElementType::Node(ty))
            .map(|e| e.id)
            .collect()
    }

    pub fn edges_of_type(&self, ty: EdgeTypeId) -> Vec<ElementId> {
        self.elements
            .values()
            .filter(|e| e.ty == ElementType::Edge(ty))
            .map(|e| e.id)
            .collect()
    }

    // ------------------------------------------------------------------
    // Bookkeeping.

    /// Id of the bookkeeping node, if the graph has one.
    pub fn bookkeeping_node(&self) -> Option<ElementId> {
        self.bookkeeping_node
    }

    /// Creates the bookkeeping node if absent; returns its id.
    pub fn ensure_bookkeeping_node(&mut self) -> ElementId {
        match self.bookkeeping_node {
            Some(id) => id,
            None => {
                let id = self.fresh_machinery_id();
                self.bookkeeping_node = Some(id);
                id
            }
        }
    }

    /// Marks an element as untranslated. Idempotent: an element carries at
    /// most one bookkeeping edge.
    pub fn mark(&mut self, target: ElementId) -> Result<()> {
        if !self.elements.contains_key(&target) {
            return Err(Error::input(format!("cannot mark {target}: element does not exist")));
        }
        self.ensure_bookkeeping_node();
        if !self.bookkeeping.contains_key(&target) {
            let edge_id = self.fresh_machinery_id();
            self.bookkeeping.insert(target, edge_id);
        }
        Ok(())
    }

    /// Removes the bookkeeping edge on `target`. Returns whether one existed.
    pub fn unmark(&mut self, target: ElementId) -> bool {
        self.bookkeeping.remove(&target).is_some()
    }

    pub fn is_marked(&self, target: ElementId) -> bool {
        self.bookkeeping.contains_key(&target)
    }

    /// Elements currently carrying a bookkeeping edge, ascending.
    pub fn marked_elements(&self) -> impl Iterator<Item = ElementId> + '_ {
        self.bookkeeping.keys().copied()
    }

    pub fn marked_count(&self) -> usize {
        self.bookkeeping.len()
    }

    /// The set of translated elements: everything (bookkeeping machinery
    /// excluded) without an adjacent bookkeeping edge. A graph that never
    /// had bookkeeping reports all its elements.
    pub fn bookkeeping_set(&self) -> BTreeSet<ElementId> {
        self.elements
            .keys()
            .copied()
            .filter(|id| !self.bookkeeping.contains_key(id))
            .collect()
    }

    /// Full invariant check; used after deserialization and in tests.
    pub fn validate(&self) -> Result<()> {
        for e in self.elements.values() {
            match e.kind() {
                ElementKind::Node => {
                    if e.src.is_some() || e.tgt.is_some() {
                        return Err(Error::input(format!("node {} has endpoints", e.id)));
                    }
                }
                ElementKind::Edge => {
                    let (src, tgt) = match (e.src, e.tgt) {
                        (Some(s), Some(t)) => (s, t),
                        _ => return Err(Error::input(format!("edge {} lacks endpoints", e.id))),
                    };
                    let et = match e.ty {
                        ElementType::Edge(et) => et,
                        ElementType::Node(_) => unreachable!(),
                    };
                    let def = self.type_graph.edge_type_def(et);
                    let src_el = self.get(src)?;
                    let ok_src = matches!(src_el.ty, ElementType::Node(nt)
                        if self.type_graph.node_type_name(nt) == def.source);
                    if !ok_src {
                        return Err(Error::input(format!("edge {} has ill-typed source", e.id)));
                    }
                    let tgt_el = self.get(tgt)?;
                    if tgt_el.kind() == ElementKind::Edge && !self.type_graph.is_edge_targeting(et) {
                        return Err(Error::input(format!(
                            "edge {} targets an edge but its type is not edge-targeting",
                            e.id
                        )));
                    }
                    let ok_tgt = match (&def.target.kind, tgt_el.ty) {
                        (ElementKind::Node, ElementType::Node(nt)) => {
                            self.type_graph.node_type_name(nt) == def.target.name
                        }
                        (ElementKind::Edge, ElementType::Edge(t)) => {
                            self.type_graph.edge_type_name(t) == def.target.name
                        }
                        _ => false,
                    };
                    if !ok_tgt {
                        return Err(Error::input(format!("edge {} has ill-typed target", e.id)));
                    }
                }
            }
        }
        for (&target, &edge_id) in &self.bookkeeping {
            if !self.elements.contains_key(&target) {
                return Err(Error::input(format!(
                    "bookkeeping edge {edge_id} targets missing element {target}"
                )));
            }
            if self.bookkeeping_node.is_none() {
                return Err(Error::input("bookkeeping edges without a bookkeeping node"));
            }
        }
        Ok(())
    }

    /// Restores bookkeeping state verbatim (deserialization only).
    pub(crate) fn restore_bookkeeping(
        &mut self,
        node: Option<ElementId>,
        edges: BTreeMap<ElementId, ElementId>,
    ) -> Result<()> {
        if node.is_none() && !edges.is_empty() {
            return Err(Error::format("bookkeeping edges without a bookkeeping node"));
        }
        self.bookkeeping_node = node;
        for &target in edges.keys() {
            if !self.elements.contains_key(&target) {
                return Err(Error::format(format!(
                    "bookkeeping edge targets missing element {target}"
                )));
            }
        }
        self.bookkeeping = edges;
        Ok(())
    }

    /// Raw bookkeeping table: target element -> bookkeeping edge id.
    pub fn bookkeeping_edges(&self) -> &BTreeMap<ElementId, ElementId> {
        &self.bookkeeping
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::typegraph::{EdgeTypeDef, TypeRef};

    fn tg() -> Arc<TypeGraph> {
        Arc::new(
            TypeGraph::new(
                vec!["A".into(), "B".into(), "K".into()],
                vec![
                    EdgeTypeDef { name: "ab".into(), source: "A".into(), target: TypeRef::node("B") },
                    EdgeTypeDef {
                        name: "link".into(),
                        source: "K".into(),
                        target: TypeRef::edge("ab"),
                    },
                ],
            )
            .unwrap(),
        )
    }

    #[test]
    fn endpoints_are_checked() {
        let mut g = Graph::new(tg());
        let a = g.add_node("A").unwrap();
        let b = g.add_node("B").unwrap();
        assert!(g.add_edge("ab", a, b).is_ok());
        assert!(g.add_edge("ab", b, a).is_err());
        assert!(g.add_edge("ab", a, ElementId(99)).is_err());
    }

    #[test]
    fn edge_targeting_is_gated_by_the_type_flag() {
        let mut g = Graph::new(tg());
        let a = g.add_node("A").unwrap();
        let b = g.add_node("B").unwrap();
        let e = g.add_edge("ab", a, b).unwrap();
        let k = g.add_node("K").unwrap();
        // `link` may target the edge; `ab` may not.
        assert!(g.add_edge("link", k, e).is_ok());
        assert!(g.add_edge("ab", a, e).is_err());
        g.validate().unwrap();
    }

    #[test]
    fn marking_is_idempotent_and_single_edged() {
        let mut g = Graph::new(tg());
        let a = g.add_node("A").unwrap();
        g.mark(a).unwrap();
        g.mark(a).unwrap();
        assert_eq!(g.marked_count(), 1);
        assert!(g.is_marked(a));
        assert!(g.unmark(a));
        assert!(!g.unmark(a));
        assert_eq!(g.marked_count(), 0);
    }

    #[test]
    fn bookkeeping_set_is_the_unmarked_complement() {
        let mut g = Graph::new(tg());
        let a = g.add_node("A").unwrap();
        let b = g.add_node("B").unwrap();
        let e = g.add_edge("ab", a, b).unwrap();
        // No bookkeeping node yet: everything counts as translated.
        assert_eq!(g.bookkeeping_set().len(), 3);
        g.mark(a).unwrap();
        g.mark(e).unwrap();
        assert_eq!(g.bookkeeping_set(), [b].into_iter().collect());
        g.unmark(a);
        assert_eq!(g.bookkeeping_set(), [a, b].into_iter().collect());
    }

    #[test]
    fn removal_refuses_dangling_edges_and_drops_marks() {
        let mut g = Graph::new(tg());
        let a = g.add_node("A").unwrap();
        let b = g.add_node("B").unwrap();
        let e = g.add_edge("ab", a, b).unwrap();
        g.mark(b).unwrap();
        assert!(g.remove_element(b).is_err());
        g.remove_element(e).unwrap();
        g.remove_element(b).unwrap();
        assert_eq!(g.marked_count(), 0);
        assert!(g.contains(a));
    }

    #[test]
    fn ids_are_never_reused() {
        let mut g = Graph::new(tg());
        let a = g.add_node("A").unwrap();
        g.remove_element(a).unwrap();
        let b = g.add_node("A").unwrap();
        assert_ne!(a, b);
    }
}
