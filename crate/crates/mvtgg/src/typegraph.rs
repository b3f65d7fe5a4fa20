//! Type graphs: the vocabulary a typed graph is checked against.
//!
//! A type graph declares node types and edge types. Edge types fix the
//! source node type and the target, where the target is usually a node type
//! but may be an edge type for the few edge kinds that point at edges
//! (correspondence links onto edges; bookkeeping is handled outside the
//! type graph entirely).

use crate::error::{Error, Result};
use crate::ids::ElementId;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Whether an element (or type) is a node or an edge.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Node,
    Edge,
}

impl std::fmt::Display for ElementKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ElementKind::Node => write!(f, "node"),
            ElementKind::Edge => write!(f, "edge"),
        }
    }
}

/// Reference to a type by kind and name, used for edge-type targets.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct TypeRef {
    pub kind: ElementKind,
    pub name: String,
}

impl TypeRef {
    pub fn node(name: impl Into<String>) -> Self {
        TypeRef { kind: ElementKind::Node, name: name.into() }
    }
    pub fn edge(name: impl Into<String>) -> Self {
        TypeRef { kind: ElementKind::Edge, name: name.into() }
    }
}

/// Declaration of an edge type: name, source node type, and target.
///
/// A target of kind `Edge` flags the type as edge-targeting; instances may
/// then (and only then) point at edges.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct EdgeTypeDef {
    pub name: String,
    pub source: String,
    pub target: TypeRef,
}

/// Interned index of a node type within its [`TypeGraph`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct NodeTypeId(pub u32);

/// Interned index of an edge type within its [`TypeGraph`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct EdgeTypeId(pub u32);

/// Immutable set of node and edge type declarations.
///
/// Names are unique within their kind. Once built, a type graph is shared
/// (via `Arc`) by every graph typed over it.
#[derive(Clone, Debug)]
pub struct TypeGraph {
    node_types: Vec<String>,
    edge_types: Vec<EdgeTypeDef>,
    node_index: BTreeMap<String, NodeTypeId>,
    edge_index: BTreeMap<String, EdgeTypeId>,
}

impl PartialEq for TypeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.node_types == other.node_types && self.edge_types == other.edge_types
    }
}
impl Eq for TypeGraph {}

impl TypeGraph {
    /// Builds and validates a type graph from declarations.
    ///
    /// Node type names are sorted so that equal declaration sets intern to
    /// equal type graphs regardless of declaration order.
    pub fn new(mut node_types: Vec<String>, mut edge_types: Vec<EdgeTypeDef>) -> Result<Self> {
        node_types.sort();
        edge_types.sort_by(|a, b| a.name.cmp(&b.name));
        let mut node_index = BTreeMap::new();
        for (i, n) in node_types.iter().enumerate() {
            if node_index.insert(n.clone(), NodeTypeId(i as u32)).is_some() {
                return Err(Error::config(format!("duplicate node type `{n}`")));
            }
        }
        let mut edge_index = BTreeMap::new();
        for (i, e) in edge_types.iter().enumerate() {
            if edge_index.insert(e.name.clone(), EdgeTypeId(i as u32)).is_some() {
                return Err(Error::config(format!("duplicate edge type `{}`", e.name)));
            }
        }
        let tg = TypeGraph { node_types, edge_types, node_index, edge_index };
        for e in &tg.edge_types {
            if tg.node_index.get(&e.source).is_none() {
                return Err(Error::config(format!(
                    "edge type `{}` has unknown source node type `{}`",
                    e.name, e.source
                )));
            }
            let target_ok = match e.target.kind {
                ElementKind::Node => tg.node_index.contains_key(&e.target.name),
                ElementKind::Edge => tg.edge_index.contains_key(&e.target.name),
            };
            if !target_ok {
                return Err(Error::config(format!(
                    "edge type `{}` has unknown target {} type `{}`",
                    e.name, e.target.kind, e.target.name
                )));
            }
        }
        Ok(tg)
    }

    pub fn node_type_names(&self) -> &[String] {
        &self.node_types
    }

    pub fn edge_type_defs(&self) -> &[EdgeTypeDef] {
        &self.edge_types
    }

    pub fn node_type(&self, name: &str) -> Option<NodeTypeId> {
        self.node_index.get(name).copied()
    }

    pub fn edge_type(&self, name: &str) -> Option<EdgeTypeId> {
        self.edge_index.get(name).copied()
    }

    pub fn node_type_name(&self, id: NodeTypeId) -> &str {
        &self.node_types[id.0 as usize]
    }

    pub fn edge_type_name(&self, id: EdgeTypeId) -> &str {
        &self.edge_types[id.0 as usize].name
    }

    pub fn edge_type_def(&self, id: EdgeTypeId) -> &EdgeTypeDef {
        &self.edge_types[id.0 as usize]
    }

    pub fn node_type_count(&self) -> usize {
        self.node_types.len()
    }

    pub fn edge_type_count(&self) -> usize {
        self.edge_types.len()
    }

    /// True when instances of this edge type point at edges.
    pub fn is_edge_targeting(&self, id: EdgeTypeId) -> bool {
        self.edge_types[id.0 as usize].target.kind == ElementKind::Edge
    }
}

/// Type tag carried by every element: the interned type in its kind's space.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum ElementType {
    Node(NodeTypeId),
    Edge(EdgeTypeId),
}

impl ElementType {
    pub fn kind(&self) -> ElementKind {
        match self {
            ElementType::Node(_) => ElementKind::Node,
            ElementType::Edge(_) => ElementKind::Edge,
        }
    }
}

/// One element participating in an edge endpoint, as (kind, id).
///
/// Only used in error reporting; the graph itself stores plain ids.
#[derive(Clone, Copy, Debug)]
pub struct Endpoint {
    pub kind: ElementKind,
    pub id: ElementId,
}
