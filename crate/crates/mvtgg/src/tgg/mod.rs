//! Triple graph grammars over source, correspondence, and target graphs.
//!
//! A triple type graph declares three domains (disjoint by type name) plus
//! the correspondence link edge types that attach correspondence nodes to
//! the source/target elements they relate — links may point at edges, which
//! is where edge-targeting edge types come from. Grammar rules are
//! non-deleting productions over the merged type graph; every rule creates
//! exactly one correspondence node, and every source/target element of a
//! rule is linked to exactly one correspondence node.
//!
//! From each rule a forward rule is derived: the rule's created source
//! elements move into the left-hand side (they are required to exist
//! already) and form the translation set, whose bookkeeping edges the
//! forward application deletes.

pub mod triplet;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::ids::ElementId;
use crate::rule::Rule;
use crate::typegraph::{EdgeTypeDef, ElementKind, TypeGraph, TypeRef};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

/// Which of the three graphs an element belongs to.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Source,
    Corr,
    Target,
}

/// Declaration of one correspondence link edge type.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct LinkEdgeType {
    pub name: String,
    /// Correspondence node type the link starts from.
    pub corr_node_type: String,
    /// Source- or target-domain element type the link points at.
    pub linked: TypeRef,
}

/// The three type graphs plus correspondence link declarations.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TripleTypeGraph {
    pub source: TypeGraph,
    pub corr: TypeGraph,
    pub target: TypeGraph,
    pub links: Vec<LinkEdgeType>,
}

/// Maps a (kind, type name) pair to its domain within the merged graph.
pub type DomainMap = BTreeMap<(ElementKind, String), Domain>;

impl TripleTypeGraph {
    /// Merges the three domains and the link edge types into one type graph.
    ///
    /// Errors when type names collide across domains or a link declaration
    /// dangles.
    pub fn merged(&self) -> Result<(Arc<TypeGraph>, DomainMap)> {
        let mut domains: DomainMap = BTreeMap::new();
        let mut node_types = Vec::new();
        let mut edge_types = Vec::new();
        for (tg, dom) in
            [(&self.source, Domain::Source), (&self.corr, Domain::Corr), (&self.target, Domain::Target)]
        {
            for n in tg.node_type_names() {
                if domains.insert((ElementKind::Node, n.clone()), dom).is_some() {
                    return Err(Error::config(format!(
                        "node type `{n}` appears in more than one domain"
                    )));
                }
                node_types.push(n.clone());
            }
            for e in tg.edge_type_defs() {
                if domains.insert((ElementKind::Edge, e.name.clone()), dom).is_some() {
                    return Err(Error::config(format!(
                        "edge type `{}` appears in more than one domain",
                        e.name
                    )));
                }
                edge_types.push(e.clone());
            }
        }
        for link in &self.links {
            if self.corr.node_type(&link.corr_node_type).is_none() {
                return Err(Error::config(format!(
                    "link type `{}` starts from unknown correspondence node type `{}`",
                    link.name, link.corr_node_type
                )));
            }
            let linked_domain = domains.get(&(link.linked.kind, link.linked.name.clone()));
            match linked_domain {
                Some(Domain::Source) | Some(Domain::Target) => {}
                _ => {
                    return Err(Error::config(format!(
                        "link type `{}` points at `{}` which is not a source or target type",
                        link.name, link.linked.name
                    )))
                }
            }
            if domains
                .insert((ElementKind::Edge, link.name.clone()), Domain::Corr)
                .is_some()
            {
                return Err(Error::config(format!(
                    "link type `{}` collides with another edge type",
                    link.name
                )));
            }
            edge_types.push(EdgeTypeDef {
                name: link.name.clone(),
                source: link.corr_node_type.clone(),
                target: link.linked.clone(),
            });
        }
        let merged = TypeGraph::new(node_types, edge_types)?;
        Ok((Arc::new(merged), domains))
    }
}

/// One grammar rule: a non-deleting production whose lhs is an id-wise
/// subgraph of its rhs.
#[derive(Clone, Debug)]
pub struct TggRule {
    pub rule: Rule,
}

impl TggRule {
    pub fn new(name: impl Into<String>, lhs: Graph, rhs: Graph) -> Result<Self> {
        Ok(TggRule { rule: Rule::inclusion_production(name, lhs, rhs, BTreeSet::new())? })
    }

    pub fn name(&self) -> &str {
        &self.rule.name
    }

    /// Rhs element ids not present in the lhs.
    pub fn created_ids(&self) -> BTreeSet<ElementId> {
        self.rule.created_elements().into_iter().collect()
    }
}

/// Domain of an element of a graph typed over the merged type graph.
pub fn domain_of(graph: &Graph, domains: &DomainMap, id: ElementId) -> Result<Domain> {
    let e = graph.get(id)?;
    let name = graph.type_name(id)?.to_string();
    domains
        .get(&(e.kind(), name.clone()))
        .copied()
        .ok_or_else(|| Error::config(format!("type `{name}` has no domain assignment")))
}

/// A finding from grammar validation.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Diagnostic {
    pub rule: String,
    pub code: String,
    pub message: String,
}

/// Validates grammar rules against the merged type graph.
///
/// Checked per rule: exactly one created correspondence node
/// (`corr-node-count`), every source/target element linked to exactly one
/// correspondence node (`unlinked-element`), and a nonempty derived
/// translation set (`empty-translation-set` — rules that create no source
/// elements cannot be executed forward).
pub fn validate_tgg(
    rules: &[TggRule],
    merged: &Arc<TypeGraph>,
    domains: &DomainMap,
) -> Result<Vec<Diagnostic>> {
    let mut out = Vec::new();
    for tr in rules {
        let name = tr.name().to_string();
        if tr.rule.rhs.type_graph() != merged {
            return Err(Error::config(format!(
                "rule `{name}` is not typed over the merged type graph"
            )));
        }
        let created = tr.created_ids();
        let mut created_corr_nodes = 0usize;
        for &id in &created {
            let e = tr.rule.rhs.element(id).unwrap();
            if e.kind() == ElementKind::Node
                && domain_of(&tr.rule.rhs, domains, id)? == Domain::Corr
            {
                created_corr_nodes += 1;
            }
        }
        if created_corr_nodes != 1 {
            out.push(Diagnostic {
                rule: name.clone(),
                code: "corr-node-count".into(),
                message: format!("rule creates {created_corr_nodes} correspondence nodes, expected exactly 1"),
            });
        }
        // Count correspondence links onto every source/target element: each
        // must be linked to exactly one correspondence node, and for context
        // elements the link must already be part of the lhs.
        for (graph, scope) in [(&tr.rule.lhs, "lhs"), (&tr.rule.rhs, "rhs")] {
            let mut link_counts: BTreeMap<ElementId, usize> = BTreeMap::new();
            for e in graph.elements() {
                let dom = domain_of(graph, domains, e.id)?;
                if matches!(dom, Domain::Source | Domain::Target) {
                    link_counts.entry(e.id).or_insert(0);
                }
            }
            for e in graph.elements() {
                if e.kind() != ElementKind::Edge {
                    continue;
                }
                if domain_of(graph, domains, e.id)? != Domain::Corr {
                    continue;
                }
                // Corr-domain edges pointing at source/target elements are
                // exactly the correspondence links.
                if let Some(c) = link_counts.get_mut(&e.tgt.unwrap()) {
                    *c += 1;
                }
            }
            for (id, count) in link_counts {
                if count != 1 {
                    out.push(Diagnostic {
                        rule: name.clone(),
                        code: "unlinked-element".into(),
                        message: format!(
                            "{scope} element {id} is linked to {count} correspondence nodes, expected exactly 1"
                        ),
                    });
                }
            }
        }
        let translation_set = forward_translation_set(tr, domains)?;
        if translation_set.is_empty() {
            out.push(Diagnostic {
                rule: name.clone(),
                code: "empty-translation-set".into(),
                message: "rule creates no source elements; it cannot be executed forward".into(),
            });
        }
    }
    Ok(out)
}

/// Created source-domain elements of a rule: the forward translation set.
fn forward_translation_set(tr: &TggRule, domains: &DomainMap) -> Result<BTreeSet<ElementId>> {
    let mut set = BTreeSet::new();
    for id in tr.created_ids() {
        if domain_of(&tr.rule.rhs, domains, id)? == Domain::Source {
            set.insert(id);
        }
    }
    Ok(set)
}

/// A forward rule: requires the rule's source creations to exist (marked),
/// creates the correspondence and target parts, and deletes the bookkeeping
/// edges of the translation set.
#[derive(Clone, Debug)]
pub struct ForwardRule {
    pub rule: Rule,
    /// Lhs elements whose bookkeeping edges an application deletes.
    pub translation_set: BTreeSet<ElementId>,
}

impl ForwardRule {
    /// Lhs corr-domain nodes: correspondence context an application requires.
    pub fn required_corr_ids(&self, domains: &DomainMap) -> BTreeSet<ElementId> {
        self.rule
            .lhs
            .elements()
            .filter(|e| e.kind() == ElementKind::Node)
            .filter(|e| {
                domain_of(&self.rule.lhs, domains, e.id).map_or(false, |d| d == Domain::Corr)
            })
            .map(|e| e.id)
            .collect()
    }

    /// The single corr node the rule creates, by rhs id.
    pub fn created_corr_id(&self, domains: &DomainMap) -> Result<ElementId> {
        for id in self.rule.created_elements() {
            let e = self.rule.rhs.element(id).unwrap();
            if e.kind() == ElementKind::Node
                && domain_of(&self.rule.rhs, domains, id)? == Domain::Corr
            {
                return Ok(id);
            }
        }
        Err(Error::config(format!("rule `{}` creates no correspondence node", self.rule.name)))
    }
}

/// Derives the forward rule of every grammar rule.
///
/// The forward lhs is the rule lhs plus the created source elements (the
/// translation set); the rhs is unchanged. Ids are shared with the rhs, so
/// both span legs stay inclusions. Errors if validation reported any
/// diagnostic.
pub fn derive_forward_rules(
    rules: &[TggRule],
    merged: &Arc<TypeGraph>,
    domains: &DomainMap,
) -> Result<Vec<ForwardRule>> {
    let diags = validate_tgg(rules, merged, domains)?;
    if !diags.is_empty() {
        let d = &diags[0];
        return Err(Error::config(format!(
            "invalid grammar: rule `{}`: {} ({} finding(s) total)",
            d.rule,
            d.message,
            diags.len()
        )));
    }
    let mut out = Vec::new();
    for tr in rules {
        let translation_set = forward_translation_set(tr, domains)?;
        let mut keep: BTreeSet<ElementId> = tr.rule.lhs.elements().map(|e| e.id).collect();
        keep.extend(translation_set.iter().copied());
        let mut lhs = Graph::new(merged.clone());
        // Nodes first so edges find their endpoints.
        for e in tr.rule.rhs.elements() {
            if e.kind() == ElementKind::Node && keep.contains(&e.id) {
                lhs.add_node_with_id(e.id, tr.rule.rhs.type_name(e.id)?)?;
            }
        }
        // Source edges may target other source edges only via links, which
        // are corr-domain; plain source/target edges connect nodes, so one
        // edge pass suffices, followed by link edges onto edges.
        let mut deferred = Vec::new();
        for e in tr.rule.rhs.elements() {
            if e.kind() != ElementKind::Edge || !keep.contains(&e.id) {
                continue;
            }
            let tgt = e.tgt.unwrap();
            if tr.rule.rhs.element(tgt).unwrap().kind() == ElementKind::Edge {
                deferred.push(e.id);
                continue;
            }
            lhs.add_edge_with_id(e.id, tr.rule.rhs.type_name(e.id)?, e.src.unwrap(), tgt)?;
        }
        for id in deferred {
            let e = tr.rule.rhs.element(id).unwrap();
            lhs.add_edge_with_id(id, tr.rule.rhs.type_name(id)?, e.src.unwrap(), e.tgt.unwrap())?;
        }
        let rule = Rule::inclusion_production(
            tr.name(),
            lhs,
            tr.rule.rhs.clone(),
            translation_set.clone(),
        )?;
        out.push(ForwardRule { rule, translation_set });
    }
    Ok(out)
}

/// A validated grammar: triple type graph, rules, merged type graph, domain
/// assignment, and the derived forward rules.
#[derive(Clone, Debug)]
pub struct Grammar {
    pub ttg: TripleTypeGraph,
    pub rules: Vec<TggRule>,
    pub merged: Arc<TypeGraph>,
    pub domains: DomainMap,
    pub forward: Vec<ForwardRule>,
    link_type_names: BTreeSet<String>,
}

impl Grammar {
    pub fn new(ttg: TripleTypeGraph, rules: Vec<TggRule>) -> Result<Self> {
        let (merged, domains) = ttg.merged()?;
        for r in &rules {
            if **r.rule.rhs.type_graph() != *merged {
                return Err(Error::config(format!(
                    "rule `{}` is not typed over this grammar's merged type graph",
                    r.name()
                )));
            }
        }
        let forward = derive_forward_rules(&rules, &merged, &domains)?;
        let link_type_names = ttg.links.iter().map(|l| l.name.clone()).collect();
        Ok(Grammar { ttg, rules, merged, domains, forward, link_type_names })
    }

    pub fn source_type_graph(&self) -> &TypeGraph {
        &self.ttg.source
    }

    pub fn domain_of_type(&self, kind: ElementKind, name: &str) -> Option<Domain> {
        self.domains.get(&(kind, name.to_string())).copied()
    }

    /// Domain of a concrete element in a graph typed over `merged`.
    pub fn element_domain(&self, graph: &Graph, id: ElementId) -> Result<Domain> {
        domain_of(graph, &self.domains, id)
    }

    /// True when the element's type is a correspondence link edge type.
    pub fn is_link_edge(&self, graph: &Graph, id: ElementId) -> Result<bool> {
        let e = graph.get(id)?;
        if e.kind() != ElementKind::Edge {
            return Ok(false);
        }
        Ok(self.link_type_names.contains(graph.type_name(id)?))
    }

    /// Names of the correspondence link edge types.
    pub fn link_type_names(&self) -> &BTreeSet<String> {
        &self.link_type_names
    }
}
