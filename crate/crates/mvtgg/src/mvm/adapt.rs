//! Adaptation of grammars to the multi-version encoding.
//!
//! In the multi-version graph every source and target element — edges
//! included — becomes a node, so that presence and translation state can be
//! tracked per element as version sets. An original edge of type `E` is
//! encoded as a node of type `E` plus two reference edges `E.src` and
//! `E.tgt` pointing at the encoded endpoints. Correspondence nodes pass
//! through unchanged, and correspondence links keep their type name but
//! point at the encoding node of whatever they linked. Forward rules are
//! rewritten over this encoding; matching them needs no edge-targeting
//! edges at all.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::ids::ElementId;
use crate::rule::Rule;
use crate::tgg::{Domain, ForwardRule, Grammar};
use crate::typegraph::{EdgeTypeDef, ElementKind, TypeGraph, TypeRef};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

/// What a node type in the multi-version type graph encodes.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum MvNodeRole {
    SourceNode,
    SourceEdge(EdgeTypeDef),
    CorrNode,
    TargetNode,
    TargetEdge(EdgeTypeDef),
}

impl MvNodeRole {
    pub fn domain(&self) -> Domain {
        match self {
            MvNodeRole::SourceNode | MvNodeRole::SourceEdge(_) => Domain::Source,
            MvNodeRole::CorrNode => Domain::Corr,
            MvNodeRole::TargetNode | MvNodeRole::TargetEdge(_) => Domain::Target,
        }
    }

    /// The original edge type definition, for edge-encoding node types.
    pub fn encoded_edge(&self) -> Option<&EdgeTypeDef> {
        match self {
            MvNodeRole::SourceEdge(def) | MvNodeRole::TargetEdge(def) => Some(def),
            _ => None,
        }
    }
}

/// The multi-version type graph plus what each node type stands for.
#[derive(Clone, Debug)]
pub struct MvSchema {
    pub type_graph: Arc<TypeGraph>,
    pub roles: BTreeMap<String, MvNodeRole>,
    /// Correspondence link type names (shared with the original grammar).
    pub link_types: BTreeSet<String>,
    /// Reference edge type name -> (encoded edge type, true for `src`).
    ref_kinds: BTreeMap<String, (String, bool)>,
}

/// Reference edge type names for an encoded edge type.
pub fn ref_type_names(edge_type: &str) -> (String, String) {
    (format!("{edge_type}.src"), format!("{edge_type}.tgt"))
}

impl MvSchema {
    /// Derives the multi-version type graph from a grammar.
    pub fn build(grammar: &Grammar) -> Result<Self> {
        if !grammar.ttg.corr.edge_type_defs().is_empty() {
            return Err(Error::config(
                "correspondence-internal edge types are not supported in the multi-version encoding",
            ));
        }
        let mut roles: BTreeMap<String, MvNodeRole> = BTreeMap::new();
        let mut claim = |name: &str, role: MvNodeRole| -> Result<()> {
            if roles.insert(name.to_string(), role).is_some() {
                return Err(Error::config(format!(
                    "type name `{name}` is used by both a node type and an edge type; the multi-version encoding needs distinct names"
                )));
            }
            Ok(())
        };
        for n in grammar.ttg.source.node_type_names() {
            claim(n, MvNodeRole::SourceNode)?;
        }
        for e in grammar.ttg.source.edge_type_defs() {
            claim(&e.name, MvNodeRole::SourceEdge(e.clone()))?;
        }
        for n in grammar.ttg.corr.node_type_names() {
            claim(n, MvNodeRole::CorrNode)?;
        }
        for n in grammar.ttg.target.node_type_names() {
            claim(n, MvNodeRole::TargetNode)?;
        }
        for e in grammar.ttg.target.edge_type_defs() {
            claim(&e.name, MvNodeRole::TargetEdge(e.clone()))?;
        }
        let node_types: Vec<String> = roles.keys().cloned().collect();
        let mut edge_types: Vec<EdgeTypeDef> = Vec::new();
        let mut ref_kinds: BTreeMap<String, (String, bool)> = BTreeMap::new();
        for role in roles.values() {
            if let Some(def) = role.encoded_edge() {
                let (src_ty, tgt_ty) = ref_type_names(&def.name);
                ref_kinds.insert(src_ty.clone(), (def.name.clone(), true));
                ref_kinds.insert(tgt_ty.clone(), (def.name.clone(), false));
                edge_types.push(EdgeTypeDef {
                    name: src_ty,
                    source: def.name.clone(),
                    target: TypeRef::node(&def.source),
                });
                edge_types.push(EdgeTypeDef {
                    name: tgt_ty,
                    source: def.name.clone(),
                    target: TypeRef::node(&def.target.name),
                });
            }
        }
        for link in &grammar.ttg.links {
            edge_types.push(EdgeTypeDef {
                name: link.name.clone(),
                source: link.corr_node_type.clone(),
                target: TypeRef::node(&link.linked.name),
            });
        }
        let type_graph = Arc::new(TypeGraph::new(node_types, edge_types)?);
        Ok(MvSchema {
            type_graph,
            roles,
            link_types: grammar.link_type_names().clone(),
            ref_kinds,
        })
    }

    /// For a reference edge type: the encoded edge type and whether this is
    /// the `src` reference.
    pub fn ref_kind(&self, edge_type_name: &str) -> Option<(&str, bool)> {
        self.ref_kinds.get(edge_type_name).map(|(n, s)| (n.as_str(), *s))
    }

    pub fn role(&self, node_type: &str) -> Option<&MvNodeRole> {
        self.roles.get(node_type)
    }

    /// Role of a node in a graph typed over this schema.
    pub fn role_of(&self, graph: &Graph, id: ElementId) -> Result<&MvNodeRole> {
        let name = graph.type_name(id)?;
        self.roles
            .get(name)
            .ok_or_else(|| Error::config(format!("`{name}` is not an encoding node type")))
    }
}

/// Rewrites a graph over the merged type graph into the multi-version
/// encoding. Element ids are preserved; reference edges get ids from
/// `ref_ids`, allocating from `next_ref` on first sight so that related
/// graphs (a rule's lhs and rhs) agree on them.
fn adapt_graph(
    g: &Graph,
    grammar: &Grammar,
    schema: &MvSchema,
    ref_ids: &mut BTreeMap<(ElementId, bool), ElementId>,
    next_ref: &mut u64,
) -> Result<Graph> {
    let mut out = Graph::new(schema.type_graph.clone());
    // Every original node and every source/target edge becomes a node.
    for e in g.elements() {
        match e.kind() {
            ElementKind::Node => out.add_node_with_id(e.id, g.type_name(e.id)?)?,
            ElementKind::Edge => {
                if grammar.is_link_edge(g, e.id)? {
                    continue;
                }
                out.add_node_with_id(e.id, g.type_name(e.id)?)?;
            }
        }
    }
    // Reference edges for encoded edges, then links retargeted at encodings.
    fn alloc_ref(
        ref_ids: &mut BTreeMap<(ElementId, bool), ElementId>,
        next: &mut u64,
        key: (ElementId, bool),
    ) -> ElementId {
        *ref_ids.entry(key).or_insert_with(|| {
            let id = ElementId(*next);
            *next += 1;
            id
        })
    }
    for e in g.elements() {
        if e.kind() != ElementKind::Edge || grammar.is_link_edge(g, e.id)? {
            continue;
        }
        let ty = g.type_name(e.id)?;
        let (src_ty, tgt_ty) = ref_type_names(ty);
        let src_id = alloc_ref(ref_ids, next_ref, (e.id, true));
        out.add_edge_with_id(src_id, &src_ty, e.id, e.src.expect("edge"))?;
        let tgt_id = alloc_ref(ref_ids, next_ref, (e.id, false));
        out.add_edge_with_id(tgt_id, &tgt_ty, e.id, e.tgt.expect("edge"))?;
    }
    for e in g.elements() {
        if e.kind() == ElementKind::Edge && grammar.is_link_edge(g, e.id)? {
            out.add_edge_with_id(e.id, g.type_name(e.id)?, e.src.expect("edge"), e.tgt.expect("edge"))?;
        }
    }
    Ok(out)
}

/// A forward rule over the multi-version encoding.
#[derive(Clone, Debug)]
pub struct MvRule {
    pub rule: Rule,
    /// Lhs nodes whose untranslated sets the application consumes.
    pub translation_image: BTreeSet<ElementId>,
    /// Lhs source-domain nodes outside the translation image; their
    /// untranslated sets veto versions.
    pub context_source: BTreeSet<ElementId>,
    /// All lhs nodes carrying presence sets (every lhs node).
    pub p_carrying: Vec<ElementId>,
    /// Created rhs nodes that receive the application's version set.
    pub created_p_carriers: Vec<ElementId>,
    /// The created correspondence node (rhs id).
    pub created_corr: ElementId,
    /// Lhs correspondence nodes (context requirements).
    pub required_corr: BTreeSet<ElementId>,
}

/// Rewrites one forward rule into the multi-version encoding.
pub fn adapt_rule(fr: &ForwardRule, grammar: &Grammar, schema: &MvSchema) -> Result<MvRule> {
    let max_id = fr.rule.rhs.elements().map(|e| e.id.0).max().unwrap_or(0);
    let mut ref_ids = BTreeMap::new();
    let mut next_ref = max_id + 1;
    let rhs = adapt_graph(&fr.rule.rhs, grammar, schema, &mut ref_ids, &mut next_ref)?;
    let lhs = adapt_graph(&fr.rule.lhs, grammar, schema, &mut ref_ids, &mut next_ref)?;
    let rule = Rule::inclusion_production(&fr.rule.name, lhs, rhs, BTreeSet::new())?;

    let translation_image = fr.translation_set.clone();
    let mut context_source = BTreeSet::new();
    let mut p_carrying = Vec::new();
    let mut required_corr = BTreeSet::new();
    for e in rule.lhs.elements() {
        if e.kind() != ElementKind::Node {
            continue;
        }
        p_carrying.push(e.id);
        let role = schema.role_of(&rule.lhs, e.id)?;
        match role.domain() {
            Domain::Source => {
                if !translation_image.contains(&e.id) {
                    context_source.insert(e.id);
                }
            }
            Domain::Corr => {
                required_corr.insert(e.id);
            }
            Domain::Target => {}
        }
    }
    let mut created_p_carriers = Vec::new();
    let mut created_corr = None;
    for id in rule.created_elements() {
        let e = rule.rhs.element(id).expect("listed");
        if e.kind() != ElementKind::Node {
            continue;
        }
        created_p_carriers.push(id);
        if schema.role_of(&rule.rhs, id)?.domain() == Domain::Corr {
            if created_corr.replace(id).is_some() {
                return Err(Error::config(format!(
                    "rule `{}` creates more than one correspondence node",
                    rule.name
                )));
            }
        }
    }
    let created_corr = created_corr.ok_or_else(|| {
        Error::config(format!("rule `{}` creates no correspondence node", rule.name))
    })?;
    Ok(MvRule {
        rule,
        translation_image,
        context_source,
        p_carrying,
        created_p_carriers,
        created_corr,
        required_corr,
    })
}

/// A grammar compiled for multi-version execution: the encoding schema and
/// every forward rule rewritten over it.
#[derive(Clone, Debug)]
pub struct MvGrammar {
    pub schema: MvSchema,
    pub rules: Vec<MvRule>,
}

impl MvGrammar {
    pub fn new(grammar: &Grammar) -> Result<Self> {
        let schema = MvSchema::build(grammar)?;
        let rules = grammar
            .forward
            .iter()
            .map(|fr| adapt_rule(fr, grammar, &schema))
            .collect::<Result<Vec<_>>>()?;
        Ok(MvGrammar { schema, rules })
    }
}
