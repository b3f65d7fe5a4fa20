//! Production rules and their application.
//!
//! A [`Rule`] is a span `lhs <-l- glueing -r-> rhs` of graphs over one type
//! graph. The rules in this engine are productions: they never delete nodes
//! or regular edges (`l` is a bijection), and the only deletion they perform
//! is dropping bookkeeping edges from the elements listed in
//! [`Rule::deleted_bookkeeping_targets`] — that is how an application marks
//! elements as translated.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::ids::ElementId;
use crate::matcher::TypeIndex;
use crate::morphism::Morphism;
use crate::typegraph::ElementKind;
use std::collections::BTreeSet;

/// A production rule over a shared type graph.
#[derive(Clone, Debug)]
pub struct Rule {
    pub name: String,
    pub lhs: Graph,
    pub glueing: Graph,
    pub rhs: Graph,
    /// Embedding of the glueing into the lhs (bijective for productions).
    pub l: Morphism,
    /// Embedding of the glueing into the rhs.
    pub r: Morphism,
    /// Lhs elements whose bookkeeping edges the application deletes.
    pub deleted_bookkeeping_targets: BTreeSet<ElementId>,
}

impl Rule {
    /// Builds a production from an lhs that is an id-wise subgraph of the
    /// rhs: the glueing is the lhs, `l` the identity, `r` the inclusion.
    pub fn inclusion_production(
        name: impl Into<String>,
        lhs: Graph,
        rhs: Graph,
        deleted_bookkeeping_targets: BTreeSet<ElementId>,
    ) -> Result<Self> {
        let name = name.into();
        for e in lhs.elements() {
            match rhs.element(e.id) {
                Some(r) if r.ty == e.ty && r.src == e.src && r.tgt == e.tgt => {}
                _ => {
                    return Err(Error::config(format!(
                        "rule `{name}`: lhs element {} is not an rhs element",
                        e.id
                    )))
                }
            }
        }
        let ident = Morphism::identity(&lhs);
        let rule = Rule {
            name,
            glueing: lhs.clone(),
            l: ident.clone(),
            r: ident,
            lhs,
            rhs,
            deleted_bookkeeping_targets,
        };
        rule.validate()?;
        Ok(rule)
    }

    /// Checks the production discipline: monomorphic span legs, `l`
    /// bijective, bookkeeping targets inside the lhs.
    pub fn validate(&self) -> Result<()> {
        self.l.check(&self.glueing, &self.lhs)?;
        self.r.check(&self.glueing, &self.rhs)?;
        if !self.l.is_injective() || !self.r.is_injective() {
            return Err(Error::config(format!("rule `{}`: span legs must be injective", self.name)));
        }
        if self.l.len() != self.lhs.element_count() {
            return Err(Error::config(format!(
                "rule `{}`: productions may not delete elements",
                self.name
            )));
        }
        for &t in &self.deleted_bookkeeping_targets {
            if !self.lhs.contains(t) {
                return Err(Error::config(format!(
                    "rule `{}`: bookkeeping target {t} is not an lhs element",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Rhs elements not in the image of `r`, i.e. what an application
    /// creates, nodes first then edges, ascending by id.
    pub fn created_elements(&self) -> Vec<ElementId> {
        let image: BTreeSet<ElementId> =
            self.glueing.elements().filter_map(|e| self.r.get(e.id)).collect();
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for e in self.rhs.elements() {
            if !image.contains(&e.id) {
                match e.kind() {
                    ElementKind::Node => nodes.push(e.id),
                    ElementKind::Edge => edges.push(e.id),
                }
            }
        }
        nodes.extend(edges);
        nodes
    }
}

/// Result of applying a rule: the comatch maps rhs elements to host
/// elements; `created` lists the freshly added host ids in creation order.
#[derive(Clone, Debug)]
pub struct Application {
    pub comatch: Morphism,
    pub created: Vec<ElementId>,
}

/// Applies `rule` at `m` in place.
///
/// Preconditions checked here: `m` is an injective embedding of the lhs and
/// every deleted-bookkeeping target's image actually carries a bookkeeping
/// edge (`NotApplicable` otherwise). The application deletes exactly those
/// bookkeeping edges and adds the rhs-minus-glueing elements. The optional
/// `index` is kept in sync with the additions.
pub fn apply_rule(
    rule: &Rule,
    host: &mut Graph,
    m: &Morphism,
    mut index: Option<&mut TypeIndex>,
) -> Result<Application> {
    m.check(&rule.lhs, host)?;
    if !m.is_injective() {
        return Err(Error::contract(format!(
            "rule `{}`: match must be injective",
            rule.name
        )));
    }
    for &t in &rule.deleted_bookkeeping_targets {
        let img = m.get(t).expect("checked total");
        if !host.is_marked(img) {
            return Err(Error::not_applicable(format!(
                "rule `{}`: element {img} carries no bookkeeping edge",
                rule.name
            )));
        }
    }
    for &t in &rule.deleted_bookkeeping_targets {
        host.unmark(m.get(t).expect("checked total"));
    }

    // Comatch starts as m pulled along the span: r(k) -> m(l(k)).
    let mut comatch = Morphism::new();
    for k in rule.glueing.elements() {
        let in_lhs = rule.l.get(k.id).expect("span checked");
        let in_rhs = rule.r.get(k.id).expect("span checked");
        let img = m.get(in_lhs).expect("match total");
        match k.kind() {
            ElementKind::Node => comatch.node_map.insert(in_rhs, img),
            ElementKind::Edge => comatch.edge_map.insert(in_rhs, img),
        };
    }
    // Create rhs-minus-glueing elements; nodes precede edges so endpoints
    // exist by the time each edge is added.
    let mut created = Vec::new();
    for rid in rule.created_elements() {
        let proto = rule.rhs.element(rid).expect("listed");
        let ty_name = rule.rhs.type_name(rid)?.to_string();
        let new_id = match proto.kind() {
            ElementKind::Node => {
                let id = host.add_node(&ty_name)?;
                comatch.node_map.insert(rid, id);
                id
            }
            ElementKind::Edge => {
                let src = comatch.get(proto.src.unwrap()).ok_or_else(|| {
                    Error::config(format!(
                        "rule `{}`: edge {rid} source is outside the rhs",
                        rule.name
                    ))
                })?;
                let tgt = comatch.get(proto.tgt.unwrap()).ok_or_else(|| {
                    Error::config(format!(
                        "rule `{}`: edge {rid} target is outside the rhs",
                        rule.name
                    ))
                })?;
                let id = host.add_edge(&ty_name, src, tgt)?;
                comatch.edge_map.insert(rid, id);
                id
            }
        };
        if let Some(idx) = index.as_deref_mut() {
            idx.insert(host.element(new_id).expect("just added"));
        }
        created.push(new_id);
    }
    Ok(Application { comatch, created })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcher::find_matches_fresh;
    use crate::typegraph::{EdgeTypeDef, TypeGraph, TypeRef};
    use std::sync::Arc;

    fn tg() -> Arc<TypeGraph> {
        Arc::new(
            TypeGraph::new(
                vec!["A".into(), "B".into()],
                vec![EdgeTypeDef {
                    name: "ab".into(),
                    source: "A".into(),
                    target: TypeRef::node("B"),
                }],
            )
            .unwrap(),
        )
    }

    /// A -> A plus a fresh B and an edge to it; translates the matched A.
    fn grow_rule(tgr: &Arc<TypeGraph>) -> Rule {
        let mut lhs = Graph::new(tgr.clone());
        let a = lhs.add_node("A").unwrap();
        let mut rhs = Graph::new(tgr.clone());
        rhs.add_node_with_id(a, "A").unwrap();
        let b = rhs.add_node("B").unwrap();
        rhs.add_edge("ab", a, b).unwrap();
        Rule::inclusion_production("grow", lhs, rhs, [a].into_iter().collect()).unwrap()
    }

    #[test]
    fn application_creates_exactly_rhs_minus_glueing() {
        let tgr = tg();
        let rule = grow_rule(&tgr);
        let mut host = Graph::new(tgr);
        let a = host.add_node("A").unwrap();
        host.mark(a).unwrap();
        let m = &find_matches_fresh(&rule.lhs, &host, None).unwrap()[0];
        let app = apply_rule(&rule, &mut host, m, None).unwrap();
        assert_eq!(app.created.len(), 2);
        assert_eq!(host.element_count(), 3);
        assert!(!host.is_marked(a));
        host.validate().unwrap();
    }

    #[test]
    fn missing_bookkeeping_edge_blocks_application() {
        let tgr = tg();
        let rule = grow_rule(&tgr);
        let mut host = Graph::new(tgr);
        host.add_node("A").unwrap();
        let m = &find_matches_fresh(&rule.lhs, &host, None).unwrap()[0];
        let err = apply_rule(&rule, &mut host, m, None).unwrap_err();
        assert!(matches!(err, Error::NotApplicable(_)));
        // Host unchanged.
        assert_eq!(host.element_count(), 1);
    }

    #[test]
    fn non_injective_match_is_a_contract_violation() {
        let tgr = tg();
        let mut lhs = Graph::new(tgr.clone());
        let a1 = lhs.add_node("A").unwrap();
        let a2 = lhs.add_node("A").unwrap();
        let rule =
            Rule::inclusion_production("two", lhs.clone(), lhs.clone(), BTreeSet::new()).unwrap();
        let mut host = Graph::new(tgr);
        let h = host.add_node("A").unwrap();
        let mut m = Morphism::new();
        m.node_map.insert(a1, h);
        m.node_map.insert(a2, h);
        let err = apply_rule(&rule, &mut host, &m, None).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn created_elements_orders_nodes_before_edges() {
        let tgr = tg();
        let rule = grow_rule(&tgr);
        let created = rule.created_elements();
        assert_eq!(created.len(), 2);
        let kinds: Vec<ElementKind> =
            created.iter().map(|&id| rule.rhs.element(id).unwrap().kind()).collect();
        assert_eq!(kinds, vec![ElementKind::Node, ElementKind::Edge]);
    }
}
